"""Readers and writers: grayscale PFM (Middlebury disparity convention),
binary PGM, calib.txt, and grayscale image loading."""

from __future__ import annotations

import numpy as np
from PIL import Image

from .geometry import EpipolarGeometry


class FormatError(ValueError):
    pass


def _read_token(f):
    tok = b""
    while True:
        ch = f.read(1)
        if not ch:
            raise FormatError("unexpected end of file in header")
        if ch.isspace():
            if tok:
                return tok
            continue
        tok += ch


def read_pfm(path):
    """Read a grayscale PFM. Returns (values, valid) with +inf cells invalid.

    The scale line's sign encodes endianness; rows are stored bottom-up.
    """
    with open(path, "rb") as f:
        magic = _read_token(f)
        if magic == b"PF":
            raise FormatError(f"{path}: color PFM unsupported")
        if magic != b"Pf":
            raise FormatError(f"{path}: not a PFM file (magic {magic!r})")
        width = int(_read_token(f))
        height = int(_read_token(f))
        scale = float(_read_token(f))
        dtype = "<f4" if scale < 0 else ">f4"
        payload = f.read()
    data = np.frombuffer(payload, dtype=dtype)
    if data.size < width * height:
        raise FormatError(f"{path}: truncated payload "
                          f"({data.size} of {width * height} floats)")
    if data.size > width * height:
        raise FormatError(f"{path}: trailing bytes after payload")
    raster = data.reshape(height, width)[::-1].astype(np.float64)
    if np.isnan(raster).any():
        raise FormatError(f"{path}: NaN payload")
    valid = np.isfinite(raster)
    return raster, valid


def write_pfm(values, path, valid=None):
    """Write a grayscale PFM (little-endian); invalid cells become +inf."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise FormatError("PFM raster must be 2D")
    if np.isnan(arr).any():
        raise FormatError("refusing to write NaN values")
    out = arr.copy()
    if valid is not None:
        out[~np.asarray(valid, dtype=bool)] = np.inf
    h, w = out.shape
    with open(path, "wb") as f:
        f.write(b"Pf\n")
        f.write(f"{w} {h}\n".encode("ascii"))
        f.write(b"-1.0\n")
        f.write(out[::-1].astype("<f4").tobytes())


def read_pgm(path):
    """Read a binary (P5) PGM with maxval <= 255 into a uint8 array."""
    with open(path, "rb") as f:
        if _read_token(f) != b"P5":
            raise FormatError(f"{path}: not a binary PGM")
        width = int(_read_token(f))
        height = int(_read_token(f))
        maxval = int(_read_token(f))
        if maxval <= 0 or maxval > 255:
            raise FormatError(f"{path}: unsupported maxval {maxval}")
        payload = f.read(width * height)
    if len(payload) < width * height:
        raise FormatError(f"{path}: truncated payload")
    return np.frombuffer(payload, dtype=np.uint8).reshape(height, width).copy()


def write_pgm(values, path):
    arr = np.asarray(values)
    if arr.dtype != np.uint8:
        arr = np.clip(np.rint(arr), 0, 255).astype(np.uint8)
    h, w = arr.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(arr.tobytes())


def write_mask_pgm(mask, path):
    """Write a boolean mask as 0/255."""
    write_pgm(np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8), path)


def load_image_gray(path):
    """Load PGM/PNG/... as float64 grayscale in [0, 1] (Rec. 601 luma for RGB)."""
    img = Image.open(path)
    if img.mode in ("I;16", "I"):
        arr = np.asarray(img, dtype=np.float64)
        return arr / max(arr.max(), 1.0)
    if img.mode not in ("L", "F"):
        rgb = np.asarray(img.convert("RGB"), dtype=np.float64)
        arr = 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]
        return arr / 255.0
    arr = np.asarray(img, dtype=np.float64)
    if img.mode == "L":
        arr = arr / 255.0
    return arr


def _parse_cam_matrix(text):
    body = text.strip()
    if not (body.startswith("[") and body.endswith("]")):
        raise FormatError(f"bad camera matrix: {text!r}")
    rows = [[float(x) for x in row.split()] for row in body[1:-1].split(";")]
    return np.array(rows, dtype=np.float64)


def read_calib(path):
    """Parse a Middlebury-style calib.txt into an EpipolarGeometry.

    Required: cam0 (focal length from cam0[0][0]), baseline, width, height.
    Optional: doffs (default 0) and ndisp (default width/4);
    max_disparity_c = ceil(ndisp / 2).
    """
    kv = {}
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line or "=" not in line:
                continue
            key, val = line.split("=", 1)
            kv[key.strip()] = val.strip()
    for key in ("cam0", "baseline", "width", "height"):
        if key not in kv:
            raise FormatError(f"{path}: {key} missing")
    cam0 = _parse_cam_matrix(kv["cam0"])
    width = int(float(kv["width"]))
    height = int(float(kv["height"]))
    ndisp = int(float(kv.get("ndisp", width // 4)))
    return EpipolarGeometry(
        focal_length_px=float(cam0[0][0]),
        baseline=float(kv["baseline"]),
        width=width,
        height=height,
        max_disparity_c=(ndisp + 1) // 2,
        disparity_offset=float(kv.get("doffs", 0.0)),
    )
