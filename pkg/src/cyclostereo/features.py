"""Per-pixel feature volumes and their resampling onto the doubled-width
half-pixel grid used by the cyclopean matcher.

Feature provenance is pluggable: the built-in census+patch extractor needs no
learned weights, and externally produced volumes are exchanged through the
B2FT container (see read/write below).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

VARIANCE_FLOOR = 1e-8

B2FT_MAGIC = b"B2FT"
B2FT_VERSION = 1
_HEADER = struct.Struct("<4sIIIIBB6x")  # magic, version, h, w, c, doubled, normalized


class FeatureError(ValueError):
    pass


class B2FTFormatError(FeatureError):
    pass


@dataclass
class FeatureVolume:
    """Row-major [height, width_samples, channels] float32 features.

    width_samples is the image width N for native volumes and 2N once
    doubled onto the half-pixel grid. Normalized volumes have unit L2 norm
    per sample, except all-zero padding samples.
    """

    height: int
    width_samples: int
    channels: int
    doubled: bool
    normalized: bool
    data: np.ndarray

    def __post_init__(self):
        expected = (self.height, self.width_samples, self.channels)
        if self.data.shape != expected:
            raise FeatureError(f"data shape {self.data.shape} != {expected}")
        if not np.all(np.isfinite(self.data)):
            raise FeatureError("feature volume contains non-finite values")


def census_patch_features(image, window_radius=1):
    """Census comparisons concatenated with standardized patch intensities.

    Per pixel: sign(neighbor - center) over the (2r+1)^2 - 1 neighbors
    (clamped sampling at the borders), then the (2r+1)^2 patch values after
    zero-mean/unit-variance standardization, the whole vector L2-normalized.
    Patches with variance below the floor contribute zero channels, so a
    constant image yields all-zero padding samples.

    window_radius may also be a (row_radius, col_radius) pair; a window
    narrow across rows and wide along them keeps the disparity signal while
    limiting bleed across horizontal surface boundaries.
    """
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2 or img.size == 0:
        raise FeatureError("image must be a non-empty 2D array")
    if isinstance(window_radius, (tuple, list)):
        ry, rx = int(window_radius[0]), int(window_radius[1])
    else:
        ry = rx = int(window_radius)
    if ry < 0 or rx < 1 or (ry == 0 and rx == 0):
        raise FeatureError("window radius must be >= 1 (row radius may be 0)")
    h, w = img.shape
    if h < 2 * ry + 1 or w < 2 * rx + 1:
        raise FeatureError(
            f"image {h}x{w} smaller than the {2*ry+1}x{2*rx+1} window")

    padded = np.pad(img, ((ry, ry), (rx, rx)), mode="edge")
    rows, cols = 2 * ry + 1, 2 * rx + 1
    patches = np.empty((h, w, rows * cols), dtype=np.float64)
    k = 0
    for dy in range(rows):
        for dx in range(cols):
            patches[:, :, k] = padded[dy:dy + h, dx:dx + w]
            k += 1
    center = (rows * cols) // 2

    census = np.sign(np.delete(patches, center, axis=2) - img[:, :, None])

    mean = patches.mean(axis=2, keepdims=True)
    var = patches.var(axis=2, keepdims=True)
    ok = var >= VARIANCE_FLOOR
    std = np.sqrt(np.where(ok, var, 1.0))
    patch_feat = np.where(ok, (patches - mean) / std, 0.0)

    feat = np.concatenate([census, patch_feat], axis=2)
    norms = np.linalg.norm(feat, axis=2, keepdims=True)
    feat = np.where(norms > 0, feat / np.where(norms > 0, norms, 1.0), 0.0)
    return FeatureVolume(height=h, width_samples=w, channels=feat.shape[2],
                         doubled=False, normalized=True,
                         data=feat.astype(np.float32))


def patch_features(image, window_radius=(1, 2)):
    """Zero-mean, L2-normalized raw patches (the correlation kernel of
    classic NCC matching). Better suited than census to smooth textures,
    where comparison signs discard the magnitudes subpixel fitting needs."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2 or img.size == 0:
        raise FeatureError("image must be a non-empty 2D array")
    if isinstance(window_radius, (tuple, list)):
        ry, rx = int(window_radius[0]), int(window_radius[1])
    else:
        ry = rx = int(window_radius)
    h, w = img.shape
    padded = np.pad(img, ((ry, ry), (rx, rx)), mode="edge")
    rows, cols = 2 * ry + 1, 2 * rx + 1
    patches = np.empty((h, w, rows * cols), dtype=np.float64)
    k = 0
    for dy in range(rows):
        for dx in range(cols):
            patches[:, :, k] = padded[dy:dy + h, dx:dx + w]
            k += 1
    feat = patches - patches.mean(axis=2, keepdims=True)
    norms = np.linalg.norm(feat, axis=2, keepdims=True)
    feat = np.where(norms > np.sqrt(VARIANCE_FLOOR),
                    feat / np.where(norms > 0, norms, 1.0), 0.0)
    return FeatureVolume(height=h, width_samples=w, channels=feat.shape[2],
                         doubled=False, normalized=True,
                         data=feat.astype(np.float32))


def double_width(fv):
    """Resample a native volume onto the 2N half-pixel grid.

    Even output samples are bit-identical copies of the inputs; odd samples
    are channel-wise averages of their two neighbors (the last one replicates
    sample N-1), re-normalized when the input is a normalized volume.
    """
    if fv.doubled:
        raise FeatureError("feature volume is already doubled")
    h, n, c = fv.height, fv.width_samples, fv.channels
    out = np.empty((h, 2 * n, c), dtype=fv.data.dtype)
    out[:, 0::2, :] = fv.data
    mid = (fv.data[:, :-1, :].astype(np.float64) + fv.data[:, 1:, :]) / 2.0
    if fv.normalized:
        norms = np.linalg.norm(mid, axis=2, keepdims=True)
        mid = np.where(norms > 0, mid / np.where(norms > 0, norms, 1.0), 0.0)
    out[:, 1:-1:2, :] = mid.astype(fv.data.dtype)
    out[:, -1, :] = fv.data[:, -1, :]
    return FeatureVolume(height=h, width_samples=2 * n, channels=c,
                         doubled=True, normalized=fv.normalized, data=out)


def store_feature_volume(fv, path):
    """Write a volume as a B2FT file (little-endian float32, channel-fastest)."""
    header = _HEADER.pack(B2FT_MAGIC, B2FT_VERSION, fv.height, fv.width_samples,
                          fv.channels, int(fv.doubled), int(fv.normalized))
    with open(path, "wb") as f:
        f.write(header)
        f.write(np.ascontiguousarray(fv.data, dtype="<f4").tobytes())


def load_feature_volume(path, expect=None):
    """Read a B2FT file; optionally validate (height, width) against a pair.

    expect is (height, native_width); doubled volumes must carry 2x the width.
    """
    with open(path, "rb") as f:
        raw = f.read(_HEADER.size)
        if len(raw) < _HEADER.size:
            raise B2FTFormatError(f"{path}: truncated header")
        magic, version, h, w, c, doubled, normalized = _HEADER.unpack(raw)
        if magic != B2FT_MAGIC:
            raise B2FTFormatError(f"{path}: not a B2FT file")
        if version != B2FT_VERSION:
            raise B2FTFormatError(f"{path}: unsupported B2FT version {version}")
        payload = f.read()
    count = h * w * c
    data = np.frombuffer(payload, dtype="<f4")
    if data.size < count:
        raise B2FTFormatError(
            f"{path}: payload holds {data.size} floats, header declares {count}")
    if data.size > count:
        raise B2FTFormatError(f"{path}: trailing bytes after payload")
    data = data.reshape(h, w, c).copy()
    if expect is not None:
        eh, ew = expect
        want_w = 2 * ew if doubled else ew
        if (h, w) != (eh, want_w):
            raise B2FTFormatError(
                f"{path}: volume is {h}x{w}, stereo pair expects {eh}x{want_w}")
    return FeatureVolume(height=h, width_samples=w, channels=c,
                         doubled=bool(doubled), normalized=bool(normalized),
                         data=data)
