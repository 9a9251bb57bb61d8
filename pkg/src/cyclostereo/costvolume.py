"""Per-epipolar-line feature-match distance over the cyclopean grid.

A cell (x2, d2) pairs the left sample at half-grid index x2 + d2 with the
right sample at x2 - d2. Distances are FM = 1 - FMS / max(FMS), normalized
per line by default so the best match on each line sits at 0.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .fileio import write_pgm


class CostVolumeError(ValueError):
    pass


@dataclass
class MatchDistanceSlice:
    """FM distances for one epipolar line: fm[nx, nd] in [0, 1].

    Invalid cells (an implied image sample out of range, or beyond the
    disparity cap) carry fm = 1 and valid = False; the solver refuses to
    place a visible state there.
    """

    e: int
    nx: int
    nd: int
    fm: np.ndarray
    valid: np.ndarray
    fm_max_used: float
    degenerate_normalizer: bool = field(default=False)


def fms(feat_left, feat_right, e, x2, d2):
    """Feature-match similarity: channel dot product of the left sample at
    x2 + d2 and the right sample at x2 - d2. Returns None when either
    implied sample is out of range."""
    _check_doubled_pair(feat_left, feat_right)
    n2 = feat_left.width_samples
    il, ir = x2 + d2, x2 - d2
    if not (0 <= il < n2 and 0 <= ir < n2):
        return None
    return float(np.dot(feat_left.data[e, il].astype(np.float64),
                        feat_right.data[e, ir].astype(np.float64)))


def _check_doubled_pair(feat_left, feat_right):
    if not (feat_left.doubled and feat_right.doubled):
        raise CostVolumeError("feature volumes must be doubled")
    if feat_left.data.shape != feat_right.data.shape:
        raise CostVolumeError(
            f"volume shapes differ: {feat_left.data.shape} vs {feat_right.data.shape}")


def line_similarities(feat_left, feat_right, e, geom):
    """Raw FMS matrix [nx, nd] and validity for one line (invalid cells 0)."""
    _check_doubled_pair(feat_left, feat_right)
    nx, nd = geom.nx, geom.nd
    if feat_left.width_samples != nx or feat_left.height != geom.height:
        raise CostVolumeError(
            f"volume {feat_left.height}x{feat_left.width_samples} does not match "
            f"geometry {geom.height}x{nx}")
    fl = feat_left.data[e].astype(np.float64)
    fr = feat_right.data[e].astype(np.float64)
    sims = np.zeros((nx, nd), dtype=np.float64)
    valid = np.zeros((nx, nd), dtype=bool)
    for d2 in range(nd):
        lo, hi = d2, nx - 1 - d2
        if lo > hi:
            break
        # x2 in [d2, nx-1-d2]: left index x2+d2 spans [2*d2, nx-1],
        # right index x2-d2 spans [0, nx-1-2*d2]
        vals = np.einsum("xc,xc->x", fl[2 * d2:], fr[:nx - 2 * d2])
        sims[lo:hi + 1, d2] = vals
        valid[lo:hi + 1, d2] = True
    return sims, valid


def build_slice(feat_left, feat_right, e, geom, normalizer=None):
    """Build the FM distance slice for line e.

    normalizer overrides the per-line max-FMS (used for global scope); a
    nonpositive normalizer candidate falls back to 1 with a warning flag.
    """
    sims, valid = line_similarities(feat_left, feat_right, e, geom)
    if not valid.any():
        raise CostVolumeError(f"degenerate epipolar line {e}: no valid cell")
    degenerate = False
    fm_max = float(sims[valid].max()) if normalizer is None else float(normalizer)
    if fm_max <= 0:
        fm_max = 1.0
        degenerate = True
    fm = 1.0 - sims / fm_max
    np.clip(fm, 0.0, 1.0, out=fm)
    fm[~valid] = 1.0
    return MatchDistanceSlice(e=e, nx=geom.nx, nd=geom.nd, fm=fm, valid=valid,
                              fm_max_used=fm_max, degenerate_normalizer=degenerate)


def build_all(feat_left, feat_right, geom, norm_scope="line"):
    """Slices for every line. norm_scope 'line' normalizes per line,
    'global' by the max FMS over the whole volume."""
    if norm_scope not in ("line", "global"):
        raise CostVolumeError(f"unknown normalization scope {norm_scope!r}")
    normalizer = None
    if norm_scope == "global":
        best = -np.inf
        for e in range(geom.height):
            sims, valid = line_similarities(feat_left, feat_right, e, geom)
            if valid.any():
                best = max(best, float(sims[valid].max()))
        normalizer = best
    return [build_slice(feat_left, feat_right, e, geom, normalizer=normalizer)
            for e in range(geom.height)]


def export_slice(sl, fmt, path):
    """Write a slice as CSV (header of d2 levels, one row per x2) or as an
    8-bit PGM where fm=0 is black (good match) and fm=1 white."""
    if fmt == "csv":
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow([f"d2={d}" for d in range(sl.nd)])
            for x2 in range(sl.nx):
                writer.writerow([f"{v:.9g}" for v in sl.fm[x2]])
    elif fmt == "pgm":
        img = np.floor(sl.fm * 255.0 + 0.5).astype(np.uint8)
        write_pgm(img, path)
    else:
        raise CostVolumeError(f"unknown export format {fmt!r}")


def read_slice_csv(path):
    """Inverse of the CSV export (values only)."""
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    return np.array([[float(v) for v in row] for row in rows[1:]], dtype=np.float64)
