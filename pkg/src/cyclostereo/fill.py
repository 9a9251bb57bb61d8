"""Left-view projection of a cyclopean solution and completion of the
untrusted gaps (occluded / homogeneous cells) from a monocular prior.

The prior is a relative inverse-depth raster in [0, 1]; it is first affine
aligned to the trusted disparities, then gaps are filled either directly
(affine mode) or by blending the prior's gradients into each gap with the
trusted values as boundary conditions (poisson mode).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.ndimage as ndi
import scipy.sparse as sp
from scipy.sparse.linalg import cg

from .fileio import read_pfm


class FillError(ValueError):
    pass


@dataclass
class DisparityMap:
    """Dense left-view full-pixel disparity with a validity raster."""

    height: int
    width: int
    values: np.ndarray
    valid: np.ndarray
    source: str  # dp | filled | gt
    notes: tuple = field(default=())

    def __post_init__(self):
        if self.values.shape != (self.height, self.width):
            raise FillError(f"values shape {self.values.shape} != "
                            f"({self.height}, {self.width})")
        if self.valid.shape != self.values.shape:
            raise FillError("valid mask shape mismatch")
        if self.source not in ("dp", "filled", "gt"):
            raise FillError(f"unknown source {self.source!r}")
        vals = self.values[self.valid]
        if vals.size and (not np.all(np.isfinite(vals)) or vals.min() < 0):
            raise FillError("valid disparities must be finite and >= 0")


@dataclass
class MonocularPrior:
    """Left-view relative inverse depth, normalized to [0, 1]."""

    height: int
    width: int
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != (self.height, self.width):
            raise FillError("prior shape mismatch")
        if not np.all(np.isfinite(self.values)):
            raise FillError("prior must be finite")
        if self.values.min() < -1e-9 or self.values.max() > 1 + 1e-9:
            raise FillError("prior must lie in [0, 1]")


def load_prior(path):
    """Read a PFM prior at any positive scale and min-max normalize it."""
    raster, valid = read_pfm(path)
    if not valid.all():
        raise FillError(f"{path}: prior must be fully finite")
    lo, hi = raster.min(), raster.max()
    if hi <= lo:
        raise FillError(f"{path}: constant prior")
    vals = (raster - lo) / (hi - lo)
    return MonocularPrior(height=raster.shape[0], width=raster.shape[1], values=vals)


def project_to_left(sol, use_refined=False):
    """Map trusted cyclopean cells to the left image: l = (x2 + d2) / 2.

    Only integral l receive a value; where two cells land on one pixel the
    larger disparity wins (the nearer of two opaque surfaces is the one
    seen). Uncovered pixels are invalid.
    """
    height = len(sol.lines)
    width = sol.lines[0].nx // 2
    values = np.full((height, width), np.inf)
    valid = np.zeros((height, width), dtype=bool)
    for e, ln in enumerate(sol.lines):
        xs = np.flatnonzero(ln.data_mask)
        l2 = xs + ln.d2[xs]
        keep = (l2 % 2 == 0) & (l2 // 2 < width)
        xs, l = xs[keep], l2[keep] // 2
        if use_refined and ln.refined_d is not None:
            vals = 2.0 * ln.refined_d[xs]
        else:
            vals = ln.d2[xs].astype(np.float64)
        order = np.argsort(ln.d2[xs], kind="stable")  # largest d2 written last wins
        values[e, l[order]] = vals[order]
        valid[e, l] = True
    return DisparityMap(height=height, width=width, values=values,
                        valid=valid, source="dp")


def affine_align(prior, dp_map):
    """Least-squares (a, b) minimizing sum over trusted cells of
    (a * prior + b - disparity)^2, via the normal equations."""
    m = dp_map.valid
    if int(m.sum()) < 2:
        raise FillError("need at least 2 trusted cells for affine alignment")
    p = prior.values[m]
    y = dp_map.values[m]
    pm = p.mean()
    var = float(((p - pm) ** 2).sum())
    if var < 1e-12:
        raise FillError("degenerate prior: constant beneath trusted cells")
    a = float(((p - pm) * (y - y.mean())).sum() / var)
    b = float(y.mean() - a * pm)
    return a, b


def _fill_affine(prior, dp_map, a, b):
    out = dp_map.values.copy()
    gaps = ~dp_map.valid
    out[gaps] = a * prior.values[gaps] + b
    return out


def _solve_region(idx_map, region_pixels, prior, dp_map, a, b):
    """Screened least squares on one 4-connected gap region: match the
    prior's scaled gradients inside, clamp to trusted values on the rim,
    anchor to the affine fill along the image border."""
    h, w = dp_map.values.shape
    n = len(region_pixels)
    rows, cols, vals = [], [], []
    rhs = np.zeros(n)
    diag = np.zeros(n)
    pv = prior.values
    for k, (i, j) in enumerate(region_pixels):
        for di, dj in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            ni, nj = i + di, j + dj
            if not (0 <= ni < h and 0 <= nj < w):
                diag[k] += 1.0
                rhs[k] += a * pv[i, j] + b
                continue
            diag[k] += 1.0
            grad = a * (pv[i, j] - pv[ni, nj])
            rhs[k] += grad
            if dp_map.valid[ni, nj]:
                rhs[k] += dp_map.values[ni, nj]
            else:
                q = idx_map[ni, nj]
                rows.append(k)
                cols.append(q)
                vals.append(-1.0)
    rows.extend(range(n))
    cols.extend(range(n))
    vals.extend(diag)
    mat = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    x0 = np.array([a * pv[i, j] + b for i, j in region_pixels])
    maxiter = max(10 * n, 10)
    sol, info = cg(mat, rhs, x0=x0, rtol=1e-6, atol=0.0, maxiter=maxiter)
    return sol, info == 0


def fill_gaps(prior, dp_map, mode="poisson"):
    """Complete every invalid cell; trusted cells pass through untouched."""
    if prior.values.shape != dp_map.values.shape:
        raise FillError("prior and disparity map dimensions differ")
    if mode not in ("affine", "poisson"):
        raise FillError(f"unknown fill mode {mode!r}")
    if dp_map.valid.all():
        return DisparityMap(height=dp_map.height, width=dp_map.width,
                            values=dp_map.values.copy(), valid=dp_map.valid.copy(),
                            source="filled")
    a, b = affine_align(prior, dp_map)
    notes = []
    if mode == "affine":
        out = _fill_affine(prior, dp_map, a, b)
    else:
        out = dp_map.values.copy()
        labels, nreg = ndi.label(~dp_map.valid,
                                 structure=[[0, 1, 0], [1, 1, 1], [0, 1, 0]])
        idx_map = np.full(dp_map.values.shape, -1, dtype=np.int64)
        for r in range(1, nreg + 1):
            pix = np.argwhere(labels == r)
            for k, (i, j) in enumerate(pix):
                idx_map[i, j] = k
            solved, converged = _solve_region(
                idx_map, [tuple(p) for p in pix], prior, dp_map, a, b)
            if not converged:
                notes.append(f"region {r}: CG not converged, best iterate kept")
            for k, (i, j) in enumerate(pix):
                out[i, j] = solved[k]
    out = np.maximum(out, 0.0)  # disparities stay nonnegative
    return DisparityMap(height=dp_map.height, width=dp_map.width, values=out,
                        valid=np.ones_like(dp_map.valid), source="filled",
                        notes=tuple(notes))
