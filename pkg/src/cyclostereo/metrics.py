"""Evaluation metrics over disparity maps: absolute/thresholded/RMS error,
structural-similarity error, PSNR and mutual-information similarity, signed
error rasters, and the GT-range affine normalization used for monocular
baselines. Everything is computed over cells valid in both maps."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from PIL import Image
from scipy.signal import convolve2d

from .fill import DisparityMap

MI_BINS = 64
SSIM_SIGMA = 1.5
SSIM_WIN = 7


class MetricsError(ValueError):
    pass


@dataclass
class MetricReport:
    avg_error: float
    bad_error: float
    rms_error: float
    ssim_error: float | None
    psnr_sim: float | None
    mutual_info_sim: float
    evaluated_pixels: int
    tau: float
    notes: tuple = field(default=())

    def to_json_dict(self):
        def enc(v):
            if v is None:
                return None
            if math.isinf(v):
                return "infinite"
            return v
        return {
            "avg_error": self.avg_error,
            "bad_error": self.bad_error,
            "rms_error": self.rms_error,
            "ssim_error": enc(self.ssim_error),
            "psnr_sim": enc(self.psnr_sim),
            "mutual_info_sim": self.mutual_info_sim,
            "evaluated_pixels": self.evaluated_pixels,
            "tau": self.tau,
            "notes": list(self.notes),
        }


def _joint(est, gt):
    if est.values.shape != gt.values.shape:
        raise MetricsError(f"dimension mismatch: {est.values.shape} vs {gt.values.shape}")
    m = est.valid & gt.valid
    if not m.any():
        raise MetricsError("no jointly valid pixels")
    return m


def _gauss_kernel():
    g = np.exp(-((np.arange(SSIM_WIN) - SSIM_WIN // 2) ** 2) / (2.0 * SSIM_SIGMA ** 2))
    k = np.outer(g, g)
    return k / k.sum()


def _ssim_mean(a, b, mask, data_range):
    """Gaussian-weighted SSIM map with symmetric padding, averaged over mask."""
    k = _gauss_kernel()
    pad = SSIM_WIN // 2
    ap = np.pad(a, pad, mode="symmetric")
    bp = np.pad(b, pad, mode="symmetric")

    def win(x):
        return convolve2d(x, k, mode="valid")

    mu_a = win(ap)
    mu_b = win(bp)
    var_a = win(ap * ap) - mu_a * mu_a
    var_b = win(bp * bp) - mu_b * mu_b
    cov = win(ap * bp) - mu_a * mu_b
    c1 = (0.01 * data_range) ** 2
    c2 = (0.03 * data_range) ** 2
    ssim_map = ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) / \
               ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2))
    return float(ssim_map[mask].mean())


def evaluate(est, gt, tau=2.0):
    """Full metric suite over the jointly valid cells.

    SSIM/PSNR use gt's valid range as the dynamic range and are reported as
    undefined (None) when that range is zero; invalid cells are replaced by
    the mean of gt's valid cells before SSIM windowing so the result cannot
    depend on values under the mask.
    """
    m = _joint(est, gt)
    e = est.values[m].astype(np.float64)
    g = gt.values[m].astype(np.float64)
    diff = e - g
    avg = float(np.abs(diff).mean())
    bad = float((np.abs(diff) > tau).mean())
    rms = float(np.sqrt((diff * diff).mean()))

    notes = []
    rng = float(g.max() - g.min())
    if rng == 0.0:
        ssim_err = None
        psnr = None
        notes.append("gt range is zero: ssim_error and psnr_sim undefined")
    else:
        fillv = float(g.mean())
        a = np.where(m, est.values, fillv)
        b = np.where(m, gt.values, fillv)
        ssim_err = 1.0 - _ssim_mean(a, b, m, rng)
        mse = float((diff * diff).mean())
        psnr = math.inf if mse == 0.0 else 10.0 * math.log10(rng * rng / mse)

    mi = _mutual_info(e, g)
    return MetricReport(avg_error=avg, bad_error=bad, rms_error=rms,
                        ssim_error=ssim_err, psnr_sim=psnr, mutual_info_sim=mi,
                        evaluated_pixels=int(m.sum()), tau=tau, notes=tuple(notes))


def _mutual_info(e, g):
    """MI in nats from a 64x64 joint histogram binned over the joint range."""
    lo = float(min(e.min(), g.min()))
    hi = float(max(e.max(), g.max()))
    width = (hi - lo) / MI_BINS if hi > lo else 1.0
    ie = np.clip(((e - lo) / width).astype(np.int64), 0, MI_BINS - 1)
    ig = np.clip(((g - lo) / width).astype(np.int64), 0, MI_BINS - 1)
    joint = np.zeros((MI_BINS, MI_BINS), dtype=np.int64)
    np.add.at(joint, (ie, ig), 1)
    n = e.size
    p = joint / n
    pe = p.sum(axis=1)
    pg = p.sum(axis=0)
    nz = p > 0
    denom = np.outer(pe, pg)
    return float((p[nz] * np.log(p[nz] / denom[nz])).sum())


def signed_error_map(est, gt):
    """est - gt on jointly valid cells (NaN elsewhere) and the mean absolute
    error; negative cells render red, positive blue, invalid white."""
    m = _joint(est, gt)
    raster = np.full(est.values.shape, np.nan)
    raster[m] = est.values[m] - gt.values[m]
    mean_abs = float(np.abs(raster[m]).mean())
    return raster, mean_abs


def export_signed_error_png(raster, path):
    h, w = raster.shape
    rgb = np.full((h, w, 3), 255, dtype=np.uint8)
    m = np.isfinite(raster)
    if m.any():
        scale = float(np.abs(raster[m]).max())
        if scale > 0:
            t = np.clip(raster / scale, -1.0, 1.0)
            neg = m & (raster < 0)
            pos = m & (raster > 0)
            # toward red for negative, toward blue for positive
            rgb[neg, 1] = np.round(255 * (1 + t[neg])).astype(np.uint8)
            rgb[neg, 2] = np.round(255 * (1 + t[neg])).astype(np.uint8)
            rgb[pos, 0] = np.round(255 * (1 - t[pos])).astype(np.uint8)
            rgb[pos, 1] = np.round(255 * (1 - t[pos])).astype(np.uint8)
    Image.fromarray(rgb).save(path)


def affine_normalize_to_gt(est, gt):
    """Affine map of est so its valid min/max land exactly on gt's."""
    if not est.valid.any() or not gt.valid.any():
        raise MetricsError("both maps need valid cells")
    e = est.values[est.valid]
    g = gt.values[gt.valid]
    e_lo, e_hi = float(e.min()), float(e.max())
    g_lo, g_hi = float(g.min()), float(g.max())
    if e_hi <= e_lo:
        raise MetricsError("zero range in the map being normalized")
    a = (g_hi - g_lo) / (e_hi - e_lo)
    b = g_lo - a * e_lo
    values = np.where(est.valid, a * est.values + b, np.inf)
    return DisparityMap(height=est.height, width=est.width, values=values,
                        valid=est.valid.copy(), source=est.source)


def depth_from_monocular(depth, focal_length_px, baseline, doffs=0.0, valid=None):
    """Convert a metric depth raster to full-pixel disparities:
    disparity = f * B / depth - doffs. Nonpositive depths (and any resulting
    negative disparities) are marked invalid."""
    depth = np.asarray(depth, dtype=np.float64)
    ok = np.isfinite(depth) & (depth > 0)
    if valid is not None:
        ok &= np.asarray(valid, dtype=bool)
    disp = np.full(depth.shape, np.inf)
    disp[ok] = focal_length_px * baseline / depth[ok] - doffs
    ok &= disp >= 0
    disp[~ok] = np.inf
    return DisparityMap(height=depth.shape[0], width=depth.shape[1],
                        values=disp, valid=ok, source="gt")
