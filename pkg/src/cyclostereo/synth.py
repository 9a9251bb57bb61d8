"""Synthetic rectified stereo pairs with exact cyclopean ground truth:
layered random-dot scenes on the integer grid, and a slanted-plane scene
with subpixel ground truth.

Boundary convention (integer scenes): a layer spanning pixel columns
[x0, x1) occupies the half-grid samples [2*x0 - 1, 2*x1 - 1], i.e. both
half-pixel boundary samples belong to the layer, and the rays that graze a
layer edge still see the surface behind it. Under this convention the
disparity jump across every occlusion run equals the run's width in
half-pixel steps exactly, and the evidence for every run-flanking cell is
an interpolated (half-supported) sample rather than a fully overwritten
one, so the matcher can recover the true run placement.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter

from .dp import LineSolution, check_gc
from .fill import DisparityMap, MonocularPrior
from .geometry import EpipolarGeometry


class SceneError(ValueError):
    pass


@dataclass(frozen=True)
class Layer:
    """Opaque rectangle in left-image coordinates, columns [x0, x1) and rows
    [y0, y1). disparity is the full-pixel disparity: an even int for
    integer-grid scenes, or plane coefficients (alpha, beta, gamma) giving
    alpha + beta*l + gamma*e for the slanted scene."""

    x0: int
    y0: int
    x1: int
    y1: int
    disparity: object

    @property
    def planar(self):
        return not isinstance(self.disparity, (int, np.integer))


@dataclass(frozen=True)
class SceneSpec:
    width: int
    height: int
    layers: tuple
    dot_density: float = 0.5
    seed: int = 0
    noise_sigma: float = 0.0
    max_disparity_c: int | None = None
    texture: str = "dots"  # dots | smooth

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if self.width < 4 or self.height < 1:
            raise SceneError("scene too small")
        if not (0 < self.dot_density <= 1):
            raise SceneError("dot_density must be in (0, 1]")
        if self.noise_sigma < 0:
            raise SceneError("noise_sigma must be >= 0")
        if self.texture not in ("dots", "smooth"):
            raise SceneError(f"unknown texture {self.texture!r}")
        if any(l.planar for l in self.layers):
            self._validate_planar()
        else:
            self._validate_integer()

    @property
    def planar(self):
        return any(l.planar for l in self.layers)

    def _validate_integer(self):
        cap = 2 * self.disparity_cap_c()
        prev = 0
        for l in self.layers:
            if not (0 <= l.x0 < l.x1 <= self.width and 0 <= l.y0 < l.y1 <= self.height):
                raise SceneError(f"rectangle out of bounds: {l}")
            d = int(l.disparity)
            if not (0 < d <= cap):
                raise SceneError(f"layer disparity {d} outside (0, {cap}]")
            if d % 2 != 0:
                raise SceneError("integer-grid scenes need even full-pixel disparities")
            if d <= prev:
                raise SceneError(
                    "overlapping layers with non-increasing disparity would "
                    "violate opacity; order layers back to front")
            prev = d
            if l.x1 - l.x0 < d:
                raise SceneError(
                    f"layer narrower ({l.x1 - l.x0}px) than its disparity ({d}px): "
                    "the background would stay visible through the jump")
            if l.x0 < d + 1:
                raise SceneError(
                    f"layer must keep x0 >= disparity+1 ({d + 1}) so its occlusion "
                    "band stays inside the image")

    def _validate_planar(self):
        if len(self.layers) != 1 or not self.layers[0].planar:
            raise SceneError("slanted scenes support a single full-frame plane")
        l = self.layers[0]
        if (l.x0, l.y0, l.x1, l.y1) != (0, 0, self.width, self.height):
            raise SceneError("the slanted plane must cover the full frame")
        alpha, beta, gamma = l.disparity
        if abs(beta) >= 0.5:
            raise SceneError("plane slope beta must satisfy |beta| < 0.5")
        corners = [alpha + beta * x + gamma * e
                   for x in (0, self.width - 1) for e in (0, self.height - 1)]
        cap = 2 * self.disparity_cap_c()
        if min(corners) <= 0 or max(corners) > cap:
            raise SceneError(f"plane disparities {min(corners):.2f}..{max(corners):.2f} "
                             f"outside (0, {cap}]")

    def disparity_cap_c(self):
        if self.max_disparity_c is not None:
            return self.max_disparity_c
        if not self.layers:
            return max(self.width // 8, 1)
        if self.planar:
            alpha, beta, gamma = self.layers[0].disparity
            top = max(alpha + beta * x + gamma * e
                      for x in (0, self.width - 1) for e in (0, self.height - 1))
            return int(np.ceil(top / 2.0)) + 1
        return int(max(int(l.disparity) for l in self.layers) // 2) + 1

    def geometry(self, focal_length_px=100.0, baseline=1.0):
        return EpipolarGeometry(focal_length_px=focal_length_px, baseline=baseline,
                                width=self.width, height=self.height,
                                max_disparity_c=self.disparity_cap_c())

    def to_json_dict(self):
        return {
            "width": self.width, "height": self.height,
            "layers": [{"x0": l.x0, "y0": l.y0, "x1": l.x1, "y1": l.y1,
                        "disparity": list(l.disparity) if l.planar else int(l.disparity)}
                       for l in self.layers],
            "dot_density": self.dot_density, "seed": self.seed,
            "noise_sigma": self.noise_sigma,
            "max_disparity_c": self.disparity_cap_c(),
            "texture": self.texture,
        }


def spec_from_json_dict(d):
    layers = tuple(Layer(x0=l["x0"], y0=l["y0"], x1=l["x1"], y1=l["y1"],
                         disparity=tuple(l["disparity"])
                         if isinstance(l["disparity"], (list, tuple))
                         else int(l["disparity"]))
                   for l in d.get("layers", []))
    return SceneSpec(width=d["width"], height=d["height"], layers=layers,
                     dot_density=d.get("dot_density", 0.5), seed=d.get("seed", 0),
                     noise_sigma=d.get("noise_sigma", 0.0),
                     max_disparity_c=d.get("max_disparity_c"),
                     texture=d.get("texture", "dots"))


@dataclass
class GroundTruth:
    """Exact ground truth: cyclopean disparity twice-values on the [M, 2N]
    grid (with ramp placeholders through occlusions), per-eye visibility, a
    left-view disparity map valid only where both eyes see the surface, and
    the full z-buffer raster left_all used to build monocular stand-ins."""

    cyclopean_d2: np.ndarray
    occ: np.ndarray
    h: np.ndarray
    left: DisparityMap
    left_all: np.ndarray
    occ_left_only: np.ndarray
    occ_right_only: np.ndarray


def _binary_dots(rng, shape, density):
    return (rng.random(shape) < density).astype(np.float64)


def _smooth_noise(rng, shape, sigma=0.8):
    t = gaussian_filter(rng.standard_normal(shape), sigma=sigma, mode="reflect")
    lo, hi = t.min(), t.max()
    return (t - lo) / (hi - lo) if hi > lo else np.full(shape, 0.5)


def _row_surfaces(spec, e):
    """Surfaces crossing row e, nearest first; background is disparity 0."""
    layers = [l for l in spec.layers if l.y0 <= e < l.y1]
    return sorted(layers, key=lambda l: -int(l.disparity))


def _integer_gt(spec):
    n, m = spec.width, spec.height
    nx = 2 * n
    d2 = np.full((m, nx), -1, dtype=np.int32)
    occ = np.ones((m, nx), dtype=bool)
    left_all = np.zeros((m, n), dtype=np.float64)
    left_valid = np.zeros((m, n), dtype=bool)
    occ_l = np.zeros((m, n), dtype=bool)
    occ_r = np.zeros((m, n), dtype=bool)
    x2 = np.arange(nx)

    for e in range(m):
        layers = _row_surfaces(spec, e)
        shadows = []  # (disparity, lshadow lo/hi, rshadow lo/hi)
        for l in layers:
            d = int(l.disparity)
            shadows.append((d, (2 * l.x0 - 1, 2 * l.x1 - 2),
                            (2 * l.x0 - 2 * d, 2 * l.x1 - 1 - 2 * d)))

        unset = np.ones(nx, dtype=bool)
        for k, l in enumerate(layers + [None]):
            if l is None:
                d = 0
                span_lo, span_hi = 0, nx - 1
            else:
                d = int(l.disparity)
                span_lo, span_hi = 2 * l.x0 - 1, 2 * l.x1 - 1
            l2 = x2 + d
            r2 = x2 - d
            has = (l2 >= max(span_lo, 0)) & (l2 <= min(span_hi, nx - 1)) & (r2 >= 0)
            hidden = np.zeros(nx, dtype=bool)
            for dk, (ll, lh), (rl, rh) in shadows:
                if dk <= d:
                    continue
                hidden |= (l2 >= ll) & (l2 <= lh)
                hidden |= (r2 >= rl) & (r2 <= rh)
            vis = has & ~hidden & unset
            d2[e, vis] = d
            occ[e, vis] = False
            unset &= ~vis

        _fill_ramps(d2[e], occ[e])

        # per-eye pixel masks and the left z-buffer
        cols = np.arange(n)
        surf_d = np.zeros(n, dtype=np.int64)
        for l in layers[::-1]:  # farthest first; nearer overwrites
            surf_d[l.x0:l.x1] = int(l.disparity)
        left_all[e] = surf_d
        seen_r = np.ones(n, dtype=bool)
        r2pix = 2 * cols - 2 * surf_d
        seen_r &= r2pix >= 0
        for dk, _, (rl, rh) in shadows:
            blocked = (r2pix >= rl) & (r2pix <= rh) & (surf_d < dk)
            seen_r &= ~blocked
        occ_l[e] = ~seen_r
        left_valid[e] = seen_r

        surf_rd = np.zeros(n, dtype=np.int64)
        for l in layers[::-1]:
            d = int(l.disparity)
            lo, hi = max(l.x0 - d, 0), max(l.x1 - d, 0)
            surf_rd[lo:hi] = d
        l2pix = 2 * cols + 2 * surf_rd
        seen_l = l2pix <= nx - 1
        for dk, (ll, lh), _ in shadows:
            blocked = (l2pix >= ll) & (l2pix <= lh) & (surf_rd < dk)
            seen_l &= ~blocked
        occ_r[e] = ~seen_l

    left_map = DisparityMap(height=m, width=n,
                            values=np.where(left_valid, left_all, np.inf),
                            valid=left_valid, source="gt")
    return GroundTruth(cyclopean_d2=d2.astype(np.float64), occ=occ,
                       h=np.zeros((m, nx), dtype=bool), left=left_map,
                       left_all=left_all, occ_left_only=occ_l, occ_right_only=occ_r)


def _fill_ramps(d2_row, occ_row):
    """Placeholder disparities through occlusions: +-1 per step between the
    flanking visible cells (their jump equals the gap width by construction);
    runs cut by the image border continue the flank with clamped steps."""
    nx = d2_row.shape[0]
    x = 0
    while x < nx:
        if not occ_row[x]:
            x += 1
            continue
        start = x
        while x < nx and occ_row[x]:
            x += 1
        end = x - 1
        has_l = start > 0
        has_r = end < nx - 1
        if has_l and has_r:
            da, db = d2_row[start - 1], d2_row[end + 1]
            sign = 1 if db >= da else -1
            for i, xx in enumerate(range(start, end + 1)):
                d2_row[xx] = da + sign * (i + 1)
        elif has_r:
            db = d2_row[end + 1]
            for i, xx in enumerate(range(end, start - 1, -1)):
                d2_row[xx] = max(db - (i + 1), 0)
        elif has_l:
            da = d2_row[start - 1]
            for i, xx in enumerate(range(start, end + 1)):
                d2_row[xx] = max(da - (i + 1), 0)
        else:
            d2_row[start:end + 1] = 0


def _render_integer(spec, rng):
    n, m = spec.width, spec.height
    tex = _binary_dots if spec.texture == "dots" else \
        (lambda r, s, d: _smooth_noise(r, s))
    bg = tex(rng, (m, n), spec.dot_density)
    left = bg.copy()
    right = bg.copy()
    for l in spec.layers:
        d = int(l.disparity)
        t = tex(rng, (l.y1 - l.y0, l.x1 - l.x0), spec.dot_density)
        left[l.y0:l.y1, l.x0:l.x1] = t
        right[l.y0:l.y1, l.x0 - d:l.x1 - d] = t
    return left, right


def _generate_planar(spec, rng):
    n, m = spec.width, spec.height
    nx = 2 * n
    alpha, beta, gamma = spec.layers[0].disparity
    tex = _smooth_noise(rng, (m, n + 2))
    bg = _smooth_noise(rng, (m, n))
    cols = np.arange(n, dtype=np.float64)
    left = np.empty((m, n))
    right = np.empty((m, n))
    left_all = np.empty((m, n))
    left_valid = np.zeros((m, n), dtype=bool)
    d2 = np.empty((m, nx))
    occ = np.ones((m, nx), dtype=bool)
    occ_l = np.zeros((m, n), dtype=bool)
    occ_r = np.zeros((m, n), dtype=bool)
    xs = np.arange(nx, dtype=np.float64) / 2.0
    for e in range(m):
        left[e] = tex[e, :n]
        d_of_l = alpha + beta * cols + gamma * e
        left_all[e] = d_of_l
        r_of_l = cols - d_of_l
        left_valid[e] = (r_of_l >= 0) & (r_of_l <= n - 1)
        occ_l[e] = ~left_valid[e]
        # right view: invert r = l - d(l) for the plane
        l_star = (cols + alpha + gamma * e) / (1.0 - beta)
        on_plane = (l_star >= 0) & (l_star <= n - 1)
        right[e] = np.where(on_plane, np.interp(l_star, np.arange(n), tex[e, :n]),
                            bg[e])
        occ_r[e] = ~on_plane
        dc = (alpha + beta * xs + gamma * e) / (2.0 - beta)
        d2[e] = 2.0 * dc
        l_pos = xs + dc
        r_pos = xs - dc
        occ[e] = ~((l_pos >= 0) & (l_pos <= n - 1) & (r_pos >= 0) & (r_pos <= n - 1))
    left_map = DisparityMap(height=m, width=n,
                            values=np.where(left_valid, left_all, np.inf),
                            valid=left_valid, source="gt")
    gt = GroundTruth(cyclopean_d2=d2, occ=occ, h=np.zeros((m, nx), dtype=bool),
                     left=left_map, left_all=left_all,
                     occ_left_only=occ_l, occ_right_only=occ_r)
    return left, right, gt


def generate(spec):
    """Render the pair and compute ground truth analytically (never by
    matching). Noise, when requested, is added after the GT is fixed."""
    rng = np.random.default_rng(spec.seed)
    if spec.planar:
        left, right, gt = _generate_planar(spec, rng)
    else:
        gt = _integer_gt(spec)
        left, right = _render_integer(spec, rng)
    if spec.noise_sigma > 0:
        left = np.clip(left + rng.normal(0, spec.noise_sigma, left.shape), 0, 1)
        right = np.clip(right + rng.normal(0, spec.noise_sigma, right.shape), 0, 1)
    return left, right, gt


@dataclass
class GTReport:
    gc2_ok: bool
    gc1_violations: list = field(default_factory=list)  # (row, violation)
    eq5_violations: list = field(default_factory=list)  # (row, x2)

    @property
    def ok(self):
        return self.gc2_ok and not self.gc1_violations and not self.eq5_violations


def verify_gt(gt):
    """Run the solver's constraint checks over the ground-truth path of
    every row. Integer-grid scenes only."""
    d2 = gt.cyclopean_d2
    if not np.all(d2 == np.rint(d2)):
        raise SceneError("verify_gt requires an integer-grid scene")
    rows, nx = d2.shape
    rep = GTReport(gc2_ok=True)
    for e in range(rows):
        occ = gt.occ[e].astype(np.uint8)
        sol = LineSolution(e=e, occ=occ, d2=d2[e].astype(np.int32),
                           h=gt.h[e].astype(np.uint8), data_mask=occ == 0,
                           cost=0.0, tags=occ)
        r = check_gc(sol)
        rep.gc2_ok &= r.gc2_ok
        rep.gc1_violations.extend((e, v) for v in r.gc1_violations)
        rep.eq5_violations.extend((e, x) for x in r.eq5_violations)
    return rep


def prior_standin_from_gt(gt, warp_gamma=1.8, blur_sigma=1.0, noise_sigma=0.0, seed=0):
    """Monocular-prior stand-in: the z-buffer disparity raster, min-max
    normalized, warped by a monotone power law (a monocular model recovers
    relative order but not affine-exact values), lightly blurred."""
    v = gt.left_all.astype(np.float64)
    lo, hi = v.min(), v.max()
    t = (v - lo) / (hi - lo) if hi > lo else np.full_like(v, 0.5)
    t = np.power(t, warp_gamma)
    if blur_sigma > 0:
        t = gaussian_filter(t, sigma=blur_sigma, mode="nearest")
    if noise_sigma > 0:
        rng = np.random.default_rng(seed)
        t = t + rng.normal(0, noise_sigma, t.shape)
    t = np.clip(t, 0.0, 1.0)
    lo, hi = t.min(), t.max()
    t = (t - lo) / (hi - lo) if hi > lo else np.full_like(t, 0.5)
    return MonocularPrior(height=v.shape[0], width=v.shape[1], values=t)


def random_scene_spec(rng, width=64, height=64, max_disparity_c=8, max_layers=2,
                      dot_density=0.5, noise_sigma=0.0):
    """Sample a layered-scene spec whose occlusion structure is pairwise
    simple (layers on disjoint row bands, or nested with insets), so the
    generated GT satisfies the jump-equality constraints exactly."""
    cap = 2 * max_disparity_c
    nested = max_layers >= 2 and rng.random() < 0.4
    layers = []
    if nested:
        d_vals = sorted(rng.choice(np.arange(2, cap + 1, 2),
                                   size=2, replace=False).tolist())
        d1, d2 = int(d_vals[0]), int(d_vals[1])
        w1 = int(rng.integers(max(d2 + 2 * (d2 + 1) + 2, d1 + 4), width - d1 - 4))
        x0 = int(rng.integers(d1 + 1, width - w1))
        y0 = int(rng.integers(0, height // 3))
        y1 = int(rng.integers(y0 + height // 3, height + 1))
        layers.append(Layer(x0=x0, y0=y0, x1=x0 + w1, y1=y1, disparity=d1))
        inset = d2 + 1
        ix0 = x0 + inset
        ix1 = x0 + w1 - inset
        iy0 = min(y0 + 1, height - 1)
        iy1 = max(y1 - 1, iy0 + 1)
        if ix1 - ix0 >= d2 and iy1 > iy0:
            layers.append(Layer(x0=ix0, y0=iy0, x1=ix1, y1=iy1, disparity=d2))
    else:
        k = int(rng.integers(1, max_layers + 1))
        d_vals = sorted(rng.choice(np.arange(2, cap + 1, 2),
                                   size=min(k, cap // 2), replace=False).tolist())
        bands = np.array_split(np.arange(height), len(d_vals))
        for band, d in zip(bands, d_vals):
            d = int(d)
            if len(band) < 2:
                continue
            wmin = max(d, 6)
            if d + 1 >= width - wmin - 1:
                continue
            x0 = int(rng.integers(d + 1, width - wmin))
            x1 = int(rng.integers(x0 + wmin, min(x0 + width // 2, width) + 1))
            y0 = int(band[0] + rng.integers(0, max(len(band) // 3, 1)))
            y1 = int(band[-1] + 1 - rng.integers(0, max(len(band) // 3, 1)))
            if y1 <= y0:
                continue
            layers.append(Layer(x0=x0, y0=y0, x1=x1, y1=y1, disparity=d))
    layers.sort(key=lambda l: int(l.disparity))
    return SceneSpec(width=width, height=height, layers=tuple(layers),
                     dot_density=dot_density, seed=int(rng.integers(0, 2 ** 31)),
                     noise_sigma=noise_sigma, max_disparity_c=max_disparity_c)
