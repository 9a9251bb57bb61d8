"""Per-epipolar-line dynamic program over states [occluded, d2].

The path pays fm(x2, d2) at visible cells and lam at occluded cells, minus
eps for every adjacent occluded pair; d2 may change by at most 1 per
half-pixel step. Adjacent occluded cells must step d2 by +-1 (the jump of a
disparity discontinuity equals the width of the paired occlusion), except
that a zero step is tolerated to capture homogeneous regions.

Two transition rule-sets:
  * strict_gc1_runs=True (default): occluded cells carry a direction fixed
    for the whole run (up / down / flat), including the entry and exit
    steps of directional runs, so the endpoint jump of every non-flat run
    equals its width exactly. Flat (homogeneous) runs are at least two
    cells long.
  * strict_gc1_runs=False: the literal local rule only; runs may mix
    directions.

Tie-breaking among equal-cost predecessors: visible beats occluded, then
smaller |delta d2|, then smaller predecessor d2, then the fixed tag order
below. Deterministic, shared with the brute-force oracle.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from numba import njit

# state tags; strict mode uses all five, literal mode VIS/UP only (UP = occluded)
VIS, UP, DOWN, FLAT0, FLAT1 = 0, 1, 2, 3, 4

INF = np.inf


class DPError(ValueError):
    pass


@dataclass(frozen=True)
class DPParams:
    # defaults calibrated on synthetic random-dot scenes (visible-pixel
    # accuracy, noiseless and sigma=5/255), see tests/test_acceptance.py
    lam: float = 0.6
    eps: float = 0.05
    strict_gc1_runs: bool = True
    subpixel_refine: bool = False

    def __post_init__(self):
        if not (math.isfinite(self.lam) and math.isfinite(self.eps)):
            raise DPError("lam and eps must be finite")
        if self.lam < 0 or self.eps < 0:
            raise DPError("lam and eps must be >= 0")
        if not self.eps < self.lam:
            raise DPError("eps must be < lam (an endless occlusion run must cost)")


@dataclass
class LineSolution:
    """One state per x2: occluded bit, d2, homogeneity bit, trusted-data bit.

    tags records the internal run direction (VIS/UP/DOWN/FLAT0/FLAT1);
    refined_d holds decimal cyclopean disparities after subpixel refinement.
    """

    e: int
    occ: np.ndarray
    d2: np.ndarray
    h: np.ndarray
    data_mask: np.ndarray
    cost: float
    tags: np.ndarray
    refined_d: np.ndarray | None = None

    @property
    def nx(self):
        return self.d2.shape[0]


@dataclass
class CyclopeanSolution:
    geom: object
    lines: list

    def stack(self, attr):
        return np.stack([getattr(ln, attr) for ln in self.lines])

    def disparity_full(self):
        """Full-pixel disparity per cell (2x the refined value where present)."""
        out = np.stack([
            2.0 * ln.refined_d if ln.refined_d is not None else ln.d2.astype(np.float64)
            for ln in self.lines])
        return out


@njit(cache=True, nogil=True)
def _solve_strict(fm, valid, lam, eps):
    nx, nd = fm.shape
    ntag = 5
    cost = np.full((nx, ntag, nd), INF)
    bp = np.full((nx, ntag, nd), -1, dtype=np.int32)

    for d in range(nd):
        if valid[0, d]:
            cost[0, VIS, d] = fm[0, d]
        cost[0, UP, d] = lam
        cost[0, DOWN, d] = lam
        cost[0, FLAT0, d] = lam
        # FLAT1 needs a flat predecessor; unreachable at the first column

    # candidate predecessors per target tag, in tie-break order:
    # (prev_tag, d offset, pairwise cost)
    for x in range(1, nx):
        for d in range(nd):
            # VIS(d): from VIS any step; run exits must continue the run
            # direction (UP from d-1, DOWN from d+1, FLAT1 any step)
            if valid[x, d]:
                best = INF
                arg = -1
                for k in range(8):
                    if k == 0:
                        t, pd, pair = VIS, d, 0.0
                    elif k == 1:
                        t, pd, pair = VIS, d - 1, 0.0
                    elif k == 2:
                        t, pd, pair = VIS, d + 1, 0.0
                    elif k == 3:
                        t, pd, pair = FLAT1, d, 0.0
                    elif k == 4:
                        t, pd, pair = UP, d - 1, 0.0
                    elif k == 5:
                        t, pd, pair = FLAT1, d - 1, 0.0
                    elif k == 6:
                        t, pd, pair = DOWN, d + 1, 0.0
                    else:
                        t, pd, pair = FLAT1, d + 1, 0.0
                    if 0 <= pd < nd:
                        c = cost[x - 1, t, pd] + pair
                        if c < best:
                            best = c
                            arg = t * nd + pd
                if arg >= 0 and best < INF:
                    cost[x, VIS, d] = best + fm[x, d]
                    bp[x, VIS, d] = arg

            # UP(d): entered or continued with a +1 step
            if d - 1 >= 0:
                best = INF
                arg = -1
                c = cost[x - 1, VIS, d - 1]
                if c < best:
                    best = c
                    arg = VIS * nd + (d - 1)
                c = cost[x - 1, UP, d - 1] - eps
                if c < best:
                    best = c
                    arg = UP * nd + (d - 1)
                if arg >= 0 and best < INF:
                    cost[x, UP, d] = best + lam
                    bp[x, UP, d] = arg

            # DOWN(d): entered or continued with a -1 step
            if d + 1 < nd:
                best = INF
                arg = -1
                c = cost[x - 1, VIS, d + 1]
                if c < best:
                    best = c
                    arg = VIS * nd + (d + 1)
                c = cost[x - 1, DOWN, d + 1] - eps
                if c < best:
                    best = c
                    arg = DOWN * nd + (d + 1)
                if arg >= 0 and best < INF:
                    cost[x, DOWN, d] = best + lam
                    bp[x, DOWN, d] = arg

            # FLAT0(d): first cell of a flat run, entered from a visible cell
            best = INF
            arg = -1
            for k in range(3):
                pd = d if k == 0 else (d - 1 if k == 1 else d + 1)
                if 0 <= pd < nd:
                    c = cost[x - 1, VIS, pd]
                    if c < best:
                        best = c
                        arg = VIS * nd + pd
            if arg >= 0 and best < INF:
                cost[x, FLAT0, d] = best + lam
                bp[x, FLAT0, d] = arg

            # FLAT1(d): continuation of a flat run at constant d2
            best = INF
            arg = -1
            c = cost[x - 1, FLAT0, d] - eps
            if c < best:
                best = c
                arg = FLAT0 * nd + d
            c = cost[x - 1, FLAT1, d] - eps
            if c < best:
                best = c
                arg = FLAT1 * nd + d
            if arg >= 0 and best < INF:
                cost[x, FLAT1, d] = best + lam
                bp[x, FLAT1, d] = arg

    return cost, bp


@njit(cache=True, nogil=True)
def _solve_literal(fm, valid, lam, eps):
    nx, nd = fm.shape
    cost = np.full((nx, 2, nd), INF)
    bp = np.full((nx, 2, nd), -1, dtype=np.int32)
    OCC = 1

    for d in range(nd):
        if valid[0, d]:
            cost[0, VIS, d] = fm[0, d]
        cost[0, OCC, d] = lam

    for x in range(1, nx):
        for d in range(nd):
            for tgt in range(2):
                if tgt == VIS and not valid[x, d]:
                    continue
                best = INF
                arg = -1
                for k in range(6):
                    if k == 0:
                        t, pd = VIS, d
                    elif k == 1:
                        t, pd = VIS, d - 1
                    elif k == 2:
                        t, pd = VIS, d + 1
                    elif k == 3:
                        t, pd = OCC, d
                    elif k == 4:
                        t, pd = OCC, d - 1
                    else:
                        t, pd = OCC, d + 1
                    if 0 <= pd < nd:
                        pair = -eps if (tgt == OCC and t == OCC) else 0.0
                        c = cost[x - 1, t, pd] + pair
                        if c < best:
                            best = c
                            arg = t * nd + pd
                if arg >= 0 and best < INF:
                    unary = fm[x, d] if tgt == VIS else lam
                    cost[x, tgt, d] = best + unary
                    bp[x, tgt, d] = arg

    return cost, bp


def _backtrack(cost, bp, nd):
    nx, ntag, _ = cost.shape
    # terminal tie-break: occluded-ness, then d2, then tag order
    best = INF
    term = None
    for occ_group in (0, 1):
        for d in range(nd):
            for t in range(ntag):
                is_occ = 0 if t == VIS else 1
                if is_occ != occ_group:
                    continue
                c = cost[nx - 1, t, d]
                if c < best:
                    best = c
                    term = (t, d)
    if term is None:
        raise DPError("no feasible path (all states unreachable)")
    tags = np.empty(nx, dtype=np.int8)
    d2 = np.empty(nx, dtype=np.int32)
    t, d = term
    for x in range(nx - 1, -1, -1):
        tags[x] = t
        d2[x] = d
        code = bp[x, t, d]
        if x > 0:
            t, d = code // nd, code % nd
    return tags, d2, float(best)


def solve_line(sl, params):
    """Minimum-cost path for one slice. Returns a LineSolution whose h flags
    are not yet set (see detect_homogeneous)."""
    fm = np.ascontiguousarray(sl.fm, dtype=np.float64)
    valid = np.ascontiguousarray(sl.valid, dtype=np.uint8)
    nx, nd = fm.shape
    if nd == 0 or nx == 0:
        raise DPError(f"line {sl.e}: empty slice")
    if not valid.any():
        raise DPError(f"line {sl.e}: no valid cell")
    if params.strict_gc1_runs:
        cost, bp = _solve_strict(fm, valid, params.lam, params.eps)
    else:
        cost, bp = _solve_literal(fm, valid, params.lam, params.eps)
    tags, d2, total = _backtrack(cost, bp, nd)
    occ = (tags != VIS).astype(np.uint8)
    h = np.zeros(nx, dtype=np.uint8)
    return LineSolution(e=sl.e, occ=occ, d2=d2, h=h,
                        data_mask=occ == 0, cost=total, tags=tags)


def path_cost(sl, occ, d2, params):
    """Re-evaluate the objective over a given path (audit helper)."""
    terms = []
    for x in range(len(d2)):
        terms.append(params.lam if occ[x] else float(sl.fm[x, d2[x]]))
        if x > 0 and occ[x] and occ[x - 1]:
            terms.append(-params.eps)
    return math.fsum(terms)


def detect_homogeneous(sol):
    """Flag both endpoints of every adjacent occluded pair whose d2 did not
    change; recompute the trusted-data mask."""
    h = np.zeros_like(sol.h)
    occ = sol.occ.astype(bool)
    pair = occ[1:] & occ[:-1] & (sol.d2[1:] == sol.d2[:-1])
    h[1:][pair] = 1
    h[:-1][pair] = 1
    data_mask = (~occ) & (h == 0)
    return replace(sol, h=h, data_mask=data_mask)


@dataclass
class GC1Violation:
    start: int
    end: int
    jump: int
    steps: int


@dataclass
class GCReport:
    gc2_ok: bool
    gc1_violations: list
    eq5_violations: list

    @property
    def ok(self):
        return self.gc2_ok and not self.gc1_violations and not self.eq5_violations


def check_gc(sol):
    """Verify the geometric constraints on a line solution.

    gc2 holds structurally (one state per x2); every maximal occlusion run
    containing no h flag must have an endpoint disparity jump equal to its
    width in x2 steps. Runs touching the line boundary have no flanking
    visible cell and are skipped. The local form is checked per adjacent
    occluded pair: |delta d2| = 1 unless the pair is flagged homogeneous.
    """
    nx = sol.nx
    gc2_ok = (sol.d2.shape == sol.occ.shape == sol.h.shape == (nx,)
              and bool(np.all(np.abs(np.diff(sol.d2)) <= 1)))
    occ = sol.occ.astype(bool)
    gc1 = []
    x = 0
    while x < nx:
        if not occ[x]:
            x += 1
            continue
        start = x
        while x < nx and occ[x]:
            x += 1
        end = x - 1
        if start == 0 or end == nx - 1:
            continue
        if sol.h[start:end + 1].any():
            continue
        jump = abs(int(sol.d2[end + 1]) - int(sol.d2[start - 1]))
        steps = (end + 1) - (start - 1)
        if jump != steps:
            gc1.append(GC1Violation(start=start, end=end, jump=jump, steps=steps))
    eq5 = []
    for i in range(1, nx):
        if occ[i] and occ[i - 1]:
            delta = int(sol.d2[i]) - int(sol.d2[i - 1])
            if abs(delta) == 1:
                continue
            if delta == 0 and sol.h[i] and sol.h[i - 1]:
                continue
            eq5.append(i)
    return GCReport(gc2_ok=gc2_ok, gc1_violations=gc1, eq5_violations=eq5)


def subpixel_refine(sl, sol):
    """Parabola fit through the three fm values around each trusted cell.

    refined_d = d2/2 + (1/2) * (fm[d2-1] - fm[d2+1]) /
                (2 * (fm[d2-1] - 2*fm[d2] + fm[d2+1]))
    clamped to d2/2 +- 1/2; boundary levels, invalid neighbors and
    zero-curvature triples keep the grid value.
    """
    nd = sl.nd
    refined = sol.d2.astype(np.float64) / 2.0
    for x in np.flatnonzero(sol.data_mask):
        d = int(sol.d2[x])
        if d - 1 < 0 or d + 1 >= nd:
            continue
        if not (sl.valid[x, d - 1] and sl.valid[x, d + 1]):
            continue
        a, b, c = sl.fm[x, d - 1], sl.fm[x, d], sl.fm[x, d + 1]
        denom = 2.0 * (a - 2.0 * b + c)
        if abs(denom) < 1e-12:
            continue
        offset = (a - c) / denom
        val = d / 2.0 + 0.5 * offset
        refined[x] = min(max(val, d / 2.0 - 0.5), d / 2.0 + 0.5)
    return replace(sol, refined_d=refined)


def solve_all(slices, params, parallelism=1, geom=None):
    """Solve every line independently; the result does not depend on the
    degree of parallelism."""

    def run(sl):
        try:
            sol = detect_homogeneous(solve_line(sl, params))
            if params.subpixel_refine:
                sol = subpixel_refine(sl, sol)
            return sol
        except Exception as exc:
            raise DPError(f"line {sl.e}: {exc}") from exc

    if parallelism <= 1:
        lines = [run(sl) for sl in slices]
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            lines = list(pool.map(run, slices))
    return CyclopeanSolution(geom=geom, lines=lines)
