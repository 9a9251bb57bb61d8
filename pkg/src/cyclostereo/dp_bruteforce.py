"""Exhaustive search oracle for the line solver.

Independent of the dynamic program: enumerates legal state sequences by
depth-first search over the raw transition rules, with admissible
branch-and-bound skipping of provably worse subtrees. Costs accumulate in
the same order as the solver ((running + pairwise) + unary) so optimal
costs agree bit for bit, and ties are resolved by the same preference
order, so optimal paths agree too.

Only for small instances; the size guard refuses anything beyond
nx <= 16, nd <= 5.
"""

from __future__ import annotations

import numpy as np

from .dp import DOWN, FLAT0, FLAT1, UP, VIS, DPError, LineSolution

_MAX_NX = 16
_MAX_ND = 5


def _is_occ(tag):
    return 0 if tag == VIS else 1


def _successors(tag, d, nd, valid_col, fm_col, lam, eps, strict):
    """Legal next states from (tag, d) with (pair, unary) costs."""
    out = []
    if strict:
        for nd2 in (d - 1, d, d + 1):
            if not (0 <= nd2 < nd):
                continue
            step = nd2 - d
            # visible target: plain moves, or a run exit continuing the
            # run's direction; flat runs may exit only after two cells
            if valid_col[nd2] and (
                    tag == VIS
                    or (tag == UP and step == 1)
                    or (tag == DOWN and step == -1)
                    or tag == FLAT1):
                out.append((VIS, nd2, 0.0, fm_col[nd2]))
            if nd2 == d + 1 and tag in (VIS, UP):
                out.append((UP, nd2, -eps if tag == UP else 0.0, lam))
            if nd2 == d - 1 and tag in (VIS, DOWN):
                out.append((DOWN, nd2, -eps if tag == DOWN else 0.0, lam))
            if tag == VIS:
                out.append((FLAT0, nd2, 0.0, lam))
            if nd2 == d and tag in (FLAT0, FLAT1):
                out.append((FLAT1, nd2, -eps, lam))
    else:
        for nd2 in (d - 1, d, d + 1):
            if not (0 <= nd2 < nd):
                continue
            if valid_col[nd2]:
                out.append((VIS, nd2, 0.0, fm_col[nd2]))
            out.append((UP, nd2, -eps if tag != VIS else 0.0, lam))
    return out


def _initial_states(nd, valid_col, fm_col, lam, strict):
    out = []
    for d in range(nd):
        if valid_col[d]:
            out.append((VIS, d, fm_col[d]))
        if strict:
            out.append((UP, d, lam))
            out.append((DOWN, d, lam))
            out.append((FLAT0, d, lam))
        else:
            out.append((UP, d, lam))
    return out


def _path_key(tags, d2):
    """Comparison key mirroring the solver's backward tie-breaking: terminal
    state first, then predecessor preference at each step walking backward."""
    nx = len(tags)
    key = [(_is_occ(tags[-1]), d2[-1], tags[-1])]
    for x in range(nx - 1, 0, -1):
        key.append((_is_occ(tags[x - 1]), abs(d2[x] - d2[x - 1]),
                    d2[x - 1], tags[x - 1]))
    return key


def brute_force_line(sl, params):
    """Global minimum of the path objective by complete search."""
    nx, nd = sl.fm.shape
    if nx > _MAX_NX or nd > _MAX_ND:
        raise DPError(
            f"instance too large for exhaustive search: {nx}x{nd} "
            f"(bounds {_MAX_NX}x{_MAX_ND})")
    if not sl.valid.any():
        raise DPError(f"line {sl.e}: no valid cell")
    fm = [[float(v) for v in row] for row in sl.fm]
    valid = [[bool(v) for v in row] for row in sl.valid]
    lam, eps, strict = params.lam, params.eps, params.strict_gc1_runs

    # admissible per-column bound: any cell contributes at least the best
    # visible match or an occlusion net of its adjacency bonus
    occ_floor = lam - eps
    suffix = [0.0] * (nx + 1)
    for x in range(nx - 1, -1, -1):
        vals = [fm[x][d] for d in range(nd) if valid[x][d]]
        col = min(min(vals), occ_floor) if vals else occ_floor
        suffix[x] = suffix[x + 1] + col

    best = {"cost": np.inf, "tags": None, "d2": None, "key": None}

    def consider(cost, tags, d2):
        if cost > best["cost"]:
            return
        if cost < best["cost"]:
            best.update(cost=cost, tags=list(tags), d2=list(d2), key=None)
            return
        key = _path_key(tags, d2)
        if best["key"] is None:
            best["key"] = _path_key(best["tags"], best["d2"])
        if key < best["key"]:
            best.update(tags=list(tags), d2=list(d2), key=key)

    tags_buf = [0] * nx
    d2_buf = [0] * nx

    def dfs(x, tag, d, g):
        slack = 1e-9 * (1.0 + abs(best["cost"])) if np.isfinite(best["cost"]) else np.inf
        if g + suffix[x + 1] > best["cost"] + slack:
            return
        tags_buf[x] = tag
        d2_buf[x] = d
        if x == nx - 1:
            consider(g, tags_buf, d2_buf)
            return
        succ = _successors(tag, d, nd, valid[x + 1], fm[x + 1], lam, eps, strict)
        succ.sort(key=lambda s: s[2] + s[3])
        for ntag, nd2, pair, unary in succ:
            dfs(x + 1, ntag, nd2, (g + pair) + unary)

    starts = _initial_states(nd, valid[0], fm[0], lam, strict)
    starts.sort(key=lambda s: s[2])
    for tag, d, unary in starts:
        dfs(0, tag, d, unary)

    if best["tags"] is None:
        raise DPError("no feasible path")
    tags = np.array(best["tags"], dtype=np.int8)
    d2 = np.array(best["d2"], dtype=np.int32)
    occ = (tags != VIS).astype(np.uint8)
    return LineSolution(e=sl.e, occ=occ, d2=d2, h=np.zeros(nx, dtype=np.uint8),
                        data_mask=occ == 0, cost=float(best["cost"]), tags=tags)
