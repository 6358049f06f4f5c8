"""Independent brute-force LP optimum via basic-feasible-solution enumeration.

This is the slow, obviously-correct route used to cross-check the simplex:
every choice of n active constraints (equality rows always active) is
solved as a linear system, filtered for feasibility, and the best vertex
wins.  Only usable for small problems; the callers keep n small on purpose.
"""

from __future__ import annotations

import itertools
import math
from typing import List, Optional, Tuple

import numpy as np

from .ir import LpProblem
from .solver import INFEASIBLE, OPTIMAL


def enumerate_vertices(p: LpProblem, tol: float = 1e-7) -> Tuple[str, Optional[np.ndarray], Optional[float]]:
    """Exhaustive vertex enumeration.  Returns (status, x, objective).

    Assumes a bounded feasible region (finite boxes or enough constraints);
    when no feasible vertex exists the region is empty for such problems.
    """
    n = p.n_vars()
    # Build the full list of hyperplanes: rows plus finite bounds.
    normals: List[np.ndarray] = []
    offsets: List[float] = []
    kinds: List[str] = []  # "<=", ">=", "=="
    for row, rel, b in zip(p.rows, p.relations, p.b):
        normals.append(np.array(row, dtype=float))
        offsets.append(float(b))
        kinds.append(rel)
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        if p.lower[j] is not None:
            normals.append(e.copy())
            offsets.append(float(p.lower[j]))
            kinds.append(">=")
        if p.upper[j] is not None:
            normals.append(e.copy())
            offsets.append(float(p.upper[j]))
            kinds.append("<=")

    eq_idx = [i for i, k in enumerate(kinds) if k == "=="]
    ineq_idx = [i for i, k in enumerate(kinds) if k != "=="]
    need = n - len(eq_idx)
    if need < 0:
        need = 0

    c = np.array(p.c, dtype=float)
    best_x: Optional[np.ndarray] = None
    best_v = math.inf
    found = False
    for combo in itertools.combinations(ineq_idx, need):
        active = eq_idx + list(combo)
        if len(active) != n:
            continue
        A = np.array([normals[i] for i in active])
        b = np.array([offsets[i] for i in active])
        try:
            x = np.linalg.solve(A, b)
        except np.linalg.LinAlgError:
            continue
        if not np.isfinite(x).all():
            continue
        if not _feasible(x, normals, offsets, kinds, tol):
            continue
        found = True
        v = float(c @ x)
        if v < best_v - 1e-12:
            best_v = v
            best_x = x
    if not found:
        return INFEASIBLE, None, None
    assert best_x is not None
    return OPTIMAL, best_x, best_v + p.offset


def _feasible(x: np.ndarray, normals, offsets, kinds, tol: float) -> bool:
    for a, b, k in zip(normals, offsets, kinds):
        v = float(a @ x)
        scale = max(1.0, float(np.abs(a).max()), abs(b))
        if k == "<=" and v > b + tol * scale:
            return False
        if k == ">=" and v < b - tol * scale:
            return False
        if k == "==" and abs(v - b) > tol * scale:
            return False
    return True


def pwl_box_minimum(instance) -> float:
    """Exact minimum of a convex piecewise-linear objective over a box
    (1 or 2 variables, no additional constraints).

    The minimum sits at a vertex of the linearity arrangement: a box corner,
    a breakpoint-line/box-edge crossing, or a crossing of two breakpoint
    lines.  All candidates are enumerated and evaluated directly.
    """
    refs = instance.all_refs()
    n = len(refs)
    if n not in (1, 2):
        raise ValueError("arrangement enumeration covers 1 or 2 variables")
    lows = []
    highs = []
    for d in instance.variables:
        for lo, hi in zip(d.lower, d.upper):
            if lo is None or hi is None:
                raise ValueError("finite boxes required")
            lows.append(lo)
            highs.append(hi)

    value = lambda x: instance.objective_value(dict(zip(refs, x)))

    # Breakpoint lines: inner == 0 for every abs/hinge term.
    lines: List[Tuple[List[float], float]] = []  # (normal a, offset b): a.x == b
    for term in instance.objective:
        if term.kind not in ("abs", "hinge0"):
            continue
        a = [0.0] * n
        for coef, ref in term.inner.terms:
            a[refs.index(ref)] += coef
        if any(c != 0.0 for c in a):
            lines.append((a, -term.inner.constant))

    if n == 1:
        xs = {lows[0], highs[0]}
        for (a,), b in lines:
            if a != 0.0:
                x = b / a
                if lows[0] <= x <= highs[0]:
                    xs.add(x)
        return min(value([x]) for x in xs)

    # Box edges as lines too.
    lines.append(([1.0, 0.0], lows[0]))
    lines.append(([1.0, 0.0], highs[0]))
    lines.append(([0.0, 1.0], lows[1]))
    lines.append(([0.0, 1.0], highs[1]))
    candidates: List[Tuple[float, float]] = [
        (lows[0], lows[1]), (lows[0], highs[1]), (highs[0], lows[1]), (highs[0], highs[1]),
    ]
    for i in range(len(lines)):
        for j in range(i + 1, len(lines)):
            (a1, b1), (a2, b2) = lines[i], lines[j]
            det = a1[0] * a2[1] - a1[1] * a2[0]
            if abs(det) < 1e-12:
                continue
            x = (b1 * a2[1] - b2 * a1[1]) / det
            y = (a1[0] * b2 - a2[0] * b1) / det
            if lows[0] - 1e-12 <= x <= highs[0] + 1e-12 and lows[1] - 1e-12 <= y <= highs[1] + 1e-12:
                candidates.append((min(max(x, lows[0]), highs[0]), min(max(y, lows[1]), highs[1])))
    return min(value([x, y]) for x, y in candidates)


def grid_minimize(f, boxes: List[Tuple[float, float]], rounds: int = 6, per_axis: int = 41) -> Tuple[List[float], float]:
    """Refining grid search for convex objectives over a box (1-D or 2-D).

    Each round evaluates a per_axis^d grid, then shrinks the box around the
    best cell so the optimum stays bracketed (convexity makes local=global).
    """
    lo = [b[0] for b in boxes]
    hi = [b[1] for b in boxes]
    d = len(boxes)
    best_x: List[float] = []
    best_v = math.inf
    for _ in range(rounds):
        axes = [np.linspace(lo[k], hi[k], per_axis) for k in range(d)]
        if d == 1:
            values = [f([x]) for x in axes[0]]
            i = int(np.argmin(values))
            best_x, best_v = [float(axes[0][i])], float(values[i])
            j0, j1 = max(i - 1, 0), min(i + 1, per_axis - 1)
            lo = [float(axes[0][j0])]
            hi = [float(axes[0][j1])]
        else:
            grid = [(x, y) for x in axes[0] for y in axes[1]]
            values = [f([x, y]) for x, y in grid]
            i = int(np.argmin(values))
            best_x, best_v = [float(grid[i][0]), float(grid[i][1])], float(values[i])
            ix, iy = divmod(i, per_axis)
            lo = [float(axes[0][max(ix - 1, 0)]), float(axes[1][max(iy - 1, 0)])]
            hi = [float(axes[0][min(ix + 1, per_axis - 1)]), float(axes[1][min(iy + 1, per_axis - 1)])]
    return best_x, best_v
