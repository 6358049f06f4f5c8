"""Built-in solvers for lowered problems.

`solve_lp` is a dense two-phase simplex with Bland's pivoting rule:
deterministic, anti-cycling, and perfectly adequate at the sizes this
package produces (tens of variables).  `solve_scalar` minimizes a 1-D
convex piecewise-quadratic by closed-form vertex per piece, with a
golden-section search available as fallback.  Infeasible is a legitimate
answer, not an error.

Tolerances are fixed and recorded in Solution metadata:
feasibility 1e-7, optimality 1e-6.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .ir import LpProblem, OptInstance, ScalarProblem, VarRef, lower_to_lp, validate

FEAS_TOL = 1e-7
OPT_TOL = 1e-6
PIVOT_TOL = 1e-11

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


class NumericalBreakdown(Exception):
    """Pivot magnitudes below 1e-11 persisted after re-scaling."""


@dataclass(frozen=True)
class Solution:
    """Solver verdict: status plus, when optimal, assignment and objective."""

    status: str
    assignment: Optional[Dict[VarRef, float]] = None
    objective: Optional[float] = None
    metadata: Tuple[Tuple[str, str], ...] = (
        ("feasibility_tolerance", "1e-7"),
        ("optimality_tolerance", "1e-6"),
    )

    def meta(self) -> Dict[str, str]:
        return dict(self.metadata)

    def value(self, name: str, index: Optional[int] = None) -> float:
        assert self.assignment is not None
        return self.assignment[VarRef(name, index)]

    def vector(self, name: str, length: int) -> List[float]:
        assert self.assignment is not None
        return [self.assignment[VarRef(name, i)] for i in range(length)]


def solution_to_dict(sol: Solution) -> dict:
    assignment = None
    if sol.assignment is not None:
        assignment = [
            {"var": r.name, "index": r.index, "value": v}
            for r, v in sorted(sol.assignment.items())
        ]
    return {
        "status": sol.status,
        "assignment": assignment,
        "objective": sol.objective,
        "metadata": {k: v for k, v in sol.metadata},
    }


def solution_from_dict(d: dict) -> Solution:
    assignment = None
    if d.get("assignment") is not None:
        assignment = {VarRef(t["var"], t.get("index")): t["value"] for t in d["assignment"]}
    return Solution(
        status=d["status"],
        assignment=assignment,
        objective=d.get("objective"),
        metadata=tuple(sorted(d.get("metadata", {}).items())),
    )


def solution_to_json(sol: Solution) -> str:
    return json.dumps(solution_to_dict(sol), indent=2)


# ---------------------------------------------------------------------------
# Two-phase simplex

def solve_lp(p: LpProblem, allow_rescale: bool = True) -> Solution:
    """Solve an LpProblem; deterministic for identical input bytes."""
    try:
        return _solve_lp_once(p)
    except NumericalBreakdown:
        if not allow_rescale:
            raise
        return _solve_lp_once(_rescale(p))


def _rescale(p: LpProblem) -> LpProblem:
    # Row equilibration only: divides each row (and rhs) by its max |entry|,
    # which preserves the feasible set and the optimum exactly.
    rows = []
    b = []
    for row, rhs in zip(p.rows, p.b):
        scale = max((abs(x) for x in row), default=0.0)
        if scale <= 0.0:
            rows.append(row)
            b.append(rhs)
        else:
            rows.append(tuple(x / scale for x in row))
            b.append(rhs / scale)
    return LpProblem(
        columns=p.columns,
        c=p.c,
        rows=tuple(rows),
        relations=p.relations,
        b=tuple(b),
        lower=p.lower,
        upper=p.upper,
        offset=p.offset,
        row_labels=p.row_labels,
    )


def _solve_lp_once(p: LpProblem) -> Solution:
    n = p.n_vars()

    # Shift/split variables onto y >= 0 standard form.
    std_cols: List[Tuple[int, float]] = []  # (original var, sign)
    shifts = [0.0] * n
    col_of: List[List[Tuple[int, float]]] = [[] for _ in range(n)]
    extra_rows: List[Tuple[int, float]] = []  # (std col, upper bound after shift)
    for j in range(n):
        lo, hi = p.lower[j], p.upper[j]
        if lo is not None:
            shifts[j] = lo
            col_of[j].append((len(std_cols), 1.0))
            std_cols.append((j, 1.0))
            if hi is not None:
                extra_rows.append((len(std_cols) - 1, hi - lo))
        elif hi is not None:
            # upper bound only: x = hi - y with y >= 0
            shifts[j] = hi
            col_of[j].append((len(std_cols), -1.0))
            std_cols.append((j, -1.0))
        else:
            # free: x = y+ - y-
            col_of[j].append((len(std_cols), 1.0))
            std_cols.append((j, 1.0))
            col_of[j].append((len(std_cols), -1.0))
            std_cols.append((j, -1.0))

    n_std = len(std_cols)

    def to_std_row(row: Tuple[float, ...]) -> Tuple[List[float], float]:
        out = [0.0] * n_std
        moved = 0.0
        for j, coef in enumerate(row):
            if coef == 0.0:
                continue
            moved += coef * shifts[j]
            for col, sign in col_of[j]:
                out[col] += coef * sign
        return out, moved

    A: List[List[float]] = []
    rel: List[str] = []
    rhs: List[float] = []
    for row, r, bb in zip(p.rows, p.relations, p.b):
        srow, moved = to_std_row(row)
        A.append(srow)
        rel.append(r)
        rhs.append(bb - moved)
    for col, ub in extra_rows:
        srow = [0.0] * n_std
        srow[col] = 1.0
        A.append(srow)
        rel.append("<=")
        rhs.append(ub)

    c_std = [0.0] * n_std
    for j, coef in enumerate(p.c):
        for col, sign in col_of[j]:
            c_std[col] += coef * sign

    status, y = _two_phase(
        np.array(A, dtype=float).reshape(len(A), n_std),
        rel,
        np.array(rhs, dtype=float),
        np.array(c_std, dtype=float),
    )
    if status != OPTIMAL:
        return Solution(status=status)

    x = [0.0] * n
    for col, (j, sign) in enumerate(std_cols):
        x[j] += sign * y[col]
    for j in range(n):
        x[j] += shifts[j]
    # Snap values that drifted just past a bound back onto it.
    for j in range(n):
        lo, hi = p.lower[j], p.upper[j]
        if lo is not None and lo - FEAS_TOL <= x[j] < lo:
            x[j] = lo
        if hi is not None and hi < x[j] <= hi + FEAS_TOL:
            x[j] = hi
    objective = float(np.dot(p.c, x)) + p.offset
    assignment = {_ref_from_label(lbl): float(x[j]) for j, lbl in enumerate(p.columns)}
    return Solution(status=OPTIMAL, assignment=assignment, objective=objective)


def _ref_from_label(label: str) -> VarRef:
    if label.endswith("]") and "[" in label:
        name, _, idx = label[:-1].partition("[")
        return VarRef(name, int(idx))
    return VarRef(label)


def _two_phase(A: np.ndarray, rel: List[str], b: np.ndarray, c: np.ndarray):
    """min c.y s.t. A y REL b, y >= 0.  Returns (status, y or None)."""
    m = len(rel)
    n = len(c)
    if m == 0:
        if (c < -1e-12).any():
            return UNBOUNDED, None
        return OPTIMAL, np.zeros(n)

    A = A.copy()
    b = b.copy()
    rel = list(rel)
    # Normalize to b >= 0 (flip row signs and relations).
    for i in range(m):
        if b[i] < 0:
            A[i] = -A[i]
            b[i] = -b[i]
            rel[i] = {"<=": ">=", ">=": "<=", "==": "=="}[rel[i]]

    # Column layout: [y (n)] [slack/surplus per <=,>= row] [artificial per >=,== row]
    blocks = [A]
    slack_of_row: Dict[int, int] = {}
    for i in range(m):
        if rel[i] in ("<=", ">="):
            col = np.zeros((m, 1))
            col[i, 0] = 1.0 if rel[i] == "<=" else -1.0
            slack_of_row[i] = n + len(slack_of_row)
            blocks.append(col)
    n_slack = len(slack_of_row)
    art_count = 0
    for i in range(m):
        if rel[i] == "<=":
            continue
        col = np.zeros((m, 1))
        col[i, 0] = 1.0
        blocks.append(col)
        art_count += 1
    T = np.hstack(blocks)
    total = T.shape[1]

    basis = [-1] * m
    ai = 0
    for i in range(m):
        if rel[i] == "<=":
            basis[i] = slack_of_row[i]
        else:
            basis[i] = n + n_slack + ai
            ai += 1

    tableau = np.hstack([T, b.reshape(-1, 1)])

    if art_count > 0:
        cost1 = np.zeros(total)
        cost1[n + n_slack :] = 1.0
        obj = _reduced_objective(tableau, cost1, basis)
        stat = _simplex_iterate(tableau, obj, basis)
        if stat == UNBOUNDED:  # phase-1 objective is bounded below by 0
            raise NumericalBreakdown("phase-1 reported unbounded")
        if -obj[-1] > 1e-8:
            return INFEASIBLE, None
        # Drive remaining artificials out of the basis where possible.
        for i in range(m):
            if basis[i] >= n + n_slack:
                cand = np.nonzero(np.abs(tableau[i, : n + n_slack]) > 1e-9)[0]
                if cand.size:
                    _pivot(tableau, obj, basis, i, int(cand[0]))
        keep = [i for i in range(m) if basis[i] < n + n_slack]
        tableau = tableau[keep]
        basis = [basis[i] for i in keep]
        m = len(keep)
        tableau = np.hstack([tableau[:, : n + n_slack], tableau[:, -1:]])
        total = n + n_slack

    cost2 = np.zeros(total)
    cost2[:n] = c
    obj = _reduced_objective(tableau, cost2, basis)
    stat = _simplex_iterate(tableau, obj, basis)
    if stat == UNBOUNDED:
        return UNBOUNDED, None
    y = np.zeros(total)
    for i, bv in enumerate(basis):
        y[bv] = tableau[i, -1]
    return OPTIMAL, y[:n]


def _reduced_objective(tableau: np.ndarray, cost: np.ndarray, basis: List[int]) -> np.ndarray:
    obj = np.append(cost.copy(), 0.0)
    for i, bv in enumerate(basis):
        if obj[bv] != 0.0:
            obj = obj - obj[bv] * tableau[i]
    return obj


def _simplex_iterate(tableau: np.ndarray, obj: np.ndarray, basis: List[int]) -> str:
    """Bland's rule: lowest-index entering column; min-ratio leaving row with
    lowest basic-variable index on ties."""
    m = tableau.shape[0]
    while True:
        entering = -1
        for j in range(len(obj) - 1):
            if obj[j] < -1e-9:
                entering = j
                break
        if entering < 0:
            return OPTIMAL
        leaving = -1
        best = math.inf
        for i in range(m):
            a = tableau[i, entering]
            if a > PIVOT_TOL:
                ratio = tableau[i, -1] / a
                if ratio < best - 1e-12 or (
                    abs(ratio - best) <= 1e-12 and leaving >= 0 and basis[i] < basis[leaving]
                ):
                    best = ratio
                    leaving = i
        if leaving < 0:
            col = tableau[:m, entering]
            col_max = float(col.max()) if m else 0.0
            if 0.0 < col_max <= PIVOT_TOL:
                raise NumericalBreakdown(
                    f"pivot candidates in column {entering} all below {PIVOT_TOL}"
                )
            return UNBOUNDED
        _pivot(tableau, obj, basis, leaving, entering)


def _pivot(tableau: np.ndarray, obj: np.ndarray, basis: List[int], row: int, col: int) -> None:
    piv = tableau[row, col]
    if abs(piv) < PIVOT_TOL:
        raise NumericalBreakdown(f"pivot magnitude {abs(piv):.3e} below {PIVOT_TOL}")
    tableau[row] /= piv
    for i in range(tableau.shape[0]):
        if i != row and tableau[i, col] != 0.0:
            tableau[i] -= tableau[i, col] * tableau[row]
    if obj[col] != 0.0:
        obj -= obj[col] * tableau[row]
    basis[row] = col


def verify_lp_solution(p: LpProblem, sol: Solution, tol: float = FEAS_TOL) -> List[str]:
    """Independent feasibility re-check of an Optimal solution; returns violations."""
    if sol.status != OPTIMAL:
        return []
    assert sol.assignment is not None
    x = [sol.assignment[_ref_from_label(lbl)] for lbl in p.columns]
    out: List[str] = []
    for j, (lo, hi) in enumerate(zip(p.lower, p.upper)):
        if lo is not None and x[j] < lo - tol:
            out.append(f"{p.columns[j]} below lower bound")
        if hi is not None and x[j] > hi + tol:
            out.append(f"{p.columns[j]} above upper bound")
    labels = p.row_labels or tuple("" for _ in p.rows)
    for k, (row, r, bb) in enumerate(zip(p.rows, p.relations, p.b)):
        v = float(np.dot(row, x))
        t = tol * max(1.0, max((abs(e) for e in row), default=1.0), abs(bb))
        name = labels[k] if k < len(labels) and labels[k] else f"row {k}"
        if r == "<=" and v > bb + t:
            out.append(f"{name} violates <= ({v} > {bb})")
        if r == ">=" and v < bb - t:
            out.append(f"{name} violates >= ({v} < {bb})")
        if r == "==" and abs(v - bb) > t:
            out.append(f"{name} violates == ({v} != {bb})")
    return out


# ---------------------------------------------------------------------------
# 1-D piecewise-quadratic minimization

def solve_scalar(p: ScalarProblem) -> Solution:
    """Global minimizer of a convex piecewise-quadratic to within 1e-6.

    Closed-form vertex per quadratic piece; endpoints for linear pieces.
    An empty piece list encodes an empty domain (infeasible).
    """
    if not p.pieces:
        return Solution(status=INFEASIBLE)
    last = p.pieces[-1]
    if last.hi is None and last.a <= 0.0 and last.b < 0.0:
        return Solution(status=UNBOUNDED)
    first = p.pieces[0]
    if not math.isfinite(first.lo) and first.a <= 0.0 and first.b > 0.0:
        return Solution(status=UNBOUNDED)
    best_x: Optional[float] = None
    best_v = math.inf
    for piece in p.pieces:
        candidates: List[float] = []
        if math.isfinite(piece.lo):
            candidates.append(piece.lo)
        if piece.hi is not None:
            candidates.append(piece.hi)
        if piece.a > 0.0:
            vertex = -piece.b / (2.0 * piece.a)
            lo = piece.lo if math.isfinite(piece.lo) else -math.inf
            hi = piece.hi if piece.hi is not None else math.inf
            candidates.append(min(max(vertex, lo), hi))
        for x in candidates:
            if not math.isfinite(x):
                continue
            v = piece.value(x)
            if v < best_v or (v == best_v and (best_x is None or x < best_x)):
                best_v = v
                best_x = x
    assert best_x is not None
    return Solution(
        status=OPTIMAL,
        assignment={p.var: float(best_x)},
        objective=float(best_v + p.offset),
    )


def golden_section(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-9) -> float:
    """Minimizer of a unimodal f on [lo, hi]."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def scalar_value(p: ScalarProblem, x: float) -> float:
    """Evaluate the assembled piecewise function at x."""
    for piece in p.pieces:
        hi = piece.hi if piece.hi is not None else math.inf
        if piece.lo - 1e-12 <= x <= hi + 1e-12:
            return piece.value(x) + p.offset
    raise ValueError(f"{x} outside the problem domain")


def solve_scalar_golden(p: ScalarProblem) -> Solution:
    """Golden-section fallback route; also the independent cross-check."""
    if not p.pieces:
        return Solution(status=INFEASIBLE)
    last = p.pieces[-1]
    first = p.pieces[0]
    if p.hi is not None:
        hi = p.hi
    elif last.a > 0.0:
        base = last.lo if math.isfinite(last.lo) else 0.0
        hi = max(base, -last.b / (2.0 * last.a)) + 1.0
    elif last.b < 0.0:
        return Solution(status=UNBOUNDED)
    else:
        hi = (last.lo if math.isfinite(last.lo) else 0.0) + 1.0
    if math.isfinite(p.lo):
        lo = p.lo
    elif first.a > 0.0:
        lo = min(hi, -first.b / (2.0 * first.a)) - 1.0
    elif first.b > 0.0:
        return Solution(status=UNBOUNDED)
    else:
        hi_anchor = first.hi if first.hi is not None else hi
        lo = min(hi, hi_anchor) - 1.0
    x = golden_section(lambda t: scalar_value(p, t), lo, hi)
    return Solution(status=OPTIMAL, assignment={p.var: x}, objective=scalar_value(p, x))


# ---------------------------------------------------------------------------
# Front door: validate, lower, solve, map back to instance variables.

def solve_instance(instance: OptInstance) -> Solution:
    """Validate + lower + solve an OptInstance; assignment uses the
    instance's own variable names (epigraph auxiliaries stripped)."""
    issues = validate(instance)
    if issues:
        raise ValueError("invalid instance: " + "; ".join(str(i) for i in issues))
    lowered = lower_to_lp(instance)
    if isinstance(lowered, ScalarProblem):
        return solve_scalar(lowered)
    sol = solve_lp(lowered)
    if sol.status != OPTIMAL:
        return sol
    assert sol.assignment is not None
    own = {r for d in instance.variables for r in d.refs()}
    assignment = {r: v for r, v in sol.assignment.items() if r in own}
    return Solution(status=OPTIMAL, assignment=assignment, objective=sol.objective)
