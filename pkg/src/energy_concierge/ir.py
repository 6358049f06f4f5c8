"""Optimization intermediate representation.

Everything downstream (the DSL compiler, the six problem builders, the
solver front door) speaks this IR: box-bounded variables, linear
expressions, a small family of convex objective terms (linear, |e|,
max(e, 0), single-variable e^2) and linear constraints, minimization
only.  Instances are plain immutable data; `validate` reports invariant
violations instead of raising, and `lower_to_lp` rewrites the convex
terms into either a pure LP (epigraph auxiliaries) or a one-dimensional
piecewise-quadratic problem.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

IDENT_RE = re.compile(r"^[a-z][a-z0-9_]*$")

CONVEX_KINDS = ("linear", "abs", "hinge0", "square")
RELATIONS = ("<=", "==", ">=")


@dataclass(frozen=True)
class VarRef:
    """A reference to a scalar variable or one element of a vector variable."""

    name: str
    index: Optional[int] = None

    def label(self) -> str:
        return self.name if self.index is None else f"{self.name}[{self.index}]"

    def sort_key(self) -> Tuple[str, int]:
        # total order even when a name is (invalidly) used both scalar and
        # indexed; validate() reports that case instead of crashing on it
        return (self.name, -1 if self.index is None else self.index)

    def __lt__(self, other: "VarRef") -> bool:
        return self.sort_key() < other.sort_key()


@dataclass(frozen=True)
class LinExpr:
    """sum(coef * var) + constant, normalized: refs sorted, duplicates merged."""

    terms: Tuple[Tuple[float, VarRef], ...]
    constant: float = 0.0

    @staticmethod
    def of(terms: Sequence[Tuple[float, VarRef]], constant: float = 0.0) -> "LinExpr":
        merged: Dict[VarRef, float] = {}
        for coef, ref in terms:
            merged[ref] = merged.get(ref, 0.0) + float(coef)
        cleaned = tuple(
            (c, r) for r, c in sorted(merged.items(), key=lambda kv: kv[0].sort_key()) if c != 0.0
        )
        return LinExpr(cleaned, float(constant))

    def __add__(self, other: "LinExpr") -> "LinExpr":
        return LinExpr.of(list(self.terms) + list(other.terms), self.constant + other.constant)

    def scaled(self, factor: float) -> "LinExpr":
        return LinExpr.of([(factor * c, r) for c, r in self.terms], factor * self.constant)

    def refs(self) -> List[VarRef]:
        return [r for _, r in self.terms]

    def var_names(self) -> List[str]:
        seen: List[str] = []
        for _, r in self.terms:
            if r.name not in seen:
                seen.append(r.name)
        return seen

    def evaluate(self, assignment: Dict[VarRef, float]) -> float:
        return self.constant + sum(c * assignment.get(r, 0.0) for c, r in self.terms)


@dataclass(frozen=True)
class ConvexTerm:
    """One objective summand: weight * f(inner) with f per `kind`.

    kind=linear  weight * inner          (weight may be any real)
    kind=abs     weight * |inner|        (weight >= 0)
    kind=hinge0  weight * max(inner, 0)  (weight >= 0)
    kind=square  weight * inner**2       (weight >= 0, inner single-variable)
    """

    kind: str
    inner: LinExpr
    weight: float = 1.0

    def evaluate(self, assignment: Dict[VarRef, float]) -> float:
        v = self.inner.evaluate(assignment)
        if self.kind == "linear":
            return self.weight * v
        if self.kind == "abs":
            return self.weight * abs(v)
        if self.kind == "hinge0":
            return self.weight * max(v, 0.0)
        if self.kind == "square":
            return self.weight * v * v
        raise ValueError(f"unknown term kind {self.kind!r}")


@dataclass(frozen=True)
class Constraint:
    """lhs REL rhs with REL in {<=, ==, >=}; lhs linear, rhs a finite number."""

    lhs: LinExpr
    relation: str
    rhs: float
    label: str = ""

    def satisfied(self, assignment: Dict[VarRef, float], tol: float = 1e-7) -> bool:
        v = self.lhs.evaluate(assignment)
        if self.relation == "<=":
            return v <= self.rhs + tol
        if self.relation == ">=":
            return v >= self.rhs - tol
        return abs(v - self.rhs) <= tol


@dataclass(frozen=True)
class VarDecl:
    """A declared variable: scalar (length=None) or vector of `length` entries.

    Bounds are per entry; None means unbounded on that side.  Bounds never
    enter solver tableaus as infinities; absent rows are used instead.
    """

    name: str
    length: Optional[int] = None
    lower: Tuple[Optional[float], ...] = (None,)
    upper: Tuple[Optional[float], ...] = (None,)

    @staticmethod
    def scalar(name: str, lower: Optional[float] = None, upper: Optional[float] = None) -> "VarDecl":
        return VarDecl(name, None, (lower,), (upper,))

    @staticmethod
    def vector(
        name: str,
        length: int,
        lower: Union[None, float, Sequence[Optional[float]]] = None,
        upper: Union[None, float, Sequence[Optional[float]]] = None,
    ) -> "VarDecl":
        def expand(b) -> Tuple[Optional[float], ...]:
            if b is None or isinstance(b, (int, float)):
                return tuple([None if b is None else float(b)] * length)
            return tuple(None if x is None else float(x) for x in b)

        return VarDecl(name, length, expand(lower), expand(upper))

    def size(self) -> int:
        return 1 if self.length is None else self.length

    def refs(self) -> List[VarRef]:
        if self.length is None:
            return [VarRef(self.name)]
        return [VarRef(self.name, i) for i in range(self.length)]


@dataclass(frozen=True)
class OptInstance:
    """A minimization instance: variables, convex objective terms, constraints."""

    variables: Tuple[VarDecl, ...]
    objective: Tuple[ConvexTerm, ...]
    constraints: Tuple[Constraint, ...] = ()
    metadata: Tuple[Tuple[str, str], ...] = ()

    @staticmethod
    def of(variables, objective, constraints=(), metadata=None) -> "OptInstance":
        meta = tuple(sorted((metadata or {}).items()))
        return OptInstance(tuple(variables), tuple(objective), tuple(constraints), meta)

    def meta(self) -> Dict[str, str]:
        return dict(self.metadata)

    def decl(self, name: str) -> Optional[VarDecl]:
        for d in self.variables:
            if d.name == name:
                return d
        return None

    def all_refs(self) -> List[VarRef]:
        out: List[VarRef] = []
        for d in self.variables:
            out.extend(d.refs())
        return out

    def objective_value(self, assignment: Dict[VarRef, float]) -> float:
        return sum(t.evaluate(assignment) for t in self.objective)


@dataclass(frozen=True)
class ValidationIssue:
    code: str
    message: str
    where: str = ""

    def __str__(self) -> str:
        loc = f" at {self.where}" if self.where else ""
        return f"{self.code}: {self.message}{loc}"


def validate(instance: OptInstance) -> List[ValidationIssue]:
    """Check every OptInstance invariant; returns issues, never raises.

    Codes: UnboundVar, IndexOutOfRange, NonConvexWeight, EmptyObjective,
    BadBounds, NoVariables, DuplicateVar, SquareTooWide, NonFinite.
    """
    issues: List[ValidationIssue] = []
    seen: Dict[str, VarDecl] = {}
    for d in instance.variables:
        if not IDENT_RE.match(d.name):
            issues.append(ValidationIssue("UnboundVar", f"illegal variable name {d.name!r}"))
        if d.name in seen:
            issues.append(ValidationIssue("DuplicateVar", f"variable {d.name!r} declared twice"))
        seen[d.name] = d
        if d.length is not None and d.length <= 0:
            issues.append(ValidationIssue("BadBounds", f"variable {d.name!r} has length {d.length}"))
        if len(d.lower) != d.size() or len(d.upper) != d.size():
            issues.append(ValidationIssue("BadBounds", f"bounds of {d.name!r} do not match its length"))
            continue
        for i, (lo, hi) in enumerate(zip(d.lower, d.upper)):
            for b in (lo, hi):
                if b is not None and not math.isfinite(b):
                    issues.append(
                        ValidationIssue("BadBounds", f"non-finite bound on {d.name!r}[{i}]; use None for unbounded")
                    )
            if lo is not None and hi is not None and lo > hi:
                issues.append(ValidationIssue("BadBounds", f"lower > upper on {d.name!r}[{i}] ({lo} > {hi})"))

    def check_ref(ref: VarRef, where: str) -> None:
        d = seen.get(ref.name)
        if d is None:
            issues.append(ValidationIssue("UnboundVar", f"undeclared variable {ref.name!r}", where))
            return
        if d.length is None:
            if ref.index is not None:
                issues.append(ValidationIssue("IndexOutOfRange", f"scalar {ref.name!r} used with index", where))
        else:
            if ref.index is None:
                issues.append(ValidationIssue("IndexOutOfRange", f"vector {ref.name!r} used without index", where))
            elif not (0 <= ref.index < d.length):
                issues.append(
                    ValidationIssue("IndexOutOfRange", f"{ref.name}[{ref.index}] outside length {d.length}", where)
                )

    def check_expr(e: LinExpr, where: str) -> None:
        for coef, ref in e.terms:
            if not math.isfinite(coef):
                issues.append(ValidationIssue("NonFinite", f"non-finite coefficient on {ref.label()}", where))
            check_ref(ref, where)
        if not math.isfinite(e.constant):
            issues.append(ValidationIssue("NonFinite", "non-finite constant", where))

    if not instance.variables:
        issues.append(ValidationIssue("NoVariables", "instance declares no variables"))
    if not instance.objective:
        issues.append(ValidationIssue("EmptyObjective", "objective has no terms"))

    for k, term in enumerate(instance.objective):
        where = f"objective[{k}]"
        if term.kind not in CONVEX_KINDS:
            issues.append(ValidationIssue("NonConvexWeight", f"unknown term kind {term.kind!r}", where))
            continue
        if not math.isfinite(term.weight):
            issues.append(ValidationIssue("NonFinite", "non-finite weight", where))
        if term.kind != "linear" and term.weight < 0:
            issues.append(
                ValidationIssue("NonConvexWeight", f"{term.kind} term with negative weight {term.weight}", where)
            )
        if term.kind == "square" and len(term.inner.var_names()) > 1:
            issues.append(
                ValidationIssue("SquareTooWide", "square term may reference at most one variable", where)
            )
        check_expr(term.inner, where)

    for k, con in enumerate(instance.constraints):
        where = con.label or f"constraint[{k}]"
        if con.relation not in RELATIONS:
            issues.append(ValidationIssue("BadBounds", f"unknown relation {con.relation!r}", where))
        if not math.isfinite(con.rhs):
            issues.append(ValidationIssue("NonFinite", "non-finite rhs", where))
        check_expr(con.lhs, where)

    return issues


class UnsupportedForm(Exception):
    """Square terms mixed with multi-variable structure; cannot be lowered."""


@dataclass(frozen=True)
class LpProblem:
    """minimize c.x + offset  s.t.  A x REL b, lower <= x <= upper.

    Columns are labelled; labels starting with '_aux' are epigraph
    auxiliaries introduced by lowering.  Bound entries of None mean
    unbounded on that side; no infinities are stored.
    """

    columns: Tuple[str, ...]
    c: Tuple[float, ...]
    rows: Tuple[Tuple[float, ...], ...]
    relations: Tuple[str, ...]
    b: Tuple[float, ...]
    lower: Tuple[Optional[float], ...]
    upper: Tuple[Optional[float], ...]
    offset: float = 0.0
    row_labels: Tuple[str, ...] = ()

    def n_vars(self) -> int:
        return len(self.columns)

    def n_rows(self) -> int:
        return len(self.rows)


@dataclass(frozen=True)
class QuadPiece:
    """a*x^2 + b*x + c on [lo, hi] (hi may be None for the last piece)."""

    lo: float
    hi: Optional[float]
    a: float
    b: float
    c: float

    def value(self, x: float) -> float:
        return self.a * x * x + self.b * x + self.c

    def slope(self, x: float) -> float:
        return 2.0 * self.a * x + self.b


@dataclass(frozen=True)
class ScalarProblem:
    """A 1-D convex piecewise-quadratic minimization over a closed domain.

    Pieces are contiguous, cover [lo, hi] and assemble to a convex function
    continuous at breakpoints (checked to 1e-9 at construction time by
    `check_pieces`).  lo > hi encodes an empty domain (infeasible).
    """

    var: VarRef
    pieces: Tuple[QuadPiece, ...]
    lo: float
    hi: Optional[float]
    offset: float = 0.0

    def value(self, x: float) -> float:
        for p in self.pieces:
            if (p.hi is None and x >= p.lo - 1e-12) or (p.hi is not None and p.lo - 1e-12 <= x <= p.hi + 1e-12):
                return p.value(x) + self.offset
        raise ValueError(f"{x} outside domain")


def check_pieces(pieces: Sequence[QuadPiece], tol: float = 1e-9) -> List[str]:
    """Continuity and convexity across a piece list; returns problem strings."""
    problems: List[str] = []
    for p in pieces:
        if p.a < -tol:
            problems.append(f"piece on [{p.lo}, {p.hi}] has negative curvature {p.a}")
    for left, right in zip(pieces, pieces[1:]):
        if left.hi is None or abs(left.hi - right.lo) > tol:
            problems.append(f"gap between pieces at {left.hi} / {right.lo}")
            continue
        x = left.hi
        scale = max(1.0, abs(left.value(x)))
        if abs(left.value(x) - right.value(x)) > tol * scale:
            problems.append(f"discontinuity at breakpoint {x}")
        if left.slope(x) > right.slope(x) + tol * max(1.0, abs(left.slope(x))):
            problems.append(f"slope decreases at breakpoint {x} (non-convex)")
    return problems


def _flatten(instance: OptInstance) -> Tuple[List[VarRef], Dict[VarRef, int]]:
    refs = instance.all_refs()
    return refs, {r: i for i, r in enumerate(refs)}


def lower_to_lp(instance: OptInstance) -> Union[LpProblem, ScalarProblem]:
    """Rewrite convex terms away.

    Without square terms: an equivalent LP.  Each |e| becomes a fresh t with
    t >= e, t >= -e; each max(e, 0) a fresh t with t >= e, t >= 0; t joins
    the objective with the term's weight.  With a square term: the whole
    instance must reference a single scalar variable, and the result is a
    ScalarProblem over that variable.  Optimal objective values match the
    original instance exactly.

    Raises UnsupportedForm when square terms mix with multi-variable
    structure.  Callers must have an empty `validate` report.
    """
    has_square = any(t.kind == "square" for t in instance.objective)
    if has_square:
        return _lower_to_scalar(instance)

    refs, col_of = _flatten(instance)
    columns = [r.label() for r in refs]
    c = [0.0] * len(refs)
    lower: List[Optional[float]] = []
    upper: List[Optional[float]] = []
    for d in instance.variables:
        lower.extend(d.lower)
        upper.extend(d.upper)

    rows: List[List[float]] = []
    relations: List[str] = []
    b: List[float] = []
    row_labels: List[str] = []
    offset = 0.0

    def dense(e: LinExpr, width: int) -> List[float]:
        row = [0.0] * width
        for coef, ref in e.terms:
            row[col_of[ref]] += coef
        return row

    aux_count = 0
    for term in instance.objective:
        if term.kind == "linear":
            for coef, ref in term.inner.terms:
                c[col_of[ref]] += term.weight * coef
            offset += term.weight * term.inner.constant
            continue
        # abs / hinge0: epigraph variable t
        aux_name = f"_aux_{term.kind}_{aux_count}"
        aux_count += 1
        columns.append(aux_name)
        col = len(columns) - 1
        c.append(term.weight)
        lower.append(0.0)  # t >= |e| >= 0 and t >= max(e,0) >= 0
        upper.append(None)
        for row in rows:
            row.append(0.0)
        # t >= e  <=>  e - t <= 0
        row = dense(term.inner, len(columns))
        row[col] = -1.0
        rows.append(row)
        relations.append("<=")
        b.append(-term.inner.constant)
        row_labels.append(f"{aux_name}:upper")
        if term.kind == "abs":
            # t >= -e  <=>  -e - t <= 0
            row = [-x for x in dense(term.inner, len(columns))]
            row[col] = -1.0
            rows.append(row)
            relations.append("<=")
            b.append(term.inner.constant)
            row_labels.append(f"{aux_name}:lower")

    for con in instance.constraints:
        row = dense(con.lhs, len(columns))
        rows.append(row)
        relations.append("==" if con.relation == "==" else con.relation)
        b.append(con.rhs - con.lhs.constant)
        row_labels.append(con.label)

    width = len(columns)
    rows = [row + [0.0] * (width - len(row)) for row in rows]
    return LpProblem(
        columns=tuple(columns),
        c=tuple(c),
        rows=tuple(tuple(r) for r in rows),
        relations=tuple(relations),
        b=tuple(b),
        lower=tuple(lower),
        upper=tuple(upper),
        offset=offset,
        row_labels=tuple(row_labels),
    )


def _lower_to_scalar(instance: OptInstance) -> ScalarProblem:
    names = set()
    for t in instance.objective:
        names.update(t.inner.var_names())
    for con in instance.constraints:
        names.update(con.lhs.var_names())
    if len(names) != 1:
        raise UnsupportedForm(f"square terms require a single variable, found {sorted(names)}")
    (name,) = names
    decl = instance.decl(name)
    if decl is None:
        raise UnsupportedForm(f"square term references undeclared {name!r}")

    # Pin down the single scalar column (a scalar var, or one vector entry).
    used = set()
    for t in instance.objective:
        used.update(t.inner.refs())
    for con in instance.constraints:
        used.update(con.lhs.refs())
    if len(used) != 1:
        raise UnsupportedForm("square terms require exactly one scalar unknown")
    (ref,) = used
    idx = 0 if ref.index is None else ref.index
    lo = decl.lower[idx]
    hi = decl.upper[idx]
    lo_f = -math.inf if lo is None else lo
    hi_f = math.inf if hi is None else hi

    # Single-variable constraints tighten the domain directly.
    for con in instance.constraints:
        coef = sum(c for c, r in con.lhs.terms)
        rhs = con.rhs - con.lhs.constant
        if coef == 0.0:
            ok = {"<=": 0.0 <= rhs, ">=": 0.0 >= rhs, "==": rhs == 0.0}[con.relation]
            if not ok:
                return ScalarProblem(ref, (), 1.0, 0.0)  # empty domain: infeasible
            continue
        bound = rhs / coef
        rel = con.relation
        if coef < 0 and rel != "==":
            rel = ">=" if rel == "<=" else "<="
        if rel == "<=":
            hi_f = min(hi_f, bound)
        elif rel == ">=":
            lo_f = max(lo_f, bound)
        else:
            lo_f = max(lo_f, bound)
            hi_f = min(hi_f, bound)
    if lo_f > hi_f:
        return ScalarProblem(ref, (), 1.0, 0.0)

    # Collect (weight, alpha, beta, kind): term = w * f(alpha*x + beta).
    parts: List[Tuple[float, float, float, str]] = []
    for t in instance.objective:
        alpha = sum(c for c, _ in t.inner.terms)
        beta = t.inner.constant
        parts.append((t.weight, alpha, beta, t.kind))

    breaks = set()
    for w, alpha, beta, kind in parts:
        if kind in ("abs", "hinge0") and alpha != 0.0:
            root = -beta / alpha
            if lo_f < root < hi_f:
                breaks.add(root)
    points = [lo_f] + sorted(breaks) + [hi_f]

    pieces: List[QuadPiece] = []
    for seg_lo, seg_hi in zip(points, points[1:]):
        mid = _segment_probe(seg_lo, seg_hi)
        a = b_ = c_ = 0.0
        for w, alpha, beta, kind in parts:
            if kind == "linear":
                b_ += w * alpha
                c_ += w * beta
            elif kind == "square":
                a += w * alpha * alpha
                b_ += 2.0 * w * alpha * beta
                c_ += w * beta * beta
            else:
                sign = 1.0 if alpha * mid + beta >= 0 else -1.0
                if kind == "hinge0" and sign < 0:
                    continue
                b_ += sign * w * alpha
                c_ += sign * w * beta
        pieces.append(
            QuadPiece(
                lo=seg_lo if math.isfinite(seg_lo) else -math.inf,
                hi=None if not math.isfinite(seg_hi) else seg_hi,
                a=a,
                b=b_,
                c=c_,
            )
        )

    problems = check_pieces(pieces)
    if problems:
        raise UnsupportedForm("; ".join(problems))
    return ScalarProblem(ref, tuple(pieces), lo_f if math.isfinite(lo_f) else -math.inf, hi_f if math.isfinite(hi_f) else None)


def _segment_probe(lo: float, hi: float) -> float:
    if math.isfinite(lo) and math.isfinite(hi):
        return 0.5 * (lo + hi)
    if math.isfinite(lo):
        return lo + 1.0
    if math.isfinite(hi):
        return hi - 1.0
    return 0.0


# ---------------------------------------------------------------------------
# Canonical JSON serialization (stable field order, shared with traces,
# the gateway and golden tests).

def instance_to_dict(instance: OptInstance) -> dict:
    return {
        "variables": [
            {
                "name": d.name,
                "length": d.length,
                "lower": list(d.lower),
                "upper": list(d.upper),
            }
            for d in instance.variables
        ],
        "objective": [
            {
                "kind": t.kind,
                "weight": t.weight,
                "inner": _expr_to_dict(t.inner),
            }
            for t in instance.objective
        ],
        "constraints": [
            {
                "label": c.label,
                "lhs": _expr_to_dict(c.lhs),
                "relation": c.relation,
                "rhs": c.rhs,
            }
            for c in instance.constraints
        ],
        "metadata": {k: v for k, v in instance.metadata},
    }


def _expr_to_dict(e: LinExpr) -> dict:
    return {
        "terms": [{"coef": c, "var": r.name, "index": r.index} for c, r in e.terms],
        "constant": e.constant,
    }


def _expr_from_dict(d: dict) -> LinExpr:
    return LinExpr.of(
        [(t["coef"], VarRef(t["var"], t.get("index"))) for t in d.get("terms", [])],
        d.get("constant", 0.0),
    )


def instance_from_dict(d: dict) -> OptInstance:
    variables = [
        VarDecl(
            v["name"],
            v.get("length"),
            tuple(v["lower"]),
            tuple(v["upper"]),
        )
        for v in d.get("variables", [])
    ]
    objective = [
        ConvexTerm(t["kind"], _expr_from_dict(t["inner"]), t.get("weight", 1.0))
        for t in d.get("objective", [])
    ]
    constraints = [
        Constraint(_expr_from_dict(c["lhs"]), c["relation"], c["rhs"], c.get("label", ""))
        for c in d.get("constraints", [])
    ]
    return OptInstance.of(variables, objective, constraints, d.get("metadata", {}))


def instance_to_json(instance: OptInstance) -> str:
    return json.dumps(instance_to_dict(instance), indent=2)


def instance_from_json(text: str) -> OptInstance:
    return instance_from_dict(json.loads(text))
