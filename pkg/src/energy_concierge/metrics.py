"""Evaluation metrics and the batch benchmark harness.

Gap and improvement are simple ratios; the success-rate estimators invert
a cap-5 truncated-geometric model: `estimate_p` recovers the one-round
formulation success probability from the mean number of generations
(failures beyond the cap coded as 6), and `estimate_q` recovers the
per-iteration debugging success probability from a normalized histogram
of debug iteration counts via a 0.01-step line search minimizing MSE.

`run_benchmark` drives full pipeline episodes per problem kind against a
scripted adapter, scores candidates against the exact oracles, and writes
a summary CSV plus per-episode JSON lines.  Fixed seed, fixed bytes.
"""

from __future__ import annotations

import json
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Union

from .adapters import Script, ScriptedAdapter
from .golden import golden_document
from .pipeline import DONE, PipelineConfig, Session, respond
from .problems import ElicitedParams, ProblemKind, oracle, sample_params
from .solver import OPTIMAL

DEBUG_CAP = 5
OVERFLOW_CODE = 6  # episodes that never succeed within the cap


class NonPositiveOptimum(ValueError):
    """v* <= 0: the ratio gap is undefined; shift the objective first."""


class NonPositiveValue(ValueError):
    """v <= 0: improvement over baseline is undefined."""


class OutOfRange(ValueError):
    pass


class BadInput(ValueError):
    pass


def optimality_gap(v: float, v_star: float) -> float:
    """v / v* - 1 for a feasible candidate objective v of a minimization
    whose true optimum is v_star > 0."""
    if v_star <= 0:
        raise NonPositiveOptimum(
            f"optimality gap is undefined for v* = {v_star:g}; shift the objective to make it positive"
        )
    return v / v_star - 1.0


def normalized_gap(v: float, v_star: float) -> float:
    """(v - v*) / |v*|: equals optimality_gap when v* > 0 and stays
    meaningful for sign-indefinite objectives (heat-pump cost deltas)."""
    if v_star == 0:
        raise NonPositiveOptimum("normalized gap is undefined for v* = 0")
    return (v - v_star) / abs(v_star)


def improvement_over_baseline(v_b: float, v: float) -> float:
    """v_b / v - 1: how much worse the baseline objective v_b is."""
    if v <= 0:
        raise NonPositiveValue(f"improvement is undefined for v = {v:g}")
    return v_b / v - 1.0


def expected_generations(p: float) -> float:
    """Mean generations-to-success under the cap-5 truncated geometric:
    sum_{k=1..5} k (1-p)^(k-1) p + 6 (1-p)^5, ranging from 6 (p->0) to 1."""
    q = 1.0 - p
    return sum(k * q ** (k - 1) * p for k in range(1, 6)) + 6.0 * q ** 5


def estimate_p(z: float) -> float:
    """Invert expected_generations by bisection to 1e-9.

    z must lie in [1, 6].  z = 1 maps to p = 1 exactly; z = 6 is the
    unreachable limit p -> 0, so the bisected value approaches 0.
    """
    if not 1.0 <= z <= 6.0:
        raise OutOfRange(f"mean generations {z:g} outside [1, 6]")
    if z == 1.0:
        return 1.0
    lo, hi = 0.0, 1.0  # expected_generations is strictly decreasing in p
    while hi - lo > 1e-9:
        mid = 0.5 * (lo + hi)
        if expected_generations(mid) > z:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def debug_histogram_model(q: float) -> List[float]:
    """yhat_k = (1-q)^(k-1) q for k=1..4; yhat_5 absorbs the tail."""
    yhat = [(1.0 - q) ** (k - 1) * q for k in range(1, 5)]
    yhat.append(1.0 - sum(yhat))
    return yhat


def estimate_q(y: Sequence[float]) -> float:
    """Line search q in {0.00, 0.01, ..., 1.00} minimizing MSE against the
    normalized debug-iteration histogram y (buckets 1..4 and >=5).
    Ties break toward smaller q."""
    if len(y) != 5 or any(v < 0 for v in y):
        raise BadInput("y must be 5 nonnegative frequencies")
    if abs(sum(y) - 1.0) > 1e-9:
        raise BadInput(f"y must sum to 1, got {sum(y):.12f}")
    best_q = 0.0
    best_mse = float("inf")
    for step in range(101):
        q = step / 100.0
        yhat = debug_histogram_model(q)
        mse = sum((a - b) ** 2 for a, b in zip(yhat, y)) / 5.0
        if mse < best_mse - 1e-15:
            best_mse = mse
            best_q = q
    return best_q


# ---------------------------------------------------------------------------
# Benchmark harness

@dataclass
class EvalRecord:
    kind: ProblemKind
    episode: int
    compiled: bool
    correct: bool
    explained: bool
    v: Optional[float]
    v_star: float
    gap: Optional[float]
    samples_used: int
    debug_iterations: int
    baseline: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "episode": self.episode,
            "compiled": self.compiled,
            "correct": self.correct,
            "explained": self.explained,
            "v": self.v,
            "v_star": self.v_star,
            "gap": self.gap,
            "samples_used": self.samples_used,
            "debug_iterations": self.debug_iterations,
            "baseline": self.baseline,
        }


GAP_CORRECT_TOL = 1e-6

SUMMARY_COLUMNS = [
    "kind", "n", "compiled_rate", "correct_rate", "explained_rate",
    "mean_gap", "mean_samples", "mean_debug_iters",
]


class ScriptMissing(FileNotFoundError):
    pass


def instantiate_script(template: Script, kind: ProblemKind, params: ElicitedParams) -> Script:
    """Fill a script template's {{kind}}/{{golden_doc}} placeholders for one
    episode's parameters (values are JSON-escaped into the canned replies)."""
    raw = json.dumps({"name": template.name, "turns": template.turns, "default": template.default})
    context = {"kind": kind.value, "golden_doc": golden_document(kind, params)}
    for key, value in context.items():
        raw = raw.replace("{{" + key + "}}", json.dumps(str(value))[1:-1])
    return Script.from_dict(json.loads(raw))


def answer_text(kind: ProblemKind, params: ElicitedParams, name: str) -> str:
    """Render a parameter value back into elicitation-answer text."""
    value = params.get(name)
    if isinstance(value, tuple):
        return f"{value[0]:g}-{value[1]:g}"
    if isinstance(value, list):
        return ", ".join(f"{v!r}" for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def run_episode(kind: ProblemKind, params: ElicitedParams, script_template: Script,
                cfg: PipelineConfig, episode: int) -> EvalRecord:
    """One full scripted conversation for one parameter set, scored vs the
    oracle: query, five answers, formulation, explanation."""
    from .problems import SCHEMAS

    adapter = ScriptedAdapter(instantiate_script(script_template, kind, params))
    session = Session()
    respond(session, f"benchmark episode for {kind.value}", adapter, cfg)
    for f in SCHEMAS[kind].questions():
        if session.phase != "eliciting":
            break
        respond(session, answer_text(kind, params, f.name), adapter, cfg)

    v_star = oracle(kind, params).objective
    assert v_star is not None
    explained = False
    v: Optional[float] = None
    gap: Optional[float] = None
    compiled = False
    if session.phase == DONE and session.result is not None:
        compiled = True
        explained = bool(session.result.explanation)
        if session.result.solution.status == OPTIMAL:
            v = float(session.result.solution.objective or 0.0)
            gap = optimality_gap(v, v_star) if v_star > 0 else normalized_gap(v, v_star)
    correct = gap is not None and abs(gap) <= GAP_CORRECT_TOL
    return EvalRecord(
        kind=kind,
        episode=episode,
        compiled=compiled,
        correct=correct,
        explained=explained,
        v=v,
        v_star=float(v_star),
        gap=gap,
        samples_used=cfg.samples,
        debug_iterations=sum(t.debug_iterations for t in session.traces),
    )


def run_benchmark(kinds: Iterable[ProblemKind], n_per_kind: int, adapter_script: Union[str, Path],
                  cfg: Optional[PipelineConfig] = None, out_dir: Union[str, Path] = "bench_out",
                  seed: int = 0, concurrency: int = 4) -> List[EvalRecord]:
    """n_per_kind scripted episodes per kind with seeded random parameters.

    Writes `summary.csv` (fixed column order) and `records.jsonl` under
    out_dir.  Identical seeds and scripts produce identical bytes.
    """
    script_path = Path(adapter_script)
    if not script_path.exists():
        raise ScriptMissing(str(script_path))
    template = Script.from_file(script_path)
    if n_per_kind < 1:
        raise ValueError("n_per_kind must be >= 1")
    cfg = cfg or PipelineConfig()
    kinds = list(kinds)

    jobs = []
    for kind in kinds:
        # String seeding hashes via sha512: stable across processes and
        # platforms, unlike str.__hash__.
        rng = random.Random(f"{seed}:{kind.value}")
        for episode in range(n_per_kind):
            jobs.append((kind, sample_params(kind, rng), episode))

    records: List[EvalRecord] = []
    with ThreadPoolExecutor(max_workers=max(1, concurrency)) as pool:
        for record in pool.map(lambda j: run_episode(j[0], j[1], template, cfg, j[2]), jobs):
            records.append(record)
    records.sort(key=lambda r: (r.kind.value, r.episode))

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "records.jsonl", "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r.to_dict(), sort_keys=True) + "\n")
    with open(out / "summary.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(SUMMARY_COLUMNS) + "\n")
        for kind in sorted(kinds, key=lambda k: k.value):
            rows = [r for r in records if r.kind == kind]
            n = len(rows)
            gaps = [r.gap for r in rows if r.gap is not None]
            fh.write(",".join([
                kind.value,
                str(n),
                _rate(sum(r.compiled for r in rows), n),
                _rate(sum(r.correct for r in rows), n),
                _rate(sum(r.explained for r in rows), n),
                _fmt6(sum(gaps) / len(gaps)) if gaps else "nan",
                _fmt6(sum(r.samples_used for r in rows) / n),
                _fmt6(sum(r.debug_iterations for r in rows) / n),
            ]) + "\n")
    return records


def _rate(hits: int, n: int) -> str:
    return f"{hits / n:.6f}" if n else "nan"


def _fmt6(x: float) -> str:
    if abs(x) < 5e-13:
        x = 0.0  # avoid the '-0.000000' rendering of float noise
    return f"{x:.6f}"


def success_histogram(debug_counts: Sequence[int]) -> List[float]:
    """Normalize raw per-episode debug-iteration counts into the 5-bucket
    frequency vector y (1, 2, 3, 4, >=5)."""
    if not debug_counts:
        raise BadInput("no debugged episodes")
    buckets = [0] * 5
    for c in debug_counts:
        if c < 1:
            raise BadInput("histogram only covers episodes that needed debugging")
        buckets[min(c, 5) - 1] += 1
    total = sum(buckets)
    return [b / total for b in buckets]


def mean_generations(successes: Sequence[int]) -> float:
    """Mean generations-to-success with never-succeeded coded as 6."""
    if not successes:
        raise BadInput("no episodes")
    coded = [min(s, OVERFLOW_CODE) for s in successes]
    return sum(coded) / len(coded)
