"""Conversation state machine: classify, elicit, formulate, debug, explain.

One `respond` call advances a session by exactly one user-visible turn.
Formulation requests s candidate documents in a single adapter call and
processes them concurrently; candidates that fail with a categorized DSL
error are debugged in waves, one debug reply per failing candidate per
wave, capped at five waves.  The winner is always the lowest sample index
that solved (optimal or infeasible — a well-posed "no" is an answer, not
an error), which keeps replays deterministic regardless of thread timing.

Work is bounded: per solve, adapter calls never exceed
1 (batch) + s * (1 + max_debug).
"""

from __future__ import annotations

import secrets
import time
from concurrent.futures import ThreadPoolExecutor
from concurrent.futures import TimeoutError as FuturesTimeout
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from .adapters import AdapterError, AdapterTimeout, ModelAdapter
from .dsl import DslError, compile_doc, extract_block, parse, print_doc
from .ir import OptInstance
from .problems import (
    SCHEMAS,
    ElicitedParams,
    ParamField,
    ProblemKind,
    ValidationFailed,
    derived_outputs,
    parse_answer,
)
from .solver import INFEASIBLE, OPTIMAL, NumericalBreakdown, Solution, solve_instance

# Session phases
AWAITING_QUERY = "awaiting_query"
CLARIFYING = "clarifying"
ELICITING = "eliciting"
FORMULATING = "formulating"
DEBUGGING = "debugging"
EXPLAINING = "explaining"
DONE = "done"
NON_OPTIMIZATION = "non_optimization"
FAILED = "failed"

TERMINAL_PHASES = (DONE, NON_OPTIMIZATION, FAILED)

ALLOWED_TRANSITIONS: Dict[str, Tuple[str, ...]] = {
    AWAITING_QUERY: (CLARIFYING, ELICITING, NON_OPTIMIZATION, FAILED),
    CLARIFYING: (CLARIFYING, ELICITING, FAILED),
    ELICITING: (ELICITING, FORMULATING, FAILED),
    FORMULATING: (DEBUGGING, EXPLAINING, FAILED),
    DEBUGGING: (DEBUGGING, EXPLAINING, FAILED),
    EXPLAINING: (DONE,),
    DONE: (),
    NON_OPTIMIZATION: (),
    FAILED: (),
}

CLASSIFY_LABELS = tuple(k.value for k in ProblemKind) + ("unknown_optimization", "general")


class SessionExpired(Exception):
    """The session id is unknown to the store."""


class MalformedClassification(Exception):
    """The adapter's classification label was outside the allowed set twice."""


@dataclass
class PipelineConfig:
    samples: int = 5  # 1..8
    max_debug_iterations: int = 5
    adapter_timeout_s: float = 30.0
    prompts_dir: Optional[Path] = None
    rephrase_questions: bool = False
    concurrency: int = 4

    def __post_init__(self):
        if not 1 <= self.samples <= 8:
            raise ValueError("samples must be within 1..8")
        if self.max_debug_iterations < 0:
            raise ValueError("max_debug_iterations must be nonnegative")

    def prompt(self, name: str) -> str:
        if self.prompts_dir is not None:
            return (Path(self.prompts_dir) / f"{name}.txt").read_text(encoding="utf-8")
        return resources.files("energy_concierge").joinpath(f"prompts/{name}.txt").read_text(encoding="utf-8")


def render_prompt(template: str, values: Dict[str, str]) -> str:
    out = template
    for key, value in values.items():
        out = out.replace("{{" + key + "}}", str(value))
    return out


@dataclass
class AttemptTrace:
    """One candidate's journey: extraction, parse/compile, solve, debugging."""

    sample_index: int
    raw_output: str = ""
    extract_outcome: str = "pending"  # ok | error code
    parse_outcome: str = "pending"
    compile_outcome: str = "pending"
    solver_status: str = "none"  # optimal | infeasible | unbounded | breakdown | none
    debug_iterations: int = 0
    outcome: str = "pending"  # won | solved | exhausted | solver_failure | pending
    debug_events: List[dict] = field(default_factory=list)  # {iteration, stage, category, code}
    wall_time_s: float = 0.0

    def to_dict(self, include_timing: bool = True) -> dict:
        d = {
            "sample_index": self.sample_index,
            "raw_output": self.raw_output,
            "extract_outcome": self.extract_outcome,
            "parse_outcome": self.parse_outcome,
            "compile_outcome": self.compile_outcome,
            "solver_status": self.solver_status,
            "debug_iterations": self.debug_iterations,
            "outcome": self.outcome,
            "debug_events": list(self.debug_events),
        }
        if include_timing:
            d["wall_time_s"] = self.wall_time_s
        return d

    @staticmethod
    def from_dict(d: dict) -> "AttemptTrace":
        t = AttemptTrace(sample_index=d["sample_index"])
        t.raw_output = d.get("raw_output", "")
        t.extract_outcome = d.get("extract_outcome", "pending")
        t.parse_outcome = d.get("parse_outcome", "pending")
        t.compile_outcome = d.get("compile_outcome", "pending")
        t.solver_status = d.get("solver_status", "none")
        t.debug_iterations = d.get("debug_iterations", 0)
        t.outcome = d.get("outcome", "pending")
        t.debug_events = list(d.get("debug_events", []))
        t.wall_time_s = d.get("wall_time_s", 0.0)
        return t


@dataclass
class SessionResult:
    solution: Solution
    document: str
    explanation: str
    template_explanation: str
    derived: List[Tuple[str, float, str]] = field(default_factory=list)
    adapter_explained: bool = True

    def to_dict(self) -> dict:
        from .solver import solution_to_dict

        return {
            "solution": solution_to_dict(self.solution),
            "document": self.document,
            "explanation": self.explanation,
            "template_explanation": self.template_explanation,
            "derived": [[label, value, unit] for label, value, unit in self.derived],
            "adapter_explained": self.adapter_explained,
        }

    @staticmethod
    def from_dict(d: dict) -> "SessionResult":
        from .solver import solution_from_dict

        return SessionResult(
            solution=solution_from_dict(d["solution"]),
            document=d.get("document", ""),
            explanation=d.get("explanation", ""),
            template_explanation=d.get("template_explanation", ""),
            derived=[(r[0], r[1], r[2]) for r in d.get("derived", [])],
            adapter_explained=d.get("adapter_explained", True),
        )


@dataclass
class Session:
    """Conversation record; phase transitions are guarded by the FSM table."""

    id: str = field(default_factory=lambda: secrets.token_hex(16))
    phase: str = AWAITING_QUERY
    phase_history: List[str] = field(default_factory=lambda: [AWAITING_QUERY])
    query: str = ""
    kind: Optional[ProblemKind] = None
    pending: List[str] = field(default_factory=list)
    answers: Dict[str, object] = field(default_factory=dict)
    traces: List[AttemptTrace] = field(default_factory=list)
    result: Optional[SessionResult] = None
    failure: Optional[str] = None
    adapter_calls: int = 0
    last_reply: str = ""

    def set_phase(self, new_phase: str) -> None:
        if new_phase not in ALLOWED_TRANSITIONS[self.phase]:
            raise RuntimeError(f"illegal phase transition {self.phase} -> {new_phase}")
        self.phase = new_phase
        self.phase_history.append(new_phase)

    def params(self) -> ElicitedParams:
        assert self.kind is not None
        return ElicitedParams.of(self.kind, dict(self.answers))

    def to_dict(self, include_timing: bool = True) -> dict:
        return {
            "id": self.id,
            "phase": self.phase,
            "phase_history": list(self.phase_history),
            "query": self.query,
            "kind": self.kind.value if self.kind else None,
            "pending": list(self.pending),
            "answers": {k: list(v) if isinstance(v, (list, tuple)) else v for k, v in self.answers.items()},
            "traces": [t.to_dict(include_timing) for t in self.traces],
            "result": self.result.to_dict() if self.result else None,
            "failure": self.failure,
            "adapter_calls": self.adapter_calls,
            "last_reply": self.last_reply,
        }

    def canonical_dict(self) -> dict:
        """Replay-stable view: identical runs serialize byte-identically
        (wall-clock timings excluded)."""
        return self.to_dict(include_timing=False)

    @staticmethod
    def from_dict(d: dict) -> "Session":
        s = Session(id=d["id"])
        s.phase = d["phase"]
        s.phase_history = list(d.get("phase_history", [d["phase"]]))
        s.query = d.get("query", "")
        s.kind = ProblemKind(d["kind"]) if d.get("kind") else None
        s.pending = list(d.get("pending", []))
        answers = {}
        for k, v in d.get("answers", {}).items():
            f = _schema_field(s.kind, k) if s.kind else None
            if f is not None and f.ptype == "interval" and isinstance(v, list):
                answers[k] = tuple(v)
            else:
                answers[k] = v
        s.answers = answers
        s.traces = [AttemptTrace.from_dict(t) for t in d.get("traces", [])]
        s.result = SessionResult.from_dict(d["result"]) if d.get("result") else None
        s.failure = d.get("failure")
        s.adapter_calls = d.get("adapter_calls", 0)
        s.last_reply = d.get("last_reply", "")
        return s


def _schema_field(kind: Optional[ProblemKind], name: str) -> Optional[ParamField]:
    if kind is None:
        return None
    try:
        return SCHEMAS[kind].field(name)
    except KeyError:
        return None


# ---------------------------------------------------------------------------
# Adapter plumbing

def _call_adapter(session: Session, adapter: ModelAdapter, prompt: str, n: int, cfg: PipelineConfig) -> List[str]:
    """One counted adapter call with a hard timeout.

    The worker pool is abandoned (not joined) on timeout so a hung adapter
    thread cannot block the pipeline.
    """
    session.adapter_calls += 1
    if len(prompt) > adapter.max_prompt_chars:
        prompt = prompt[: adapter.max_prompt_chars]
    pool = ThreadPoolExecutor(max_workers=1)
    try:
        future = pool.submit(adapter.complete, prompt, n)
        try:
            replies = future.result(timeout=cfg.adapter_timeout_s)
        except AdapterTimeout:
            raise
        except FuturesTimeout as exc:
            raise AdapterTimeout(f"adapter exceeded {cfg.adapter_timeout_s}s") from exc
    finally:
        pool.shutdown(wait=False, cancel_futures=True)
    if len(replies) != n:
        replies = (list(replies) + [""] * n)[:n]
    return replies


# ---------------------------------------------------------------------------
# Classification

def classify(query: str, adapter: ModelAdapter, cfg: PipelineConfig, session: Session) -> Tuple[str, Optional[ProblemKind]]:
    """Route a message: ('optimization', kind or None) or ('general', None).

    A label outside the allowed set is retried once, then raised as
    MalformedClassification.
    """
    if not query.strip():
        raise MalformedClassification("empty query")
    prompt = render_prompt(cfg.prompt("classify"), {"query": query})
    for attempt in range(2):
        reply = _call_adapter(session, adapter, prompt, 1, cfg)[0]
        label = reply.strip().lower().split()[0].strip(".,`'\"") if reply.strip() else ""
        if label in CLASSIFY_LABELS:
            if label == "general":
                return "general", None
            if label == "unknown_optimization":
                return "optimization", None
            return "optimization", ProblemKind(label)
    raise MalformedClassification(f"label {label!r} not in the allowed set after retry")


# ---------------------------------------------------------------------------
# Elicitation

def question_block(kind: ProblemKind) -> List[str]:
    return [f.question or f.name for f in SCHEMAS[kind].questions()]


def _begin_elicitation(session: Session, adapter: ModelAdapter, cfg: PipelineConfig) -> str:
    assert session.kind is not None
    fields = SCHEMAS[session.kind].questions()
    session.pending = [f.name for f in fields]
    questions = [f.question or f.name for f in fields]
    if cfg.rephrase_questions:
        try:
            prompt = render_prompt(cfg.prompt("elicit"), {"questions": "\n".join(questions)})
            reply = _call_adapter(session, adapter, prompt, 1, cfg)[0]
            lines = [ln.strip() for ln in reply.splitlines() if ln.strip()]
            if len(lines) == len(questions):
                questions = lines
        except (AdapterTimeout, AdapterError):
            pass  # schema wording is always a safe fallback
    numbered = "\n".join(f"{i + 1}. {q}" for i, q in enumerate(questions))
    return (
        "To work this out, please provide the following information:\n"
        f"{numbered}\n\nFirst: {questions[0]}"
    )


def _store_answer(session: Session, message: str) -> Optional[str]:
    """Validate one answer; returns a re-ask reply on failure, None on success."""
    assert session.kind is not None
    name = session.pending[0]
    f = SCHEMAS[session.kind].field(name)
    try:
        value = parse_answer(f, message)
    except ValidationFailed as exc:
        return f"That answer did not validate: {exc.message}\nPlease answer again: {f.question}"
    session.answers[name] = value
    session.pending.pop(0)
    return None


# ---------------------------------------------------------------------------
# Formulation, debugging, solving

@dataclass
class _Candidate:
    trace: AttemptTrace
    document_text: Optional[str] = None  # last extracted document
    error: Optional[DslError] = None
    instance: Optional[OptInstance] = None
    solution: Optional[Solution] = None
    finished: bool = False  # solved or terminally failed


def _try_candidate(cand: _Candidate, raw: str) -> None:
    """Run extract -> parse -> compile -> solve on one reply text."""
    cand.trace.raw_output = raw
    cand.error = None
    try:
        text = extract_block(raw)
    except DslError as exc:
        cand.trace.extract_outcome = exc.code
        cand.trace.parse_outcome = "skipped"
        cand.trace.compile_outcome = "skipped"
        cand.error = exc
        cand.document_text = None
        return
    cand.trace.extract_outcome = "ok"
    cand.document_text = text
    try:
        doc = parse(text)
    except DslError as exc:
        cand.trace.parse_outcome = exc.code
        cand.trace.compile_outcome = "skipped"
        cand.error = exc
        return
    cand.trace.parse_outcome = "ok"
    try:
        cand.instance = compile_doc(doc)
    except DslError as exc:
        cand.trace.compile_outcome = exc.code
        cand.error = exc
        return
    cand.trace.compile_outcome = "ok"
    cand.document_text = print_doc(doc)
    try:
        cand.solution = solve_instance(cand.instance)
    except NumericalBreakdown:
        cand.trace.solver_status = "breakdown"
        cand.trace.outcome = "solver_failure"
        cand.finished = True
        return
    cand.trace.solver_status = cand.solution.status
    if cand.solution.status in (OPTIMAL, INFEASIBLE):
        cand.trace.outcome = "solved"
        cand.finished = True
    else:
        # Unbounded compiles and runs but answers nothing; there is no
        # categorized error to feed the debug loop, so the candidate ends.
        cand.trace.outcome = "solver_failure"
        cand.finished = True


def formulate_and_solve(session: Session, adapter: ModelAdapter, cfg: PipelineConfig) -> Session:
    """Sample s candidates in one call, then debug failing ones in waves."""
    if session.phase != FORMULATING:
        raise RuntimeError(f"formulate_and_solve requires phase {FORMULATING}, got {session.phase}")
    assert session.kind is not None
    params = session.params()
    params_text = "\n".join(f"- {k} = {v}" for k, v in params.values)
    prompt = render_prompt(cfg.prompt("formulate"), {"kind": session.kind.value, "params": params_text})

    candidates = [_Candidate(AttemptTrace(sample_index=i)) for i in range(cfg.samples)]
    session.traces.extend(c.trace for c in candidates)
    started = time.monotonic()
    try:
        replies = _call_adapter(session, adapter, prompt, cfg.samples, cfg)
    except (AdapterTimeout, AdapterError) as exc:
        for cand in candidates:
            cand.trace.extract_outcome = "no_reply"
            cand.trace.outcome = "exhausted"
        session.failure = f"AllCandidatesExhausted: batch request failed ({exc})"
        session.set_phase(FAILED)
        return session

    with ThreadPoolExecutor(max_workers=max(1, cfg.concurrency)) as pool:
        list(pool.map(lambda pair: _try_candidate(pair[0], pair[1]), zip(candidates, replies)))

    winner = _pick_winner(candidates)
    wave = 0
    while winner is None and wave < cfg.max_debug_iterations:
        wave += 1
        if session.phase != DEBUGGING:
            session.set_phase(DEBUGGING)
        open_candidates = [c for c in candidates if not c.finished]
        if not open_candidates:
            break

        def debug_one(cand: _Candidate) -> None:
            assert cand.error is not None
            err = cand.error
            cand.trace.debug_iterations += 1
            cand.trace.debug_events.append({
                "iteration": cand.trace.debug_iterations,
                "stage": _stage_of(cand.trace),
                "category": err.category,
                "code": err.code,
            })
            failing = cand.document_text if cand.document_text is not None else cand.trace.raw_output
            dbg_prompt = render_prompt(cfg.prompt("debug"), {
                "category": err.category,
                "code": err.code,
                "line": str(err.span[0]),
                "column": str(err.span[1]),
                "message": err.message,
                "document": failing,
            })
            try:
                reply = _call_adapter(session, adapter, dbg_prompt, 1, cfg)[0]
            except (AdapterTimeout, AdapterError):
                return  # the failed iteration is already counted
            _try_candidate(cand, reply)

        # One debug reply per failing candidate per wave, joined in index order.
        with ThreadPoolExecutor(max_workers=max(1, cfg.concurrency)) as pool:
            list(pool.map(debug_one, open_candidates))
        winner = _pick_winner(candidates)

    for cand in candidates:
        if cand.trace.outcome in ("pending",):
            cand.trace.outcome = "exhausted"
    if winner is None:
        session.failure = "AllCandidatesExhausted: no candidate reached a solution"
        session.set_phase(FAILED)
        return session

    winner.trace.outcome = "won"
    session.set_phase(EXPLAINING)
    winner.trace.wall_time_s = time.monotonic() - started
    session._winner = winner  # type: ignore[attr-defined]  # handed to explain()
    return session


def _stage_of(trace: AttemptTrace) -> str:
    if trace.extract_outcome not in ("ok", "pending"):
        return "extract"
    if trace.parse_outcome not in ("ok", "pending", "skipped"):
        return "parse"
    return "compile"


def _pick_winner(candidates: List[_Candidate]) -> Optional[_Candidate]:
    for cand in candidates:  # ordered by sample index
        if cand.solution is not None and cand.solution.status in (OPTIMAL, INFEASIBLE):
            return cand
    return None


# ---------------------------------------------------------------------------
# Explanation

def explain(session: Session, adapter: ModelAdapter, cfg: PipelineConfig) -> Session:
    """Store the adapter's explanation verbatim; always attach the
    deterministic template explanation; never block a solved problem."""
    if session.phase != EXPLAINING:
        raise RuntimeError(f"explain requires phase {EXPLAINING}, got {session.phase}")
    winner: _Candidate = getattr(session, "_winner")
    assert winner.solution is not None
    params = session.params()
    template_text = template_explanation(winner.instance, params, winner.solution, session.kind)
    derived = []
    if session.kind is not None and winner.solution.status == OPTIMAL:
        derived = derived_outputs(session.kind, params, winner.solution)
    explanation = template_text
    adapter_explained = True
    from .solver import solution_to_json

    prompt = render_prompt(cfg.prompt("explain"), {
        "document": winner.document_text or "",
        "params": "\n".join(f"- {k} = {v}" for k, v in params.values),
        "solution": solution_to_json(winner.solution),
    })
    try:
        explanation = _call_adapter(session, adapter, prompt, 1, cfg)[0]
    except (AdapterTimeout, AdapterError):
        adapter_explained = False
        explanation = template_text
    session.result = SessionResult(
        solution=winner.solution,
        document=winner.document_text or "",
        explanation=explanation,
        template_explanation=template_text,
        derived=derived,
        adapter_explained=adapter_explained,
    )
    session.set_phase(DONE)
    return session


def template_explanation(instance: Optional[OptInstance], params: ElicitedParams,
                         solution: Solution, kind: Optional[ProblemKind]) -> str:
    """Deterministic fallback explanation: objective, variable table with
    units, binding constraints; for infeasible instances, the first
    constraint whose right side is unreachable under the variable bounds."""
    lines: List[str] = []
    if solution.status == INFEASIBLE:
        lines.append("No feasible plan exists for these inputs.")
        if instance is not None:
            culprit = _infeasibility_witness(instance)
            if culprit:
                lines.append(f"The blocking requirement is {culprit}.")
        return "\n".join(lines)
    if solution.status != OPTIMAL or solution.assignment is None:
        return "The formulation is unbounded; some requirement is missing."
    meta = instance.meta() if instance is not None else {}
    unit = meta.get("objective_unit", "")
    lines.append(f"Best objective value: {solution.objective:.6g}" + (f" {unit}" if unit else ""))
    if kind is not None:
        for label, value, u in derived_outputs(kind, params, solution):
            lines.append(f"- {label}: {value:.6g}" + (f" {u}" if u else ""))
    lines.append("Variable values:")
    for ref in sorted(solution.assignment):
        u = meta.get(f"unit:{ref.name}", "")
        lines.append(f"  {ref.label()} = {solution.assignment[ref]:.6g}" + (f" {u}" if u else ""))
    if instance is not None and instance.constraints:
        binding = []
        for con in instance.constraints:
            v = con.lhs.evaluate(solution.assignment)
            if abs(v - con.rhs) <= 1e-6 * max(1.0, abs(con.rhs)):
                binding.append(con.label or f"{con.relation} {con.rhs:g}")
        if binding:
            lines.append("Binding constraints: " + ", ".join(binding))
    return "\n".join(lines)


def _infeasibility_witness(instance: OptInstance) -> Optional[str]:
    """Interval arithmetic over the boxes: name the first constraint whose
    right-hand side lies outside the attainable range of its left side."""
    bounds: Dict[str, Tuple[List[Optional[float]], List[Optional[float]]]] = {
        d.name: (list(d.lower), list(d.upper)) for d in instance.variables
    }
    for con in instance.constraints:
        lo = hi = con.lhs.constant
        ok = True
        for coef, ref in con.lhs.terms:
            decl = bounds.get(ref.name)
            if decl is None:
                ok = False
                break
            idx = 0 if ref.index is None else ref.index
            vlo, vhi = decl[0][idx], decl[1][idx]
            if coef >= 0:
                lo = -float("inf") if vlo is None else lo + coef * vlo
                hi = float("inf") if vhi is None else hi + coef * vhi
            else:
                lo = -float("inf") if vhi is None else lo + coef * vhi
                hi = float("inf") if vlo is None else hi + coef * vlo
        if not ok:
            continue
        name = con.label or f"{con.relation} {con.rhs:g}"
        if con.relation in ("==", ">=") and hi < con.rhs:
            return f"'{name}': it needs at least {con.rhs:g} but the variables can reach at most {hi:g}"
        if con.relation in ("==", "<=") and lo > con.rhs:
            return f"'{name}': it allows at most {con.rhs:g} but the variables reach at least {lo:g}"
    return None


# ---------------------------------------------------------------------------
# The single driver entry point

def respond(session: Session, user_message: str, adapter: ModelAdapter, cfg: PipelineConfig) -> Tuple[Session, str]:
    """Advance the conversation by one user-visible turn."""
    reply = _respond_inner(session, user_message, adapter, cfg)
    session.last_reply = reply
    return session, reply


def _respond_inner(session: Session, user_message: str, adapter: ModelAdapter, cfg: PipelineConfig) -> str:
    if session.phase == DONE:
        assert session.result is not None
        return "This conversation already finished; here is the result again.\n" + session.result.explanation
    if session.phase == FAILED:
        return f"This conversation ended without a solution: {session.failure}"
    if session.phase == NON_OPTIMIZATION:
        return session.last_reply or "I answered that above; start a new session for an optimization."

    if session.phase == AWAITING_QUERY:
        session.query = user_message
        try:
            route, kind = classify(user_message, adapter, cfg, session)
        except MalformedClassification as exc:
            session.failure = f"MalformedClassification: {exc}"
            session.set_phase(FAILED)
            return f"I could not route this request: {exc}"
        except (AdapterTimeout, AdapterError) as exc:
            session.failure = f"AdapterTimeout: {exc}"
            session.set_phase(FAILED)
            return "The language model did not answer in time; please retry later."
        if route == "general":
            session.set_phase(NON_OPTIMIZATION)
            try:
                prompt = render_prompt(cfg.prompt("general"), {"query": user_message})
                return _call_adapter(session, adapter, prompt, 1, cfg)[0]
            except (AdapterTimeout, AdapterError):
                return ("I can help with EV charging schedules, HVAC setpoints, battery dispatch, "
                        "PV sizing, heat-pump comparisons and battery sizing.")
        if kind is None:
            session.set_phase(CLARIFYING)
            return ("Which of these does your question concern: ev_charging, hvac_setpoint, "
                    "battery_dispatch, pv_sizing, heat_pump, or battery_sizing?")
        session.kind = kind
        session.set_phase(ELICITING)
        return _begin_elicitation(session, adapter, cfg)

    if session.phase == CLARIFYING:
        try:
            session.kind = ProblemKind.parse(user_message)
        except KeyError:
            session.set_phase(CLARIFYING)
            return ("Sorry, I did not recognize that. Please name one of: ev_charging, hvac_setpoint, "
                    "battery_dispatch, pv_sizing, heat_pump, battery_sizing.")
        session.set_phase(ELICITING)
        return _begin_elicitation(session, adapter, cfg)

    if session.phase == ELICITING:
        retry = _store_answer(session, user_message)
        if retry is not None:
            session.set_phase(ELICITING)
            return retry
        if session.pending:
            session.set_phase(ELICITING)
            next_field = SCHEMAS[session.kind].field(session.pending[0])  # type: ignore[index]
            return f"Next: {next_field.question}"
        try:
            session.params()  # cross-field validation before formulating
        except ValidationFailed as exc:
            culprit = exc.message.split(":", 1)[0].strip()
            if culprit in {f.name for f in SCHEMAS[session.kind].params}:  # type: ignore[index]
                session.answers.pop(culprit, None)
                session.pending.insert(0, culprit)
                session.set_phase(ELICITING)
                f = SCHEMAS[session.kind].field(culprit)  # type: ignore[index]
                return f"These answers do not fit together: {exc.message}\nPlease answer again: {f.question}"
            session.failure = f"ValidationFailed: {exc.message}"
            session.set_phase(FAILED)
            return f"The answers cannot form a valid problem: {exc.message}"
        session.set_phase(FORMULATING)
        formulate_and_solve(session, adapter, cfg)
        if session.phase == FAILED:
            used = sum(t.debug_iterations for t in session.traces)
            return (f"I could not produce a working formulation "
                    f"({cfg.samples} candidates, {used} debug iterations). {session.failure}")
        explain(session, adapter, cfg)
        assert session.result is not None
        return session.result.explanation

    raise RuntimeError(f"respond cannot run while the engine is mid-{session.phase}")
