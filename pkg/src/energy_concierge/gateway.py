"""HTTP gateway: sessions, direct solves, schemas, benchmarks.

Offline by default — no endpoint touches a live model provider unless the
configuration explicitly names one.  Sessions live in memory or as JSON
snapshots under the data dir; per-session requests are serialized, and a
second concurrent message to the same session is refused with 409.
Completed conversations append their attempt traces to a JSON-lines log.
"""

from __future__ import annotations

import json
import threading
from pathlib import Path
from typing import Dict, List, Optional

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .adapters import AdapterError, AdapterTimeout, ModelAdapter
from .config import AppConfig
from .dsl import DslError, compile_doc, parse, print_doc
from .ir import instance_to_dict
from .metrics import run_benchmark
from .pipeline import (
    ELICITING,
    PipelineConfig,
    Session,
    SessionExpired,
    respond,
)
from .problems import (
    SCHEMAS,
    ElicitedParams,
    ProblemError,
    ProblemKind,
    build_instance,
    derived_outputs,
    schemas_to_jsonable,
)
from .solver import solution_to_dict, solve_instance


class ApiError(Exception):
    """(http status, machine code, human message); every pipeline error
    maps to exactly one."""

    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message

    def body(self) -> dict:
        return {"error": {"code": self.code, "message": self.message}}


class SessionStore:
    """Sessions by unguessable id; optional JSON snapshot per session."""

    def __init__(self, mode: str = "memory", data_dir: Optional[Path] = None):
        if mode not in ("memory", "file"):
            raise ValueError("persistence mode must be 'memory' or 'file'")
        self.mode = mode
        self.data_dir = Path(data_dir) if data_dir else None
        self._sessions: Dict[str, Session] = {}
        self._locks: Dict[str, threading.Lock] = {}
        self._flushed_traces: Dict[str, int] = {}
        self._mutex = threading.Lock()
        if self.mode == "file" and self.data_dir:
            (self.data_dir / "sessions").mkdir(parents=True, exist_ok=True)

    def create(self) -> Session:
        session = Session()
        with self._mutex:
            self._sessions[session.id] = session
            self._locks[session.id] = threading.Lock()
        self.save(session)
        return session

    def get(self, session_id: str) -> Session:
        with self._mutex:
            if session_id in self._sessions:
                return self._sessions[session_id]
        if self.mode == "file" and self.data_dir:
            path = self._snapshot_path(session_id)
            if path.exists():
                with open(path, encoding="utf-8") as fh:
                    session = Session.from_dict(json.load(fh))
                with self._mutex:
                    self._sessions[session_id] = session
                    self._locks.setdefault(session_id, threading.Lock())
                return session
        raise SessionExpired(session_id)

    def lock(self, session_id: str) -> threading.Lock:
        with self._mutex:
            if session_id not in self._locks:
                self._locks[session_id] = threading.Lock()
            return self._locks[session_id]

    def save(self, session: Session) -> None:
        if self.mode == "file" and self.data_dir:
            path = self._snapshot_path(session.id)
            with open(path, "w", encoding="utf-8") as fh:
                json.dump(session.to_dict(include_timing=True), fh, indent=2)

    def _snapshot_path(self, session_id: str) -> Path:
        assert self.data_dir is not None
        return self.data_dir / "sessions" / f"{session_id}.json"

    def flush_traces(self, session: Session) -> None:
        """Append newly terminal traces to the JSONL log."""
        if not self.data_dir:
            return
        start = self._flushed_traces.get(session.id, 0)
        new = session.traces[start:]
        if not new:
            return
        self.data_dir.mkdir(parents=True, exist_ok=True)
        with open(self.data_dir / "traces.jsonl", "a", encoding="utf-8") as fh:
            for t in new:
                row = {"session_id": session.id, "kind": session.kind.value if session.kind else None}
                row.update(t.to_dict(include_timing=True))
                fh.write(json.dumps(row, sort_keys=True) + "\n")
        self._flushed_traces[session.id] = len(session.traces)


class MessageBody(BaseModel):
    text: str


class SolveBody(BaseModel):
    kind: str
    params: dict


class ParseBody(BaseModel):
    text: str


class BenchBody(BaseModel):
    kinds: Optional[List[str]] = None
    n: int = 5
    script: str
    seed: int = 0
    samples: int = 5


def _pending_questions(session: Session) -> Optional[List[dict]]:
    if session.phase != ELICITING or session.kind is None:
        return None
    schema = SCHEMAS[session.kind]
    out = []
    for name in session.pending:
        f = schema.field(name)
        out.append({
            "name": f.name,
            "question": f.question,
            "type": f.ptype,
            "unit": f.unit,
            "minimum": f.minimum,
            "maximum": f.maximum,
            "min_exclusive": f.min_exclusive,
            "max_exclusive": f.max_exclusive,
            "choices": list(f.choices),
            "default": f.default,
            "vector_length": f.vector_length,
        })
    return out


def create_app(config: AppConfig, adapter: Optional[ModelAdapter] = None,
               store: Optional[SessionStore] = None) -> FastAPI:
    app = FastAPI(title="energy-concierge", version="0.1.0")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    data_dir = Path(config.data_dir)
    the_store = store or SessionStore(
        mode="file" if config.persistence == "file" else "memory",
        data_dir=data_dir if config.persistence == "file" else None,
    )
    the_adapter = adapter if adapter is not None else config.build_adapter()
    pipeline_cfg = config.pipeline_config()

    app.state.store = the_store
    app.state.adapter = the_adapter
    app.state.pipeline_cfg = pipeline_cfg

    @app.exception_handler(ApiError)
    async def _api_error(_request: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status, content=exc.body())

    def _require_adapter() -> ModelAdapter:
        if the_adapter is None:
            raise ApiError(503, "NoAdapter", "no model adapter is configured; set adapter in the config")
        return the_adapter

    @app.get("/v1/healthz")
    def healthz():
        return {"status": "ok"}

    @app.post("/v1/sessions")
    def create_session():
        session = the_store.create()
        return {"session_id": session.id}

    @app.get("/v1/sessions/{session_id}")
    def get_session(session_id: str):
        try:
            session = the_store.get(session_id)
        except SessionExpired:
            raise ApiError(404, "UnknownSession", f"no session {session_id!r}")
        return session.to_dict(include_timing=True)

    @app.post("/v1/sessions/{session_id}/messages")
    def post_message(session_id: str, body: MessageBody):
        try:
            session = the_store.get(session_id)
        except SessionExpired:
            raise ApiError(404, "UnknownSession", f"no session {session_id!r}")
        adapter_ = _require_adapter()
        lock = the_store.lock(session_id)
        if not lock.acquire(blocking=False):
            raise ApiError(409, "SessionBusy", "another message for this session is still being processed")
        try:
            try:
                session, reply = respond(session, body.text, adapter_, pipeline_cfg)
            except AdapterTimeout as exc:
                raise ApiError(504, "AdapterTimeout", str(exc))
            except AdapterError as exc:
                raise ApiError(502, "AdapterError", str(exc))
        finally:
            lock.release()
        the_store.save(session)
        if session.phase in ("done", "failed"):
            the_store.flush_traces(session)
        payload = {"reply": reply, "phase": session.phase}
        questions = _pending_questions(session)
        if questions is not None:
            payload["questions"] = questions
        if session.result is not None:
            payload["solution"] = solution_to_dict(session.result.solution)
            payload["explanation"] = session.result.explanation
            payload["derived"] = [[l, v, u] for l, v, u in session.result.derived]
        if session.failure is not None:
            payload["failure"] = session.failure
        return payload

    @app.get("/v1/schemas")
    def get_schemas():
        return {"schemas": schemas_to_jsonable()}

    @app.post("/v1/solve")
    def solve_direct(body: SolveBody):
        try:
            kind = ProblemKind.parse(body.kind)
        except KeyError as exc:
            raise ApiError(422, "UnknownKind", str(exc))
        schema = SCHEMAS[kind]
        params_in = {}
        for k, v in body.params.items():
            ptype = next((f.ptype for f in schema.params if f.name == k), None)
            if ptype == "interval" and isinstance(v, list) and len(v) == 2:
                params_in[k] = tuple(v)
            else:
                params_in[k] = v
        try:
            params = ElicitedParams.of(kind, params_in)
            instance = build_instance(kind, params)
            solution = solve_instance(instance)
        except ProblemError as exc:
            raise ApiError(422, exc.code, exc.message)
        out = {"solution": solution_to_dict(solution)}
        out["derived"] = [[l, v, u] for l, v, u in derived_outputs(kind, params, solution)]
        return out

    @app.post("/v1/parse")
    def parse_document(body: ParseBody):
        try:
            doc = parse(body.text)
        except DslError as exc:
            raise ApiError(422, exc.code, json.dumps(exc.to_dict()))
        out = {"name": doc.name, "statements": len(doc.statements), "canonical": print_doc(doc)}
        try:
            out["instance"] = instance_to_dict(compile_doc(doc))
        except DslError as exc:
            out["instance"] = None
            out["compile_error"] = exc.to_dict()
        return out

    @app.post("/v1/bench")
    def bench(body: BenchBody):
        kinds = [ProblemKind.parse(k) for k in body.kinds] if body.kinds else list(ProblemKind)
        out_dir = data_dir / "bench"
        try:
            records = run_benchmark(
                kinds, body.n, body.script,
                cfg=PipelineConfig(samples=body.samples),
                out_dir=out_dir, seed=body.seed,
            )
        except FileNotFoundError as exc:
            raise ApiError(422, "ScriptMissing", str(exc))
        summary = (out_dir / "summary.csv").read_text(encoding="utf-8")
        return {"n_records": len(records), "summary_csv": summary, "out_dir": str(out_dir)}

    ui_dir = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    if ui_dir.exists():
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app


def serve(config: AppConfig) -> None:  # pragma: no cover - thin wrapper
    import uvicorn

    app = create_app(config)
    uvicorn.run(app, host="127.0.0.1", port=config.port)
