"""Command-line front end.

    ec solve <kind> --params file.json       direct solve, no conversation
    ec chat --script fixtures/scripts/x.json replay a scripted conversation
    ec bench --kinds ... --n 20 --script ... --out dir
    ec parse <file.ecdsl>                    parse check with span diagnostics
    ec serve --port P                        run the HTTP gateway

Exit codes: 0 success, 2 formulation-document errors (category, code and
span on stderr), 1 anything else (machine code on stderr).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import List, Optional

from .adapters import ScriptedAdapter
from .config import load_config
from .dsl import DslError, parse as parse_dsl, print_doc
from .metrics import run_benchmark
from .pipeline import PipelineConfig, Session, respond
from .problems import (
    SCHEMAS,
    ElicitedParams,
    ProblemError,
    ProblemKind,
    build_instance,
    derived_outputs,
)
from .solver import solution_to_dict, solve_instance


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="ec", description="Energy Concierge")
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="solve one problem kind from a params file")
    p_solve.add_argument("kind")
    p_solve.add_argument("--params", required=True, help="JSON file of parameter values")
    p_solve.add_argument("--json", action="store_true", help="print the raw JSON payload")

    p_chat = sub.add_parser("chat", help="replay a scripted conversation to stdout")
    p_chat.add_argument("--script", required=True)
    p_chat.add_argument("--samples", type=int, default=None)

    p_bench = sub.add_parser("bench", help="run the benchmark harness")
    p_bench.add_argument("--kinds", default=None, help="comma-separated kinds (default: all six)")
    p_bench.add_argument("--n", type=int, default=20)
    p_bench.add_argument("--script", required=True)
    p_bench.add_argument("--out", default="bench_out")
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("--samples", type=int, default=5)

    p_parse = sub.add_parser("parse", help="parse a formulation document")
    p_parse.add_argument("file")

    p_serve = sub.add_parser("serve", help="run the HTTP gateway")
    p_serve.add_argument("--port", type=int, default=None)
    p_serve.add_argument("--adapter", default=None)
    p_serve.add_argument("--data-dir", default=None)

    args = parser.parse_args(argv)
    try:
        if args.command == "solve":
            return _cmd_solve(args)
        if args.command == "chat":
            return _cmd_chat(args)
        if args.command == "bench":
            return _cmd_bench(args)
        if args.command == "parse":
            return _cmd_parse(args)
        if args.command == "serve":
            return _cmd_serve(args)
    except DslError as exc:
        print(f"{exc.code}: {exc.category} error at {exc.span[0]}:{exc.span[1]}: {exc.message}", file=sys.stderr)
        return 2
    except ProblemError as exc:
        print(f"{exc.code}: {exc.message}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"FileNotFound: {exc}", file=sys.stderr)
        return 1
    return 0


def _cmd_solve(args) -> int:
    kind = ProblemKind.parse(args.kind)
    with open(args.params, encoding="utf-8") as fh:
        raw = json.load(fh)
    schema = SCHEMAS[kind]
    values = {}
    for k, v in raw.items():
        ptype = next((f.ptype for f in schema.params if f.name == k), None)
        values[k] = tuple(v) if ptype == "interval" and isinstance(v, list) else v
    params = ElicitedParams.of(kind, values)
    instance = build_instance(kind, params)
    solution = solve_instance(instance)
    derived = derived_outputs(kind, params, solution)
    if args.json:
        print(json.dumps({
            "solution": solution_to_dict(solution),
            "derived": [[l, v, u] for l, v, u in derived],
        }, indent=2))
        return 0
    print(f"status: {solution.status}")
    if solution.objective is not None:
        print(f"objective: {solution.objective:.6g}")
    for label, value, unit in derived:
        print(f"{label} = {value:.6g}" + (f" {unit}" if unit else ""))
    if solution.assignment:
        for ref in sorted(solution.assignment):
            print(f"  {ref.label()} = {solution.assignment[ref]:.6g}")
    return 0


def _cmd_chat(args) -> int:
    adapter = ScriptedAdapter.from_file(args.script)
    samples = args.samples or int(adapter.script.config.get("samples", 5))
    cfg = PipelineConfig(samples=samples)
    session = Session()
    if not adapter.script.user_turns:
        print("script has no user_turns to replay", file=sys.stderr)
        return 1
    for turn in adapter.script.user_turns:
        print(f"user> {turn}")
        session, reply = respond(session, turn, adapter, cfg)
        print(f"concierge> {reply}\n")
    print(f"[phase: {session.phase}; adapter calls: {session.adapter_calls}]")
    return 0 if session.phase != "failed" else 1


def _cmd_bench(args) -> int:
    kinds = [ProblemKind.parse(k) for k in args.kinds.split(",")] if args.kinds else list(ProblemKind)
    records = run_benchmark(
        kinds, args.n, args.script,
        cfg=PipelineConfig(samples=args.samples),
        out_dir=args.out, seed=args.seed,
    )
    summary = Path(args.out) / "summary.csv"
    print(summary.read_text(encoding="utf-8"), end="")
    print(f"# {len(records)} episodes -> {summary}")
    return 0


def _cmd_parse(args) -> int:
    text = Path(args.file).read_text(encoding="utf-8")
    doc = parse_dsl(text)
    sys.stdout.write(print_doc(doc))
    print(f"# ok: problem {doc.name!r}, {len(doc.statements)} statements")
    return 0


def _cmd_serve(args) -> int:  # pragma: no cover - runs a server
    from .gateway import serve

    config = load_config(flags={
        "port": args.port,
        "adapter": args.adapter,
        "data_dir": args.data_dir,
    })
    serve(config)
    return 0


if __name__ == "__main__":
    sys.exit(main())
