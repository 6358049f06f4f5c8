"""A full conversation against the scripted adapter.

The scripted adapter replays canned responses per prompt role, so the
whole dialogue - routing, five questions, formulation, explanation - runs
offline and lands on the same bytes every time. The second act replays a
script whose first formulation is broken, showing the debug loop fix it
in one iteration.

Run from the repository root:  python demos/demo_03_conversation.py
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from energy_concierge.adapters import ScriptedAdapter
from energy_concierge.pipeline import PipelineConfig, Session, respond

ROOT = Path(__file__).resolve().parents[1]


def replay(script_path, samples):
    adapter = ScriptedAdapter.from_file(script_path)
    session = Session()
    cfg = PipelineConfig(samples=samples)
    for turn in adapter.script.user_turns:
        print(f"user> {turn}")
        session, reply = respond(session, turn, adapter, cfg)
        print(f"concierge> {reply}")
        print()
    print(f"[{session.phase}; adapter calls: {session.adapter_calls}; "
          f"debug iterations: {sum(t.debug_iterations for t in session.traces)}]")
    return session


print("--- happy path: five golden candidates, zero debugging")
replay(ROOT / "fixtures/scripts/ev_happy.json", samples=5)

print()
print("--- broken first draft: one debug round repairs it")
session = replay(ROOT / "fixtures/scripts/ev_one_debug.json", samples=1)
trace = session.traces[0]
print(f"trace: sample {trace.sample_index} -> {trace.outcome} after "
      f"{trace.debug_iterations} debug iteration(s); first failure was "
      f"{trace.debug_events[0]['category']}/{trace.debug_events[0]['code']}")
