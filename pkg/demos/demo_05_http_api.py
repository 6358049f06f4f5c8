"""The HTTP gateway, exercised in-process.

Walks the whole JSON surface without opening a port: create a session,
hold the EV conversation, fetch the stored session, run a direct solve,
and parse a document. `ec serve` exposes exactly the same endpoints over
a real socket for the browser chat client.

Run from the repository root:  python demos/demo_05_http_api.py
"""

import json
import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from fastapi.testclient import TestClient

from energy_concierge.config import AppConfig
from energy_concierge.gateway import create_app

ROOT = Path(__file__).resolve().parents[1]

config = AppConfig(
    adapter=f"scripted:{ROOT / 'fixtures/scripts/ev_happy.json'}",
    persistence="file",
    data_dir=tempfile.mkdtemp(prefix="ec_data_"),
)
client = TestClient(create_app(config))

sid = client.post("/v1/sessions").json()["session_id"]
print(f"session: {sid}")

first = client.post(f"/v1/sessions/{sid}/messages", json={
    "text": "I need help optimizing my EV charging schedule to minimize costs",
}).json()
print(f"phase: {first['phase']}; questions: {[q['name'] for q in first['questions']]}")

for answer in ["15", "70", "home", "18-6", "default"]:
    last = client.post(f"/v1/sessions/{sid}/messages", json={"text": answer}).json()
print(f"final phase: {last['phase']}; objective: {last['solution']['objective']:.2f} USD")

stored = client.get(f"/v1/sessions/{sid}").json()
print(f"stored traces: {len(stored['traces'])}; snapshot dir: {config.data_dir}")

solve = client.post("/v1/solve", json={
    "kind": "battery_sizing",
    "params": json.load(open(ROOT / "fixtures/params/batsize.json")),
}).json()
print("direct solve:", {row[0]: round(row[1], 5) for row in solve["derived"]})

parsed = client.post("/v1/parse", json={
    "text": (ROOT / "fixtures/dsl/golden_pv_sizing.ecdsl").read_text(),
}).json()
print(f"parse: {parsed['name']} with {parsed['statements']} statements")
