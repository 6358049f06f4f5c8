// Full EV conversation against a live gateway running the scripted
// adapter: query, five answers, solution with a peak-hour-empty chart.
// A range-violating answer is also sent mid-conversation to prove the
// client blocks it without any network traffic.

import assert from "node:assert/strict";
import { spawn, type ChildProcess } from "node:child_process";
import { after, before, test } from "node:test";
import { fileURLToPath } from "node:url";
import { dirname, join } from "node:path";

import { ApiClient } from "../src/api.js";
import { ChatController } from "../src/controller.js";

const here = dirname(fileURLToPath(import.meta.url));

const PORT = 8934;
const BASE = `http://127.0.0.1:${PORT}`;

let server: ChildProcess | null = null;
let fetchCount = 0;

const countingFetch = async (input: string, init?: RequestInit) => {
  fetchCount += 1;
  return fetch(input, init);
};

before(async () => {
  // dist/test/integration.test.js -> frontend/test/gateway_server.py
  const script = join(here, "..", "..", "test", "gateway_server.py");
  server = spawn("python3", [script, String(PORT)], { stdio: "ignore" });
  const deadline = Date.now() + 30_000;
  for (;;) {
    try {
      const r = await fetch(`${BASE}/v1/healthz`);
      if (r.ok) break;
    } catch {
      // not up yet
    }
    if (Date.now() > deadline) throw new Error("gateway did not come up");
    await new Promise((resolve) => setTimeout(resolve, 200));
  }
});

after(() => {
  server?.kill();
});

test("full EV conversation completes with zeros on the peak hours", async () => {
  const api = new ApiClient(BASE, countingFetch);
  const controller = new ChatController(api);
  await controller.start();

  let turn = await controller.send("I need help optimizing my EV charging schedule to minimize costs");
  assert.ok(turn);
  assert.equal(controller.phase, "eliciting");
  assert.equal(controller.pendingQuestions.length, 5);

  // a locally-invalid answer must not produce network traffic
  const callsBefore = fetchCount;
  const blocked = await controller.send("minus five kilowatts");
  assert.equal(blocked, null);
  assert.equal(fetchCount, callsBefore);

  for (const answer of ["15", "70", "home", "18-6", "default"]) {
    turn = await controller.send(answer);
    assert.ok(turn);
  }
  assert.equal(controller.phase, "done");
  assert.ok(turn!.solution);
  assert.equal(turn!.solution!.status, "optimal");
  assert.ok(Math.abs((turn!.solution!.objective ?? 0) - 4.2) < 1e-6);

  // the rendered chart is a 12-bar schedule with the four peak slots at zero
  assert.ok(turn!.chart);
  assert.equal(turn!.chart!.kind, "bar-schedule");
  assert.equal(turn!.chart!.values.length, 12);
  for (const v of turn!.chart!.values.slice(0, 4)) {
    assert.ok(Math.abs(v) < 1e-9);
  }

  // replay: a fresh controller reconstructs the result from the stored session
  const replayer = new ChatController(new ApiClient(BASE));
  await replayer.replay(controller.sessionId!);
  assert.equal(replayer.phase, "done");
  assert.ok(replayer.turns[0].solution);
});
