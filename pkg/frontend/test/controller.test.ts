import assert from "node:assert/strict";
import { test } from "node:test";

import { ApiClient } from "../src/api.js";
import { ChatController } from "../src/controller.js";
import type { ParamFieldSpec } from "../src/types.js";

function efficiencyQuestion(): ParamFieldSpec {
  return {
    name: "battery_efficiency",
    question: "What is the battery efficiency (a value in (0, 1])?",
    type: "real",
    unit: "",
    minimum: 0,
    maximum: 1,
    min_exclusive: true,
    max_exclusive: false,
    choices: [],
    default: null,
    vector_length: null,
  };
}

function stubbedController(responses: Record<string, unknown>) {
  let fetchCount = 0;
  const fetchFn = async (input: string, init?: RequestInit) => {
    fetchCount += 1;
    const key = `${init?.method ?? "GET"} ${input}`;
    const body = responses[key];
    if (body === undefined) {
      return new Response(JSON.stringify({ error: { code: "UnknownRoute", message: key } }), { status: 404 });
    }
    return new Response(JSON.stringify(body), { status: 200 });
  };
  const controller = new ChatController(new ApiClient("", fetchFn));
  return { controller, count: () => fetchCount };
}

test("answers failing local validation never reach the network", async () => {
  const { controller, count } = stubbedController({
    "POST /v1/sessions": { session_id: "s1" },
    "POST /v1/sessions/s1/messages": {
      reply: "Next",
      phase: "eliciting",
      questions: [efficiencyQuestion()],
    },
  });
  await controller.start();
  await controller.send("size my battery");
  const callsBefore = count();
  const turn = await controller.send("efficiency = 1.3");
  assert.equal(turn, null); // blocked locally
  assert.equal(count(), callsBefore); // zero network activity
  const lastTurn = controller.turns[controller.turns.length - 1];
  assert.match(lastTurn.text, /did not validate/);
  assert.match(lastTurn.text, /\(0, 1\]/);
});

test("valid answers are normalized and sent", async () => {
  const seen: string[] = [];
  const fetchFn = async (input: string, init?: RequestInit) => {
    if (init?.body) seen.push(JSON.parse(String(init.body)).text);
    if (input.endsWith("/v1/sessions")) {
      return new Response(JSON.stringify({ session_id: "s1" }), { status: 200 });
    }
    return new Response(
      JSON.stringify({ reply: "ok", phase: "eliciting", questions: [efficiencyQuestion()] }),
      { status: 200 },
    );
  };
  const controller = new ChatController(new ApiClient("", fetchFn));
  await controller.start();
  await controller.send("size my battery");
  await controller.send("efficiency = 0.95");
  assert.deepEqual(seen, ["size my battery", "0.95"]);
});

test("a second in-flight send is refused client-side", async () => {
  let release: (() => void) | null = null;
  const gate = new Promise<void>((resolve) => (release = resolve));
  const fetchFn = async (input: string) => {
    if (input.endsWith("/v1/sessions")) {
      return new Response(JSON.stringify({ session_id: "s1" }), { status: 200 });
    }
    await gate;
    return new Response(JSON.stringify({ reply: "ok", phase: "non_optimization" }), { status: 200 });
  };
  const controller = new ChatController(new ApiClient("", fetchFn));
  await controller.start();
  const first = controller.send("hello");
  await assert.rejects(() => controller.send("again"), /already in flight/);
  release!();
  await first;
});

test("API errors surface with their machine code", async () => {
  const fetchFn = async (input: string) => {
    if (input.endsWith("/v1/sessions")) {
      return new Response(JSON.stringify({ session_id: "s1" }), { status: 200 });
    }
    return new Response(
      JSON.stringify({ error: { code: "SessionBusy", message: "busy" } }),
      { status: 409 },
    );
  };
  const controller = new ChatController(new ApiClient("", fetchFn));
  await controller.start();
  await assert.rejects(() => controller.send("hi"), (err: any) => err.code === "SessionBusy");
});
