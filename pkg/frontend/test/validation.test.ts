import assert from "node:assert/strict";
import { test } from "node:test";

import { parseInterval, validateAnswer } from "../src/validation.js";
import type { ParamFieldSpec } from "../src/types.js";

function field(partial: Partial<ParamFieldSpec>): ParamFieldSpec {
  return {
    name: "f",
    question: "?",
    type: "real",
    unit: "",
    minimum: null,
    maximum: null,
    min_exclusive: false,
    max_exclusive: false,
    choices: [],
    default: null,
    vector_length: null,
    ...partial,
  };
}

test("efficiency above an exclusive-bounded range is blocked with the range text", () => {
  const f = field({ name: "battery_efficiency", minimum: 0, maximum: 1, min_exclusive: true });
  const verdict = validateAnswer(f, "efficiency = 1.3");
  assert.equal(verdict.ok, false);
  if (!verdict.ok) {
    assert.match(verdict.message, /\(0, 1\]/);
  }
  const good = validateAnswer(f, "0.95");
  assert.deepEqual(good, { ok: true, value: "0.95" });
});

test("numbers accept currency and name= prefixes", () => {
  const f = field({ minimum: 0 });
  assert.deepEqual(validateAnswer(f, "$1,500"), { ok: true, value: "1500" });
  assert.deepEqual(validateAnswer(f, "rate = 0.25"), { ok: true, value: "0.25" });
  assert.equal(validateAnswer(f, "a lot").ok, false);
});

test("integer fields reject fractions", () => {
  const f = field({ type: "integer" });
  assert.equal(validateAnswer(f, "2.5").ok, false);
  assert.equal(validateAnswer(f, "3").ok, true);
});

test("intervals parse several spellings", () => {
  assert.deepEqual(parseInterval("65-75"), [65, 75]);
  assert.deepEqual(parseInterval("65 to 75"), [65, 75]);
  assert.deepEqual(parseInterval("(18, 6)"), [18, 6]);
  assert.equal(parseInterval("whenever"), null);
  const f = field({ type: "interval" });
  assert.equal(validateAnswer(f, "65-75").ok, true);
  assert.equal(validateAnswer(f, "banana").ok, false);
});

test("vectors check element ranges and declared length", () => {
  const f = field({ type: "vector", minimum: 0, vector_length: 3 });
  assert.equal(validateAnswer(f, "0.1, 0.2, 0.3").ok, true);
  assert.equal(validateAnswer(f, "0.1, -0.2, 0.3").ok, false);
  assert.equal(validateAnswer(f, "0.1, 0.2").ok, false);
});

test("enums match by substring, case-insensitive", () => {
  const f = field({ type: "enum", choices: ["home", "work", "public"] });
  assert.deepEqual(validateAnswer(f, "At Home mostly"), { ok: true, value: "home" });
  assert.equal(validateAnswer(f, "in my car").ok, false);
});

test("'default' passes only when the schema carries a default", () => {
  const with_default = field({ type: "vector", default: "default" });
  assert.deepEqual(validateAnswer(with_default, "default"), { ok: true, value: "default" });
  const without = field({ type: "vector" });
  assert.equal(validateAnswer(without, "default").ok, false);
});

test("empty answers are blocked", () => {
  assert.equal(validateAnswer(field({}), "   ").ok, false);
});
