import assert from "node:assert/strict";
import { test } from "node:test";

import { chartSpecFor, renderChartSvg } from "../src/chart.js";
import type { MessageResponse } from "../src/types.js";

function evResponse(): MessageResponse {
  const schedule = [0, 0, 0, 0, 8.75, 8.75, 8.75, 8.75, 8.75, 8.75, 8.75, 8.75];
  return {
    reply: "done",
    phase: "done",
    solution: {
      status: "optimal",
      objective: 4.2,
      metadata: {},
      assignment: schedule.map((v, i) => ({ var: "x", index: i, value: v })),
    },
    derived: [["total_charging_cost", 4.2, "USD"]],
  };
}

test("EV solutions chart as a bar schedule with the API values verbatim", () => {
  const spec = chartSpecFor("ev_charging", evResponse());
  assert.ok(spec);
  assert.equal(spec.kind, "bar-schedule");
  assert.equal(spec.unit, "kW");
  // no arithmetic on solution values: the series IS the assignment
  assert.deepEqual(spec.values.slice(0, 4), [0, 0, 0, 0]);
  assert.deepEqual(spec.values, evResponse().solution!.assignment!.map((e) => e.value));
});

test("the SVG marks zero-height bars for the peak hours", () => {
  const spec = chartSpecFor("ev_charging", evResponse())!;
  const svg = renderChartSvg(spec);
  const zeroBars = [...svg.matchAll(/data-value="0"/g)];
  assert.equal(zeroBars.length, 4);
  assert.match(svg, /<svg /);
});

test("sizing solutions chart as a single headline value", () => {
  const resp: MessageResponse = {
    reply: "done",
    phase: "done",
    solution: {
      status: "optimal",
      objective: 2898.5,
      metadata: {},
      assignment: [{ var: "bsize", index: null, value: 8.66875 }],
    },
    derived: [
      ["battery_size", 8.66875, "kWh"],
      ["daily_grid_purchase", 11.76469, "kWh"],
    ],
  };
  const spec = chartSpecFor("battery_sizing", resp);
  assert.ok(spec);
  assert.equal(spec.kind, "single-value");
  assert.deepEqual(spec.values, [8.66875]);
  const svg = renderChartSvg(spec);
  assert.match(svg, /8\.66875 kWh/);
});

test("non-optimal solutions produce no chart", () => {
  const resp: MessageResponse = {
    reply: "no",
    phase: "done",
    solution: { status: "infeasible", objective: null, metadata: {}, assignment: null },
  };
  assert.equal(chartSpecFor("ev_charging", resp), null);
});
