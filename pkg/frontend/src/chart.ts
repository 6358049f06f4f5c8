// Chart construction from solution payloads. Values are copied verbatim
// from the API; the only arithmetic here is pixel scaling for display.

import type { ChartSpec, MessageResponse, SolutionPayload } from "./types.js";

const SCHEDULE_UNITS: Record<string, string> = {
  ev_charging: "kW",
  battery_dispatch: "kW",
};

/** Pick the chart for a finished conversation: a bar schedule when the
 *  solution carries a time-indexed vector, a single headline number for
 *  the sizing problems, nothing when there is no optimal solution. */
export function chartSpecFor(kind: string | null, response: MessageResponse): ChartSpec | null {
  const solution = response.solution;
  if (!solution || solution.status !== "optimal" || !solution.assignment) {
    return null;
  }
  const schedule = scheduleSeries(solution);
  if (schedule && schedule.values.length >= 2) {
    return {
      kind: "bar-schedule",
      label: schedule.label,
      values: schedule.values,
      unit: SCHEDULE_UNITS[kind ?? ""] ?? "",
    };
  }
  const headline = headlineRow(response);
  if (headline) {
    return { kind: "single-value", label: headline[0], values: [headline[1]], unit: headline[2] };
  }
  return null;
}

function scheduleSeries(solution: SolutionPayload): { label: string; values: number[] } | null {
  const byVar = new Map<string, { index: number; value: number }[]>();
  for (const entry of solution.assignment ?? []) {
    if (entry.index === null) continue;
    const rows = byVar.get(entry.var) ?? [];
    rows.push({ index: entry.index, value: entry.value });
    byVar.set(entry.var, rows);
  }
  // prefer the conventional schedule variable name, then any vector
  const names = [...byVar.keys()].sort((a, b) => (a === "x" ? -1 : b === "x" ? 1 : a.localeCompare(b)));
  for (const name of names) {
    const rows = byVar.get(name)!;
    if (rows.length >= 2) {
      rows.sort((a, b) => a.index - b.index);
      return { label: name, values: rows.map((r) => r.value) };
    }
  }
  return null;
}

const HEADLINE_LABELS = ["battery_size", "panel_area", "annual_savings", "optimal_temperature"];

function headlineRow(response: MessageResponse): [string, number, string] | null {
  for (const label of HEADLINE_LABELS) {
    const row = (response.derived ?? []).find((r) => r[0] === label);
    if (row) return row;
  }
  const first = (response.derived ?? [])[0];
  return first ?? null;
}

/** Render a ChartSpec as a standalone SVG string (no DOM required). */
export function renderChartSvg(spec: ChartSpec, width = 520, height = 160): string {
  if (spec.kind === "single-value") {
    const value = spec.values[0];
    return (
      `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="80" role="img">` +
      `<text x="12" y="34" class="headline-value" font-size="28">${formatNumber(value)} ${spec.unit}</text>` +
      `<text x="12" y="60" class="headline-label" font-size="13">${escapeXml(spec.label)}</text>` +
      `</svg>`
    );
  }
  const n = spec.values.length;
  const maxAbs = Math.max(...spec.values.map((v) => Math.abs(v)), 1e-9);
  const pad = 4;
  const barW = (width - pad * (n + 1)) / n;
  const zeroY = height / 2;
  const bars = spec.values
    .map((v, i) => {
      const h = (Math.abs(v) / maxAbs) * (height / 2 - 14);
      const x = pad + i * (barW + pad);
      const y = v >= 0 ? zeroY - h : zeroY;
      const cls = v >= 0 ? "bar bar-pos" : "bar bar-neg";
      return (
        `<rect class="${cls}" data-index="${i}" data-value="${v}" ` +
        `x="${x.toFixed(1)}" y="${y.toFixed(1)}" width="${barW.toFixed(1)}" height="${Math.max(h, 0.5).toFixed(1)}">` +
        `<title>t=${i}: ${formatNumber(v)} ${spec.unit}</title></rect>`
      );
    })
    .join("");
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" role="img">` +
    `<line x1="0" y1="${zeroY}" x2="${width}" y2="${zeroY}" class="axis" stroke="#888"/>` +
    bars +
    `</svg>`
  );
}

export function formatNumber(v: number): string {
  // display formatting only; the underlying values stay untouched
  const rounded = Math.round(v * 1e6) / 1e6;
  return String(rounded);
}

function escapeXml(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}
