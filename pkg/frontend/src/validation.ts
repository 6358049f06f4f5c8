// Client-side answer validation mirroring the engine's parameter schemas.
// The engine validates again server-side; this layer exists so an answer
// that cannot possibly pass never reaches the network.

import type { ParamFieldSpec } from "./types.js";

export type ValidationResult =
  | { ok: true; value: string }
  | { ok: false; message: string };

function rangeText(f: ParamFieldSpec): string {
  const left = f.min_exclusive ? "(" : "[";
  const right = f.max_exclusive ? ")" : "]";
  const lo = f.minimum === null ? "-inf" : String(f.minimum);
  const hi = f.maximum === null ? "inf" : String(f.maximum);
  return `${left}${lo}, ${hi}${right}`;
}

function checkRange(f: ParamFieldSpec, x: number): string | null {
  if (f.minimum !== null && (x < f.minimum || (f.min_exclusive && x === f.minimum))) {
    return `${f.name}: ${x} outside allowed range ${rangeText(f)}`;
  }
  if (f.maximum !== null && (x > f.maximum || (f.max_exclusive && x === f.maximum))) {
    return `${f.name}: ${x} outside allowed range ${rangeText(f)}`;
  }
  return null;
}

function parseNumberToken(raw: string): number | null {
  const cleaned = raw.replace(/[$,]/g, "").trim();
  if (!cleaned || !/^[-+]?(\d+(\.\d*)?|\.\d+)([eE][-+]?\d+)?$/.test(cleaned)) {
    return null;
  }
  return Number(cleaned);
}

/** Validate one free-text answer against its schema field.
 *  Returns the text to send (possibly normalized) or a local error that
 *  must block the network call. */
export function validateAnswer(f: ParamFieldSpec, text: string): ValidationResult {
  const raw = text.trim();
  if (!raw) {
    return { ok: false, message: `${f.name}: an answer is required` };
  }
  if (raw.toLowerCase() === "default") {
    if (f.default === null || f.default === undefined) {
      return { ok: false, message: `${f.name}: no default is available` };
    }
    return { ok: true, value: "default" };
  }
  switch (f.type) {
    case "real":
    case "integer": {
      const body = raw.includes("=") ? raw.split("=").slice(1).join("=").trim() : raw;
      const num = parseNumberToken(body);
      if (num === null) {
        return { ok: false, message: `${f.name}: could not read a number from "${raw}"` };
      }
      if (f.type === "integer" && !Number.isInteger(num)) {
        return { ok: false, message: `${f.name}: expected a whole number` };
      }
      const err = checkRange(f, num);
      return err ? { ok: false, message: err } : { ok: true, value: String(num) };
    }
    case "interval": {
      const pair = parseInterval(raw);
      if (!pair) {
        return { ok: false, message: `${f.name}: expected an interval like "65-75"` };
      }
      return { ok: true, value: raw };
    }
    case "vector": {
      const cleaned = raw.replace(/^[\[\(\s]+|[\]\)\s]+$/g, "");
      const tokens = cleaned.split(/[;,]/).map((t) => t.trim()).filter((t) => t.length > 0);
      const values: number[] = [];
      for (const tok of tokens) {
        const num = parseNumberToken(tok);
        if (num === null) {
          return { ok: false, message: `${f.name}: expected comma-separated numbers` };
        }
        values.push(num);
      }
      if (values.length === 0) {
        return { ok: false, message: `${f.name}: expected comma-separated numbers` };
      }
      for (const v of values) {
        const err = checkRange(f, v);
        if (err) return { ok: false, message: err };
      }
      if (f.vector_length !== null && values.length !== f.vector_length) {
        return { ok: false, message: `${f.name}: expected ${f.vector_length} values, got ${values.length}` };
      }
      return { ok: true, value: values.join(", ") };
    }
    case "enum": {
      const low = raw.toLowerCase();
      for (const choice of f.choices) {
        if (low.includes(choice)) return { ok: true, value: choice };
      }
      return { ok: false, message: `${f.name}: expected one of ${f.choices.join(", ")}` };
    }
    default:
      return { ok: true, value: raw };
  }
}

export function parseInterval(raw: string): [number, number] | null {
  const cleaned = raw.replace(/^[\[\(\s]+|[\]\)\s]+$/g, "");
  for (const sep of [" to ", "..", ",", "-"]) {
    const at = cleaned.indexOf(sep);
    if (at > 0) {
      const a = parseNumberToken(cleaned.slice(0, at));
      const b = parseNumberToken(cleaned.slice(at + sep.length));
      if (a !== null && b !== null) return [a, b];
    }
  }
  return null;
}
