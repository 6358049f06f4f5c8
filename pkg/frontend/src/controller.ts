// Conversation controller: transcript state, the local validation gate,
// and the single-in-flight rule. All DOM-free so it can run under tests.

import { ApiClient } from "./api.js";
import { chartSpecFor } from "./chart.js";
import type { ChatTurn, MessageResponse, ParamFieldSpec } from "./types.js";
import { validateAnswer } from "./validation.js";

export class ChatController {
  turns: ChatTurn[] = [];
  sessionId: string | null = null;
  phase = "awaiting_query";
  kind: string | null = null;
  pendingQuestions: ParamFieldSpec[] = [];
  busy = false;

  constructor(private api: ApiClient) {}

  get activeQuestion(): ParamFieldSpec | null {
    return this.phase === "eliciting" && this.pendingQuestions.length > 0
      ? this.pendingQuestions[0]
      : null;
  }

  async start(): Promise<void> {
    this.sessionId = await this.api.createSession();
  }

  /** Send one user message. Returns the concierge turn, or null when the
   *  local validator refused the answer (nothing was sent). */
  async send(text: string): Promise<ChatTurn | null> {
    if (this.busy) {
      throw new Error("a message is already in flight for this session");
    }
    if (!this.sessionId) {
      throw new Error("session not started");
    }
    let outgoing = text;
    const question = this.activeQuestion;
    if (question) {
      const verdict = validateAnswer(question, text);
      if (!verdict.ok) {
        // blocked locally: record the exchange, never touch the network
        this.turns.push({ author: "user", text });
        const turn: ChatTurn = {
          author: "concierge",
          text: `That answer did not validate: ${verdict.message}\n` +
            `Please answer again: ${question.question ?? question.name}`,
        };
        this.turns.push(turn);
        return null;
      }
      outgoing = verdict.value;
    }
    this.turns.push({ author: "user", text });
    this.busy = true;
    try {
      const resp = await this.api.sendMessage(this.sessionId, outgoing);
      const turn = this.absorb(resp);
      this.turns.push(turn);
      return turn;
    } finally {
      this.busy = false;
    }
  }

  private absorb(resp: MessageResponse): ChatTurn {
    this.phase = resp.phase;
    this.pendingQuestions = resp.questions ?? [];
    if (this.kind === null && resp.questions && resp.questions.length > 0) {
      this.kind = guessKindFromQuestions(resp.questions);
    }
    const turn: ChatTurn = { author: "concierge", text: resp.reply };
    if (resp.questions) turn.questions = resp.questions;
    if (resp.solution) {
      turn.solution = resp.solution;
      turn.derived = resp.derived;
      const chart = chartSpecFor(this.kind, resp);
      if (chart) turn.chart = chart;
    }
    if (resp.failure) turn.failure = resp.failure;
    return turn;
  }

  /** Rebuild a transcript for a stored session id (replay). */
  async replay(sessionId: string): Promise<void> {
    const snap = await this.api.getSession(sessionId);
    this.sessionId = snap.id;
    this.phase = snap.phase;
    this.kind = snap.kind;
    this.turns = [];
    if (snap.result) {
      const pseudo: MessageResponse = {
        reply: snap.result.explanation,
        phase: snap.phase,
        solution: snap.result.solution,
        derived: snap.result.derived,
      };
      this.turns.push(this.absorb(pseudo));
    } else if (snap.failure) {
      this.turns.push({
        author: "concierge",
        text: snap.last_reply || `The conversation failed: ${snap.failure}`,
        failure: snap.failure,
      });
    } else if (snap.last_reply) {
      this.turns.push({ author: "concierge", text: snap.last_reply });
    }
  }

  traceSummary(snapTraces: { sample_index: number; debug_iterations: number; outcome: string }[]): string {
    const samples = snapTraces.length;
    const debugs = snapTraces.reduce((acc, t) => acc + t.debug_iterations, 0);
    return `${samples} candidate(s), ${debugs} debug iteration(s)`;
  }
}

function guessKindFromQuestions(questions: ParamFieldSpec[]): string | null {
  const names = new Set(questions.map((q) => q.name));
  if (names.has("charger_power_kw")) return "ev_charging";
  if (names.has("comfort_band")) return "hvac_setpoint";
  if (names.has("battery_capacity_kwh")) return "battery_dispatch";
  if (names.has("roof_area_sqft")) return "pv_sizing";
  if (names.has("hp_annual_consumption_kwh")) return "heat_pump";
  if (names.has("battery_unit_cost")) return "battery_sizing";
  return null;
}
