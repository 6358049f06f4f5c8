// DOM wiring: transcript list, question form with unit hints, charts,
// solution download. Send stays disabled while a request is in flight,
// mirroring the gateway's one-message-per-session rule.

import { ApiClient } from "./api.js";
import { renderChartSvg, formatNumber } from "./chart.js";
import { ChatController } from "./controller.js";
import type { ChatTurn } from "./types.js";

const api = new ApiClient("");
const controller = new ChatController(api);

const transcript = document.getElementById("transcript") as HTMLElement;
const form = document.getElementById("composer") as HTMLFormElement;
const input = document.getElementById("message") as HTMLInputElement;
const sendButton = document.getElementById("send") as HTMLButtonElement;
const hint = document.getElementById("hint") as HTMLElement;

function el(tag: string, className: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function renderTurn(turn: ChatTurn): void {
  const row = el("div", `turn turn-${turn.author}`);
  row.appendChild(el("div", "author", turn.author === "user" ? "you" : "concierge"));
  const body = el("div", "body");
  body.appendChild(el("p", "text", turn.text));

  if (turn.solution && turn.solution.status === "optimal") {
    const table = el("table", "solution-table") as HTMLTableElement;
    for (const [label, value, unit] of turn.derived ?? []) {
      const tr = table.insertRow();
      tr.insertCell().textContent = label;
      tr.insertCell().textContent = `${formatNumber(value)} ${unit}`;
    }
    body.appendChild(table);
    if (turn.chart) {
      const holder = el("div", "chart");
      holder.innerHTML = renderChartSvg(turn.chart);
      body.appendChild(holder);
    }
    const download = el("a", "download", "download solution JSON") as HTMLAnchorElement;
    download.href = URL.createObjectURL(
      new Blob([JSON.stringify(turn.solution, null, 2)], { type: "application/json" }),
    );
    download.download = "solution.json";
    body.appendChild(download);
  }
  if (turn.failure) {
    body.appendChild(el("div", "banner banner-failure", `No solution: ${turn.failure}`));
  }
  row.appendChild(body);
  transcript.appendChild(row);
  transcript.scrollTop = transcript.scrollHeight;
}

function refreshHint(): void {
  const q = controller.activeQuestion;
  if (!q) {
    hint.textContent = "";
    input.placeholder = "Ask about EV charging, HVAC, batteries, solar, heat pumps...";
    return;
  }
  const unit = q.unit ? ` [${q.unit}]` : "";
  const range =
    q.minimum !== null || q.maximum !== null
      ? ` (range ${q.min_exclusive ? "(" : "["}${q.minimum ?? "-inf"}, ${q.maximum ?? "inf"}${q.max_exclusive ? ")" : "]"})`
      : "";
  const choices = q.choices.length ? ` one of: ${q.choices.join(", ")}` : "";
  hint.textContent = `${q.name}${unit}${range}${choices}`;
  input.placeholder = q.question ?? q.name;
}

async function submit(event: Event): Promise<void> {
  event.preventDefault();
  const text = input.value.trim();
  if (!text || controller.busy) return;
  input.value = "";
  sendButton.disabled = true;
  const before = controller.turns.length;
  try {
    await controller.send(text);
  } catch (err) {
    controller.turns.push({ author: "concierge", text: `Request failed: ${String(err)}` });
  } finally {
    sendButton.disabled = false;
  }
  for (const turn of controller.turns.slice(before)) renderTurn(turn);
  refreshHint();
  input.focus();
}

async function boot(): Promise<void> {
  const stored = new URLSearchParams(window.location.search).get("session");
  if (stored) {
    await controller.replay(stored);
    for (const turn of controller.turns) renderTurn(turn);
  } else {
    await controller.start();
    renderTurn({
      author: "concierge",
      text:
        "Hi! I can optimize EV charging schedules, HVAC setpoints, home battery " +
        "dispatch, rooftop PV sizing, heat-pump savings and battery sizing. " +
        "What would you like to work out?",
    });
  }
  refreshHint();
  form.addEventListener("submit", submit);
}

boot().catch((err) => {
  transcript.appendChild(el("div", "banner banner-failure", `Could not start: ${String(err)}`));
});
