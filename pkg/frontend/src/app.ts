/**
 * Studio shell: instruction box, clarification modal, plan panel, viewport.
 *
 * The client is a pure view over the HTTP API. Local state is the session id
 * and the last fetched payloads; nothing is mutated optimistically, and a
 * failed call only surfaces a banner.
 */

import { ApiError, SessionApi, waitForSettled } from "./api.js";
import { buildSessionView, parseAnswer, type SessionView } from "./model.js";
import { drawScene } from "./viewport.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const api = new SessionApi(window.location.origin);

let sessionId: string | null = null;
let polling = false;

function setBanner(text: string | null): void {
  const banner = el<HTMLDivElement>("banner");
  banner.textContent = text ?? "";
  banner.style.display = text ? "block" : "none";
}

el<HTMLDivElement>("banner").addEventListener("click", () => setBanner(null));

async function refresh(): Promise<SessionView | null> {
  if (!sessionId) return null;
  const [status, scene, plan, report] = await Promise.all([
    api.status(sessionId),
    api.scene(sessionId),
    api.plan(sessionId),
    api.report(sessionId),
  ]);
  const view = buildSessionView(status, scene, plan, report);
  render(view);
  drawScene(el<HTMLCanvasElement>("viewport"), scene);
  return view;
}

function render(view: SessionView): void {
  el<HTMLSpanElement>("session-id").textContent = view.sessionId;
  el<HTMLSpanElement>("run-state").textContent = view.state;
  el<HTMLSpanElement>("run-state").dataset.state = view.state;
  el<HTMLSpanElement>("instance-count").textContent = String(view.instanceCount);
  el<HTMLSpanElement>("terrain-flag").textContent = view.hasTerrain ? "terrain" : "no terrain";
  el<HTMLButtonElement>("send").disabled = view.busy;

  const list = el<HTMLUListElement>("plan-list");
  list.replaceChildren();
  for (const action of view.actions) {
    const item = document.createElement("li");
    const badge = document.createElement("span");
    badge.className = action.executed ? "badge ok" : "badge failed";
    badge.textContent = action.executed ? "executed" : "failed";
    item.append(badge, ` ${action.label}`);
    if (action.error) item.title = action.error;
    list.append(item);
  }
  el<HTMLSpanElement>("badge-summary").textContent =
    `${view.executedCount} executed / ${view.failedCount} failed`;

  const notes = el<HTMLUListElement>("assumptions");
  notes.replaceChildren(
    ...view.assumptions.map((a) => {
      const li = document.createElement("li");
      li.textContent = a;
      return li;
    }),
  );

  renderClarification(view);
  if (view.error) setBanner(view.error);
}

function renderClarification(view: SessionView): void {
  const modal = el<HTMLDivElement>("clarify-modal");
  if (!view.pendingQuestions) {
    modal.style.display = "none";
    return;
  }
  modal.style.display = "block";
  el<HTMLSpanElement>("clarify-plugin").textContent = view.pendingQuestions.plugin;
  const form = el<HTMLDivElement>("clarify-fields");
  if (form.childElementCount === 0) {
    for (const [i, name] of view.pendingQuestions.missing.entries()) {
      const label = document.createElement("label");
      label.textContent = view.pendingQuestions.questions[i] ?? name;
      const input = document.createElement("input");
      input.name = name;
      input.dataset.param = name;
      label.append(input);
      form.append(label);
    }
  }
}

async function submitClarification(): Promise<void> {
  if (!sessionId) return;
  const form = el<HTMLDivElement>("clarify-fields");
  const answers: Record<string, unknown> = {};
  form.querySelectorAll("input").forEach((input) => {
    answers[input.dataset.param ?? input.name] = parseAnswer(input.value);
  });
  try {
    await api.clarify(sessionId, answers);
    form.replaceChildren();
    el<HTMLDivElement>("clarify-modal").style.display = "none";
    void pollUntilSettled();
  } catch (e) {
    setBanner(e instanceof ApiError ? `clarify rejected: ${e.message}` : String(e));
  }
}

async function pollUntilSettled(): Promise<void> {
  if (!sessionId || polling) return;
  polling = true;
  try {
    for (;;) {
      const status = await api.status(sessionId);
      await refresh();
      if (status.state === "done" || status.state === "error" || status.state === "idle") break;
      if (status.state === "awaiting_clarification") break; // modal takes over
      await new Promise((r) => setTimeout(r, 400));
    }
  } finally {
    polling = false;
  }
}

async function sendInstruction(): Promise<void> {
  const input = el<HTMLInputElement>("instruction");
  const text = input.value.trim();
  if (!text) return;
  try {
    if (!sessionId) {
      sessionId = await api.createSession();
      const params = new URLSearchParams(window.location.search);
      params.set("session", sessionId);
      history.replaceState(null, "", `?${params}`);
    }
    await api.instruct(sessionId, text);
    input.value = "";
    void pollUntilSettled();
  } catch (e) {
    if (e instanceof ApiError && e.status === 409) {
      setBanner("session is busy; wait for the current run to settle");
    } else {
      setBanner(e instanceof ApiError ? e.message : String(e));
    }
  }
}

async function boot(): Promise<void> {
  const params = new URLSearchParams(window.location.search);
  const existing = params.get("session");
  if (existing) {
    try {
      await api.status(existing);
      sessionId = existing;
      await refresh();
      const status = await api.status(existing);
      if (status.state === "running" || status.state === "awaiting_clarification") {
        void pollUntilSettled();
      }
    } catch {
      setBanner(`session ${existing} not found on this server`);
    }
  }
  el<HTMLButtonElement>("send").addEventListener("click", () => void sendInstruction());
  el<HTMLInputElement>("instruction").addEventListener("keydown", (ev) => {
    if (ev.key === "Enter") void sendInstruction();
  });
  el<HTMLButtonElement>("clarify-send").addEventListener("click", () => void submitClarification());
}

void boot();

export { refresh, sendInstruction, submitClarification, waitForSettled };
