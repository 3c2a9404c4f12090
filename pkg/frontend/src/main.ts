// DOM shell: renders the store into the page and wires the forms.
// All behavior lives in the store/api modules; this file only reflects
// state into HTML and forwards user input.

import { ApiError, ControlApi } from "./api.js";
import { buildFeedCard, escapeHtml, renderFeedCard } from "./feed.js";
import { DashboardStore, type DashboardViewState } from "./state.js";
import { renderTimeline } from "./timeline.js";
import type { EditKind } from "./types.js";

const api = new ControlApi(window.location.origin);
const store = new DashboardStore(api);

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

function renderLists(view: DashboardViewState): void {
  const s = view.epistemic;
  if (!s) return;
  el("facts").innerHTML = s.facts.map((f) => `<li>${escapeHtml(f)}</li>`).join("");
  el("guesses").innerHTML = s.guesses.map((g) => `<li>${escapeHtml(g)}</li>`).join("");
  el("figured").innerHTML = s.figured_out.map((k) => `<li>${escapeHtml(k)}</li>`).join("");
  const item = s.active_item;
  el("active-item").textContent = item
    ? `${item.item_name} [${item.state}, threshold ${item.threshold}]`
    : "curriculum complete";
  el("sense").textContent =
    s.sense_score === null ? "no evaluation yet" : `${s.sense_score}/10 - ${s.sense_reasoning ?? ""}`;
}

function renderPending(view: DashboardViewState): void {
  el("pending").innerHTML = view.pendingEdits
    .map(
      (e) =>
        `<li class="${e.status}">#${e.editId} ${escapeHtml(e.kind)}: ${escapeHtml(e.summary)} ` +
        `<em>${e.status}${e.status === "pending" && e.applyAtTurn ? ` (applies at turn ${e.applyAtTurn})` : ""}</em></li>`,
    )
    .join("");
}

function renderAuditOverlay(view: DashboardViewState): void {
  if (!view.audit) return;
  const tagByText = new Map(view.audit.tags.filter((t) => t.is_fact).map((t) => [t.text, t]));
  const items = el("facts").querySelectorAll("li");
  items.forEach((li) => {
    const tag = tagByText.get(li.textContent ?? "");
    if (tag) li.classList.add(`truth-${tag.truth_status}`);
  });
  el("audit-summary").textContent =
    view.audit.cascade_detected === null
      ? "audit: indeterminate (no ground truth)"
      : view.audit.cascade_detected
        ? `audit: CASCADE DETECTED (${view.audit.contaminated_facts_promoted} contaminated facts)`
        : "audit: clean";
}

function render(view: DashboardViewState): void {
  el("connection").textContent = view.connection;
  el("connection").className = `conn-${view.connection}`;
  el("notice").textContent = view.notice ?? "";
  renderLists(view);
  renderPending(view);
  if (view.timeline) {
    el("timeline").innerHTML = renderTimeline(view.timeline);
  }
  el("feed").innerHTML = view.feed
    .slice(-50)
    .map((ev) => renderFeedCard(buildFeedCard(ev)))
    .reverse()
    .join("");
  renderAuditOverlay(view);
}

async function submit(kind: EditKind, payload: Record<string, unknown>, summary: string): Promise<void> {
  try {
    const ack = await api.submitEdit(kind, payload);
    store.addPendingEdit(ack, kind, summary);
    store.setNotice(null);
  } catch (err) {
    store.setNotice(err instanceof ApiError ? `edit rejected: ${err.message}` : String(err));
  }
}

function wireForms(): void {
  el<HTMLFormElement>("fact-form").addEventListener("submit", (ev) => {
    ev.preventDefault();
    const input = el<HTMLInputElement>("fact-text");
    const text = input.value.trim();
    if (!text) return; // client-side validation: non-empty text
    void submit("insert_fact", { text }, text);
    input.value = "";
  });

  el<HTMLFormElement>("threshold-form").addEventListener("submit", (ev) => {
    ev.preventDefault();
    const itemId = Number(el<HTMLInputElement>("threshold-item").value);
    const threshold = Number(el<HTMLInputElement>("threshold-value").value);
    if (!Number.isInteger(itemId) || itemId < 1) return;
    void submit("set_threshold", { item_id: itemId, threshold }, `item ${itemId} -> ${threshold}`);
  });

  el<HTMLFormElement>("delete-form").addEventListener("submit", (ev) => {
    ev.preventDefault();
    const itemId = Number(el<HTMLInputElement>("delete-item").value);
    if (!Number.isInteger(itemId) || itemId < 1) return;
    const warning = store.deletionWarning(itemId);
    if (warning && !window.confirm(warning)) return;
    void submit("delete_item", { item_id: itemId }, `delete item ${itemId}`);
  });

  el<HTMLFormElement>("reorder-form").addEventListener("submit", (ev) => {
    ev.preventDefault();
    const raw = el<HTMLInputElement>("reorder-ids").value;
    const ids = raw
      .split(",")
      .map((s) => Number(s.trim()))
      .filter((n) => Number.isInteger(n) && n > 0);
    if (!ids.length) return;
    void submit("reorder_items", { item_ids: ids }, `order: ${ids.join(", ")}`);
  });

  for (const action of ["pause", "resume", "stop"] as const) {
    el(`btn-${action}`).addEventListener("click", () => {
      void api.runControl(action).catch((err) => store.setNotice(String(err)));
    });
  }
  el("btn-audit").addEventListener("click", () => {
    void store.refreshAudit().catch((err) => store.setNotice(String(err)));
  });
}

async function start(): Promise<void> {
  store.subscribe(render);
  wireForms();
  await store.refresh();
  // events apply strictly in arrival order
  let chain: Promise<void> = Promise.resolve();
  const feed = api.events({
    onEvent: (event) => {
      chain = chain.then(() => store.applyTurnEvent(event));
    },
    onState: (state) => store.setConnection(state),
  });
  void feed.run();
}

void start();
