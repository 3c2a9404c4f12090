// Dashboard view state: everything derives from control-API responses.
//
// The store holds no authoritative data. A page refresh rebuilds the
// identical view from GET /state, /timeline and /turns; the event stream
// only keeps it current. Pending edits are optimistic rows keyed by the
// server's edit id and flip to applied when a turn event lists them.

import type { ControlApi } from "./api.js";
import type {
  AuditReport,
  ConnectionState,
  EditAck,
  EpistemicState,
  TimelinePayload,
  TurnEvent,
} from "./types.js";

export interface PendingEdit {
  editId: number;
  kind: string;
  summary: string;
  applyAtTurn: number | null;
  status: "pending" | "applied";
}

export interface DashboardViewState {
  epistemic: EpistemicState | null;
  timeline: TimelinePayload | null;
  feed: TurnEvent[];
  pendingEdits: PendingEdit[];
  audit: AuditReport | null;
  connection: ConnectionState;
  lastTurn: number;
  notice: string | null;
}

type Listener = (state: DashboardViewState) => void;

export class DashboardStore {
  private view: DashboardViewState = {
    epistemic: null,
    timeline: null,
    feed: [],
    pendingEdits: [],
    audit: null,
    connection: "connecting",
    lastTurn: 0,
    notice: null,
  };
  private listeners: Listener[] = [];

  constructor(private api: ControlApi) {}

  get state(): DashboardViewState {
    return this.view;
  }

  subscribe(fn: Listener): () => void {
    this.listeners.push(fn);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== fn);
    };
  }

  private emit(): void {
    for (const fn of this.listeners) fn(this.view);
  }

  private patch(partial: Partial<DashboardViewState>): void {
    this.view = { ...this.view, ...partial };
    this.emit();
  }

  /** Full rebuild from the API; safe to call any time (page load, reconnect). */
  async refresh(): Promise<void> {
    const [epistemic, timeline, turns] = await Promise.all([
      this.api.state(),
      this.api.timeline(),
      this.api.turns(0),
    ]);
    const lastTurn = turns.length ? turns[turns.length - 1]!.turn_index : 0;
    this.patch({ epistemic, timeline, feed: turns, lastTurn });
  }

  async refreshAudit(): Promise<void> {
    this.patch({ audit: await this.api.audit() });
  }

  /** Exactly-once, in-order feed; gaps are healed via GET /turns. */
  async applyTurnEvent(event: TurnEvent): Promise<void> {
    if (event.turn_index <= this.view.lastTurn) {
      return; // duplicate delivery
    }
    if (event.turn_index > this.view.lastTurn + 1) {
      await this.backfill();
    }
    if (event.turn_index === this.view.lastTurn + 1) {
      this.patch({
        feed: [...this.view.feed, event],
        lastTurn: event.turn_index,
      });
    }
    this.markApplied(event.applied_edits ?? []);
    // the turn may have changed facts, hypotheses or the timeline
    const [epistemic, timeline] = await Promise.all([
      this.api.state(),
      this.api.timeline(),
    ]);
    this.patch({ epistemic, timeline });
  }

  /** Fetch turns missed while disconnected and splice them into the feed. */
  async backfill(): Promise<void> {
    const rows = await this.api.turns(this.view.lastTurn);
    if (!rows.length) return;
    const feed = [...this.view.feed];
    let last = this.view.lastTurn;
    for (const row of rows) {
      if (row.turn_index === last + 1) {
        feed.push(row);
        last = row.turn_index;
      }
    }
    this.patch({ feed, lastTurn: last });
  }

  setConnection(connection: ConnectionState): void {
    if (connection === "live" && this.view.connection === "reconnecting") {
      void this.backfill();
    }
    this.patch({ connection });
  }

  addPendingEdit(ack: EditAck, kind: string, summary: string): void {
    const entry: PendingEdit = {
      editId: ack.edit_id,
      kind,
      summary,
      applyAtTurn: ack.apply_at_turn,
      status: ack.status === "applied" ? "applied" : "pending",
    };
    this.patch({ pendingEdits: [...this.view.pendingEdits, entry] });
  }

  private markApplied(editIds: number[]): void {
    if (!editIds.length) return;
    const ids = new Set(editIds);
    this.patch({
      pendingEdits: this.view.pendingEdits.map((e) =>
        ids.has(e.editId) ? { ...e, status: "applied" } : e,
      ),
    });
  }

  setNotice(notice: string | null): void {
    this.patch({ notice });
  }

  /** Warn before destructive steering: deleting the item currently learning. */
  deletionWarning(itemId: number): string | null {
    const active = this.view.epistemic?.active_item;
    if (active && active.item_id === itemId) {
      return "this is the active learning item: the next turn will pick a new one";
    }
    return null;
  }
}
