import { describe, expect, it } from "vitest";

import type { ControlApi } from "../src/api.js";
import { DashboardStore } from "../src/state.js";
import type { EpistemicState, TimelinePayload, TurnEvent } from "../src/types.js";

function epistemic(facts: string[]): EpistemicState {
  return {
    turn_index: 0,
    facts,
    guesses: [],
    figured_out: [],
    active_item: null,
    sense_score: null,
    sense_reasoning: null,
  };
}

function turnEvent(turn: number, applied: number[] = []): TurnEvent {
  return {
    turn_index: turn,
    action_id: "ACTION1",
    decision_type: "GUESS",
    diff_summary: "1 moved",
    sense_score: 3,
    sense_reasoning: "r",
    score: 0,
    status: "NOT_FINISHED",
    active_item_id: 1,
    prompt_hash: `hash-${turn}`,
    applied_edits: applied,
  };
}

class FakeApi {
  facts: string[] = ["seed-a", "seed-b"];
  turnsLog: TurnEvent[] = [];
  timelinePayload: TimelinePayload = { threshold: 8, items: {}, points: [] };
  turnsCalls: number[] = [];

  async state(): Promise<EpistemicState> {
    return epistemic([...this.facts]);
  }

  async timeline(): Promise<TimelinePayload> {
    return this.timelinePayload;
  }

  async turns(since: number): Promise<TurnEvent[]> {
    this.turnsCalls.push(since);
    return this.turnsLog.filter((t) => t.turn_index > since);
  }

  async audit(): Promise<never> {
    throw new Error("not in this test");
  }
}

const asApi = (fake: FakeApi) => fake as unknown as ControlApi;

describe("pending edit lifecycle", () => {
  it("shows pending until a turn event lists the edit as applied", async () => {
    const fake = new FakeApi();
    const store = new DashboardStore(asApi(fake));
    await store.refresh();

    store.addPendingEdit({ edit_id: 7, apply_at_turn: 1, status: "pending" },
                         "insert_fact", "doors need keys");
    expect(store.state.pendingEdits[0]).toMatchObject({ editId: 7, status: "pending", applyAtTurn: 1 });

    fake.facts.push("doors need keys");
    fake.turnsLog.push(turnEvent(1, [7]));
    await store.applyTurnEvent(turnEvent(1, [7]));

    expect(store.state.pendingEdits[0]!.status).toBe("applied");
    expect(store.state.epistemic!.facts).toContain("doors need keys");
    expect(store.state.lastTurn).toBe(1);
  });

  it("applies immediately when no live run is attached", async () => {
    const store = new DashboardStore(asApi(new FakeApi()));
    store.addPendingEdit({ edit_id: 3, apply_at_turn: null, status: "applied" },
                         "insert_fact", "offline");
    expect(store.state.pendingEdits[0]!.status).toBe("applied");
  });
});

describe("feed ordering and backfill", () => {
  it("keeps exactly one card per turn, in order", async () => {
    const fake = new FakeApi();
    const store = new DashboardStore(asApi(fake));
    await store.refresh();
    for (let t = 1; t <= 5; t++) {
      fake.turnsLog.push(turnEvent(t));
      await store.applyTurnEvent(turnEvent(t));
    }
    expect(store.state.feed.map((e) => e.turn_index)).toEqual([1, 2, 3, 4, 5]);
    // duplicate delivery is ignored
    await store.applyTurnEvent(turnEvent(3));
    expect(store.state.feed).toHaveLength(5);
  });

  it("backfills missed turns through GET /turns?since=", async () => {
    const fake = new FakeApi();
    const store = new DashboardStore(asApi(fake));
    await store.refresh();
    fake.turnsLog.push(turnEvent(1));
    await store.applyTurnEvent(turnEvent(1));

    // turns 2 and 3 happen while disconnected
    fake.turnsLog.push(turnEvent(2), turnEvent(3), turnEvent(4));
    await store.applyTurnEvent(turnEvent(4));

    expect(store.state.feed.map((e) => e.turn_index)).toEqual([1, 2, 3, 4]);
    expect(fake.turnsCalls).toContain(1); // since = last seen turn
  });

  it("reconnecting triggers a backfill", async () => {
    const fake = new FakeApi();
    const store = new DashboardStore(asApi(fake));
    await store.refresh();
    store.setConnection("reconnecting");
    fake.turnsLog.push(turnEvent(1), turnEvent(2));
    store.setConnection("live");
    await new Promise((r) => setTimeout(r, 0));
    expect(store.state.feed.map((e) => e.turn_index)).toEqual([1, 2]);
  });
});

describe("no authoritative state in the dashboard", () => {
  it("two stores refreshed from the same API agree", async () => {
    const fake = new FakeApi();
    fake.turnsLog.push(turnEvent(1), turnEvent(2));
    const a = new DashboardStore(asApi(fake));
    const b = new DashboardStore(asApi(fake));
    await a.refresh();
    await b.refresh();
    expect(a.state.feed).toEqual(b.state.feed);
    expect(a.state.epistemic).toEqual(b.state.epistemic);
    expect(a.state.lastTurn).toBe(b.state.lastTurn);
  });
});

describe("steering guard", () => {
  it("warns before deleting the active learning item", async () => {
    const fake = new FakeApi();
    const store = new DashboardStore(asApi(fake));
    await store.refresh();
    store.state.epistemic!.active_item = {
      item_id: 2, item_name: "x", state: "learning", threshold: 8,
      metric: null, queue_position: 0,
    };
    expect(store.deletionWarning(2)).toMatch(/active learning item/);
    expect(store.deletionWarning(5)).toBeNull();
  });
});
