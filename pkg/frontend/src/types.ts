// Wire types mirroring docs/api.json in the engine repo.

export interface ActiveItem {
  item_id: number;
  item_name: string;
  state: string;
  threshold: number;
  metric: string | null;
  queue_position: number;
}

export interface EpistemicState {
  turn_index: number;
  facts: string[];
  guesses: string[];
  figured_out: string[];
  active_item: ActiveItem | null;
  sense_score: number | null;
  sense_reasoning: string | null;
}

export interface TimelinePoint {
  turn_index: number;
  item_id: number;
  phi: number;
  state: "learning" | "completed";
}

export interface TimelinePayload {
  threshold: number;
  items: Record<string, string>;
  points: TimelinePoint[];
}

export interface TurnEvent {
  turn_index: number;
  action_id: string;
  decision_type: string | null;
  diff_summary: string;
  sense_score: number | null;
  sense_reasoning: string | null;
  score: number;
  status: string;
  active_item_id: number | null;
  prompt_hash: string | null;
  applied_edits?: number[];
}

export interface EditAck {
  edit_id: number;
  apply_at_turn: number | null;
  status: "pending" | "applied";
}

export interface ProvenanceTag {
  entry_table: string;
  entry_id: number;
  text: string;
  origin_turn: number;
  source_diff_turn: number;
  truth_status: "consistent" | "contradicted" | "unverifiable";
  is_fact: boolean;
  source_item_id: number | null;
}

export interface AuditReport {
  corrupted_diff_turns: number[];
  contaminated_figured_out: number;
  contaminated_facts_promoted: number;
  spurious_validations: [number, number, number][];
  cascade_detected: boolean | null;
  tags: ProvenanceTag[];
}

export type EditKind =
  | "insert_fact"
  | "delete_item"
  | "reorder_items"
  | "set_threshold"
  | "insert_item";

export type ConnectionState = "connecting" | "live" | "reconnecting" | "closed";
