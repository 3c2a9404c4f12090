"""The sqlite control plane: externalized cognitive state behind typed ops.

All reads and writes go through this module so the context window is a
pure function of store contents. One Store handle is the single writer
for a run; any number of read-only handles (dashboard, CLI inspect) may
observe concurrently. External steering edits are either applied
directly (no live run) or enqueued and drained by the writer at turn
boundaries.
"""

from __future__ import annotations

import json
import sqlite3
import time
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Callable, Sequence

from .env import ActionCommand
from .frames import GameStatus

SCHEMA_VERSION = 1

DEFAULT_SEED_FACTS = (
    "RESET starts the game",
    "all available actions: ACTION1, ACTION2, ACTION3, ACTION4, ACTION5, "
    "ACTION6, ACTION7, RESET",
)

DEFAULT_CURRICULUM = (
    "learn what each action does in the game",
    "learn how actions affects your energy while playing",
    "learn how to win the game",
)

EDIT_KINDS = ("insert_fact", "delete_item", "reorder_items", "set_threshold",
              "insert_item")


class StoreError(Exception):
    pass


def wall_clock_ms() -> int:
    return int(time.time() * 1000)


@dataclass
class CounterClock:
    """Deterministic millisecond clock for byte-reproducible runs."""

    now: int = 0

    def __call__(self) -> int:
        self.now += 1
        return self.now


@dataclass(frozen=True)
class LearningItem:
    item_id: int
    game_id: str
    card_id: str
    item_name: str
    state: str
    threshold: int
    metric: str | None
    queue_position: int
    created_at: int
    completed_at: int | None


@dataclass(frozen=True)
class HypothesisEntry:
    entry_id: int
    turn_index: int
    kind: str  # 'guess' | 'figured_out'
    text: str
    active: bool
    source_item_id: int | None = None


@dataclass(frozen=True)
class TurnRecord:
    turn_index: int
    frame_ref: str
    action: ActionCommand
    score: int
    status: GameStatus
    decision_type: str | None = None
    diff_text: str | None = None
    sense_score: int | None = None
    sense_reasoning: str | None = None
    active_item_id: int | None = None
    prompt_hash: str | None = None


@dataclass(frozen=True)
class EpistemicState:
    """Everything the prompt assembler may see for one turn."""

    turn_index: int
    facts: tuple[str, ...]
    guesses: tuple[str, ...]
    figured_out: tuple[str, ...]
    active_item: LearningItem | None
    sense_score: int | None
    sense_reasoning: str | None

    @property
    def metric(self) -> str | None:
        return self.active_item.metric if self.active_item else None

    def to_dict(self) -> dict:
        return {
            "turn_index": self.turn_index,
            "facts": list(self.facts),
            "guesses": list(self.guesses),
            "figured_out": list(self.figured_out),
            "active_item": (None if self.active_item is None else {
                "item_id": self.active_item.item_id,
                "item_name": self.active_item.item_name,
                "state": self.active_item.state,
                "threshold": self.active_item.threshold,
                "metric": self.active_item.metric,
                "queue_position": self.active_item.queue_position,
            }),
            "sense_score": self.sense_score,
            "sense_reasoning": self.sense_reasoning,
        }


@dataclass(frozen=True)
class ExternalEdit:
    kind: str
    payload: dict

    def __post_init__(self):
        if self.kind not in EDIT_KINDS:
            raise StoreError(f"unknown edit kind {self.kind!r}")


TABLES = ("schema_version", "items_to_learn", "inputs", "game", "guesses",
          "figured_outs", "losing_action_seqs", "audit_log", "pending_edits")


def _schema_sql() -> str:
    return resources.files("sensi").joinpath("schema.sql").read_text(encoding="utf-8")


class Store:
    """Single-file sqlite store; open read-write (writer) or read-only."""

    def __init__(self, path: str | Path, clock: Callable[[], int] | None = None,
                 read_only: bool = False):
        self.path = str(path)
        self.clock = clock or wall_clock_ms
        self.read_only = read_only
        if read_only:
            uri = f"file:{self.path}?mode=ro"
            self._conn = sqlite3.connect(uri, uri=True, check_same_thread=False,
                                         isolation_level=None)
        else:
            self._conn = sqlite3.connect(self.path, check_same_thread=False,
                                         isolation_level=None)
            self._conn.execute("PRAGMA journal_mode=WAL")
        self._conn.execute("PRAGMA busy_timeout=5000")
        self._conn.row_factory = sqlite3.Row

    def _txn(self):
        """BEGIN IMMEDIATE unless a transaction is already open (turn scope)."""
        from contextlib import contextmanager

        @contextmanager
        def scope():
            owns = not self._conn.in_transaction
            if owns:
                self._conn.execute("BEGIN IMMEDIATE")
            try:
                yield
            except Exception:
                if owns:
                    self._conn.rollback()
                raise
            else:
                if owns:
                    self._conn.commit()

        return scope()

    def close(self) -> None:
        self._conn.close()

    # -- setup ---------------------------------------------------------------

    def create_tables(self) -> None:
        self._conn.executescript(_schema_sql())  # DDL is idempotent, self-committing
        with self._txn():
            row = self._conn.execute("SELECT version FROM schema_version").fetchone()
            if row is None:
                self._conn.execute("INSERT INTO schema_version (version) VALUES (?)",
                                   (SCHEMA_VERSION,))
            elif row["version"] != SCHEMA_VERSION:
                raise StoreError(
                    f"schema version {row['version']} != supported {SCHEMA_VERSION}")

    def seed(self, game_id: str, card_id: str,
             curriculum: Sequence[str] = DEFAULT_CURRICULUM,
             seed_facts: Sequence[str] = DEFAULT_SEED_FACTS) -> None:
        """Idempotent: re-running with the same ids inserts nothing new."""
        with self._txn():
            for fact in seed_facts:
                exists = self._conn.execute(
                    "SELECT 1 FROM figured_outs WHERE text=? AND state='fact'",
                    (fact,)).fetchone()
                if not exists:
                    self._conn.execute(
                        "INSERT INTO figured_outs (turn_index, text, active, state)"
                        " VALUES (0, ?, 1, 'fact')", (fact,))
            next_pos = self._conn.execute(
                "SELECT COALESCE(MAX(queue_position), -1) + 1 AS p FROM items_to_learn"
                " WHERE game_id=? AND card_id=?", (game_id, card_id)).fetchone()["p"]
            for name in curriculum:
                cur = self._conn.execute(
                    "INSERT OR IGNORE INTO items_to_learn"
                    " (game_id, card_id, item_name, state, threshold,"
                    "  queue_position, created_at)"
                    " VALUES (?, ?, ?, 'not_reached', 8, ?, ?)",
                    (game_id, card_id, name, next_pos, self.clock()))
                if cur.rowcount:
                    next_pos += 1

    # -- transactions ----------------------------------------------------------

    def begin_turn(self) -> None:
        self._conn.execute("BEGIN IMMEDIATE")

    def commit_turn(self) -> None:
        self._conn.commit()

    def rollback_turn(self) -> None:
        self._conn.rollback()

    # -- reads -----------------------------------------------------------------

    def max_turn(self) -> int:
        row = self._conn.execute("SELECT MAX(turn_index) AS m FROM game").fetchone()
        return row["m"] if row["m"] is not None else 0

    def _item_from_row(self, row) -> LearningItem:
        return LearningItem(
            item_id=row["item_id"], game_id=row["game_id"], card_id=row["card_id"],
            item_name=row["item_name"], state=row["state"],
            threshold=row["threshold"], metric=row["metric"],
            queue_position=row["queue_position"], created_at=row["created_at"],
            completed_at=row["completed_at"])

    def items(self) -> list[LearningItem]:
        rows = self._conn.execute(
            "SELECT * FROM items_to_learn ORDER BY queue_position").fetchall()
        return [self._item_from_row(r) for r in rows]

    def get_item(self, item_id: int) -> LearningItem:
        row = self._conn.execute(
            "SELECT * FROM items_to_learn WHERE item_id=?", (item_id,)).fetchone()
        if row is None:
            raise StoreError(f"no learning item with id {item_id}")
        return self._item_from_row(row)

    def lowest_open_item(self) -> LearningItem | None:
        row = self._conn.execute(
            "SELECT * FROM items_to_learn WHERE state IN ('learning','not_reached')"
            " ORDER BY queue_position LIMIT 1").fetchone()
        return self._item_from_row(row) if row else None

    def facts(self) -> list[HypothesisEntry]:
        rows = self._conn.execute(
            "SELECT * FROM figured_outs WHERE state='fact' ORDER BY entry_id").fetchall()
        return [HypothesisEntry(r["entry_id"], r["turn_index"], "figured_out",
                                r["text"], bool(r["active"]), r["source_item_id"])
                for r in rows]

    def active_hypotheses(self, kind: str) -> list[HypothesisEntry]:
        table = "guesses" if kind == "guess" else "figured_outs"
        extra = "" if kind == "guess" else " AND state='figured_out'"
        rows = self._conn.execute(
            f"SELECT * FROM {table} WHERE active=1{extra} ORDER BY entry_id").fetchall()
        return [HypothesisEntry(r["entry_id"], r["turn_index"], kind, r["text"],
                                bool(r["active"]),
                                r["source_item_id"] if kind == "figured_out" else None)
                for r in rows]

    def latest_sense(self) -> tuple[int | None, str | None]:
        row = self._conn.execute(
            "SELECT sense_score, sense_reasoning FROM game"
            " WHERE sense_score IS NOT NULL ORDER BY turn_index DESC LIMIT 1").fetchone()
        return (row["sense_score"], row["sense_reasoning"]) if row else (None, None)

    def snapshot_epistemic_state(self, turn_index: int | None = None) -> EpistemicState:
        """Pure read of facts, hypotheses, active item and latest evaluation."""
        score, reasoning = self.latest_sense()
        return EpistemicState(
            turn_index=turn_index if turn_index is not None else self.max_turn(),
            facts=tuple(e.text for e in self.facts()),
            guesses=tuple(e.text for e in self.active_hypotheses("guess")),
            figured_out=tuple(e.text for e in self.active_hypotheses("figured_out")),
            active_item=self.lowest_open_item(),
            sense_score=score,
            sense_reasoning=reasoning,
        )

    def turn_records(self, since: int = 0) -> list[TurnRecord]:
        rows = self._conn.execute(
            "SELECT * FROM game WHERE turn_index > ? ORDER BY turn_index",
            (since,)).fetchall()
        out = []
        for r in rows:
            coords = json.loads(r["coords"]) if r["coords"] else None
            out.append(TurnRecord(
                turn_index=r["turn_index"], frame_ref=r["frame_ref"],
                action=ActionCommand(r["action_id"],
                                     tuple(coords) if coords else None),
                score=r["score"], status=GameStatus(r["status"]),
                decision_type=r["decision_type"], diff_text=r["diff_text"],
                sense_score=r["sense_score"], sense_reasoning=r["sense_reasoning"],
                active_item_id=r["active_item_id"], prompt_hash=r["prompt_hash"]))
        return out

    def get_input(self, turn_index: int, key: str) -> str | None:
        row = self._conn.execute(
            "SELECT value FROM inputs WHERE turn_index=? AND key=?",
            (turn_index, key)).fetchone()
        return row["value"] if row else None

    def losing_sequences(self) -> list[tuple[int, list[ActionCommand], int]]:
        rows = self._conn.execute(
            "SELECT * FROM losing_action_seqs ORDER BY sequence_id").fetchall()
        return [(r["sequence_id"],
                 [ActionCommand.from_dict(a) for a in json.loads(r["actions"])],
                 r["terminal_turn_index"]) for r in rows]

    def audit_rows(self, kind: str | None = None) -> list[dict]:
        q = "SELECT * FROM audit_log"
        args: tuple = ()
        if kind:
            q += " WHERE kind=?"
            args = (kind,)
        rows = self._conn.execute(q + " ORDER BY audit_id", args).fetchall()
        return [{"audit_id": r["audit_id"], "ts": r["ts"], "kind": r["kind"],
                 "payload": json.loads(r["payload"])} for r in rows]

    def table_dump(self, table: str) -> list[dict]:
        if table not in TABLES:
            raise StoreError(f"unknown table {table!r}; one of {', '.join(TABLES)}")
        rows = self._conn.execute(f"SELECT * FROM {table}").fetchall()
        return [dict(r) for r in rows]

    def dump_canonical(self) -> str:
        """Stable JSON dump of all tables, for content comparison."""
        return json.dumps({t: self.table_dump(t) for t in TABLES},
                          sort_keys=True, separators=(",", ":"))

    # -- writes ----------------------------------------------------------------

    def put_input(self, turn_index: int, key: str, value: str) -> None:
        self._conn.execute(
            "INSERT OR REPLACE INTO inputs (turn_index, key, value) VALUES (?,?,?)",
            (turn_index, key, value))

    def record_turn(self, record: TurnRecord) -> None:
        expected = self.max_turn() + 1
        if record.turn_index != expected:
            raise StoreError(
                f"turn_index {record.turn_index} out of order; expected {expected}")
        self._conn.execute(
            "INSERT INTO game (turn_index, frame_ref, action_id, coords,"
            " decision_type, diff_text, score, status, sense_score,"
            " sense_reasoning, active_item_id, prompt_hash)"
            " VALUES (?,?,?,?,?,?,?,?,?,?,?,?)",
            (record.turn_index, record.frame_ref, record.action.action_id.value,
             json.dumps(list(record.action.coords)) if record.action.coords else None,
             record.decision_type, record.diff_text, record.score,
             record.status.value, record.sense_score, record.sense_reasoning,
             record.active_item_id, record.prompt_hash))

    def append_hypotheses(self, turn_index: int, guesses: Sequence[str],
                          figured_outs: Sequence[str]) -> None:
        """Full replacement: prior active generations become inactive."""
        self._conn.execute("UPDATE guesses SET active=0 WHERE active=1")
        self._conn.execute(
            "UPDATE figured_outs SET active=0 WHERE active=1 AND state='figured_out'")
        for text in guesses:
            self._conn.execute(
                "INSERT INTO guesses (turn_index, text, active) VALUES (?,?,1)",
                (turn_index, text))
        for text in figured_outs:
            self._conn.execute(
                "INSERT INTO figured_outs (turn_index, text, active, state)"
                " VALUES (?,?,1,'figured_out')", (turn_index, text))

    def log_losing_sequence(self, actions: Sequence[ActionCommand]) -> int:
        terminal = self.max_turn()
        row = self._conn.execute(
            "SELECT status FROM game WHERE turn_index=?", (terminal,)).fetchone()
        if row is None or row["status"] != GameStatus.GAME_OVER.value:
            raise StoreError("losing sequence requires a GAME_OVER terminal turn")
        cur = self._conn.execute(
            "INSERT INTO losing_action_seqs (actions, terminal_turn_index)"
            " VALUES (?,?)",
            (json.dumps([a.to_dict() for a in actions]), terminal))
        return cur.lastrowid

    def set_item_state(self, item_id: int, state: str,
                       completed_at: int | None = None) -> None:
        self.get_item(item_id)
        if completed_at is not None:
            self._conn.execute(
                "UPDATE items_to_learn SET state=?, completed_at=? WHERE item_id=?",
                (state, completed_at, item_id))
        else:
            self._conn.execute(
                "UPDATE items_to_learn SET state=? WHERE item_id=?", (state, item_id))

    def set_item_metric(self, item_id: int, metric: str) -> None:
        self._conn.execute(
            "UPDATE items_to_learn SET metric=? WHERE item_id=?", (metric, item_id))

    def promote_figured_outs(self, item_id: int, turn_index: int) -> int:
        """Promote every active figured-out entry to a fact row; returns count."""
        fact_texts = {e.text for e in self.facts()}
        rows = self._conn.execute(
            "SELECT entry_id, text FROM figured_outs"
            " WHERE active=1 AND state='figured_out' ORDER BY entry_id").fetchall()
        promoted = []
        for r in rows:
            if r["text"] in fact_texts:
                # text already a fact: retire the entry instead of duplicating
                self._conn.execute(
                    "UPDATE figured_outs SET active=0 WHERE entry_id=?",
                    (r["entry_id"],))
                continue
            self._conn.execute(
                "UPDATE figured_outs SET state='fact', source_item_id=?"
                " WHERE entry_id=?", (item_id, r["entry_id"]))
            fact_texts.add(r["text"])
            promoted.append(r["entry_id"])
        self._audit("promotion", {"item_id": item_id, "turn_index": turn_index,
                                  "promoted_entry_ids": promoted})
        return len(promoted)

    # -- external edits ----------------------------------------------------------

    def _audit(self, kind: str, payload: dict) -> int:
        cur = self._conn.execute(
            "INSERT INTO audit_log (ts, kind, payload) VALUES (?,?,?)",
            (self.clock(), kind, json.dumps(payload, sort_keys=True)))
        return cur.lastrowid

    def apply_external_edit(self, edit: ExternalEdit) -> dict:
        """Apply one steering edit atomically; returns an audit receipt."""
        p = edit.payload
        with self._txn():
            if edit.kind == "insert_fact":
                text = p["text"]
                if not text or not isinstance(text, str):
                    raise StoreError("insert_fact needs non-empty text")
                self._conn.execute(
                    "INSERT INTO figured_outs (turn_index, text, active, state)"
                    " VALUES (?,?,1,'fact')", (p.get("turn_index", 0), text))
            elif edit.kind == "delete_item":
                self.get_item(p["item_id"])  # missing row -> error
                self._conn.execute(
                    "DELETE FROM items_to_learn WHERE item_id=?", (p["item_id"],))
            elif edit.kind == "set_threshold":
                item = self.get_item(p["item_id"])
                tau = int(p["threshold"])
                if not 1 <= tau <= 10:
                    raise StoreError("threshold must be in 1..10")
                self._conn.execute(
                    "UPDATE items_to_learn SET threshold=? WHERE item_id=?",
                    (tau, item.item_id))
            elif edit.kind == "reorder_items":
                ids = list(p["item_ids"])
                items = {i.item_id: i for i in self.items()}
                for item_id in ids:
                    if item_id not in items:
                        raise StoreError(f"no learning item with id {item_id}")
                # two-phase renumber to dodge the unique constraint
                for offset, item_id in enumerate(ids):
                    self._conn.execute(
                        "UPDATE items_to_learn SET queue_position=? WHERE item_id=?",
                        (-1000 - offset, item_id))
                for pos, item_id in enumerate(ids):
                    self._conn.execute(
                        "UPDATE items_to_learn SET queue_position=? WHERE item_id=?",
                        (pos, item_id))
            elif edit.kind == "insert_item":
                name = p["item_name"]
                if not name or not isinstance(name, str):
                    raise StoreError("insert_item needs non-empty item_name")
                game_id, card_id = p["game_id"], p["card_id"]
                pos = self._conn.execute(
                    "SELECT COALESCE(MAX(queue_position), -1) + 1 AS p"
                    " FROM items_to_learn WHERE game_id=? AND card_id=?",
                    (game_id, card_id)).fetchone()["p"]
                self._conn.execute(
                    "INSERT OR IGNORE INTO items_to_learn"
                    " (game_id, card_id, item_name, state, threshold,"
                    "  queue_position, created_at)"
                    " VALUES (?,?,?,'not_reached',?,?,?)",
                    (game_id, card_id, name, int(p.get("threshold", 8)), pos,
                     self.clock()))
            audit_id = self._audit("edit:" + edit.kind, p)
        return {"audit_id": audit_id, "kind": edit.kind, "payload": p}

    def enqueue_edit(self, edit: ExternalEdit) -> int:
        with self._txn():
            cur = self._conn.execute(
                "INSERT INTO pending_edits (ts, kind, payload) VALUES (?,?,?)",
                (self.clock(), edit.kind, json.dumps(edit.payload, sort_keys=True)))
            return cur.lastrowid

    def drain_pending_edits(self, applied_at_turn: int) -> list[dict]:
        """Apply queued edits in order; invalid ones are marked and skipped."""
        rows = self._conn.execute(
            "SELECT * FROM pending_edits WHERE applied_at_turn IS NULL"
            " ORDER BY edit_id").fetchall()
        receipts = []
        for r in rows:
            edit = ExternalEdit(kind=r["kind"], payload=json.loads(r["payload"]))
            try:
                receipt = self.apply_external_edit(edit)
            except StoreError as e:
                receipt = {"audit_id": None, "kind": edit.kind, "error": str(e)}
            receipt["edit_id"] = r["edit_id"]
            receipt["applied_at_turn"] = applied_at_turn
            receipts.append(receipt)
            with self._txn():
                self._conn.execute(
                    "UPDATE pending_edits SET applied_at_turn=? WHERE edit_id=?",
                    (applied_at_turn, r["edit_id"]))
        return receipts


def init_store(path: str | Path, game_id: str, card_id: str,
               curriculum: Sequence[str] = DEFAULT_CURRICULUM,
               seed_facts: Sequence[str] = DEFAULT_SEED_FACTS,
               clock: Callable[[], int] | None = None) -> Store:
    """Create (or re-open) a store file with tables and seed rows in place."""
    store = Store(path, clock=clock)
    store.create_tables()
    store.seed(game_id, card_id, curriculum, seed_facts)
    return store
