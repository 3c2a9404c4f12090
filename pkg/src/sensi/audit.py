"""Cascade auditor: compare pipeline beliefs against simulator ground truth.

The auditor tags every hypothesis and fact with a truth status decided by
a small structured claim grammar (movement direction, energy economy,
entity interactions) evaluated against the built-in game's rules. A
hallucination cascade is reported only when every link of the chain is
witnessed by concrete rows: a corrupted diff, a contradicted figured-out
entry first derived at a corrupted turn, a threshold-meeting score over
that entry, and the resulting contaminated fact.

Also home of the corruption injector used to reproduce the cascade under
controlled perception error.
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass, field
from .backends import ENERGY_COST_CLAIM
from .env import DOT_COLOR, STAR_COLOR, EnvTranscript, GameConfig, default_config
from .frames import FrameDiff, MovedObject, Observation, RegionChange, compose_summary
from .store import Store

CORRUPTION_POLICIES = ("flip_horizontal_direction", "relabel_ui_as_decoration",
                       "drop_moves")

DECORATION_TEXT = "decorative border pattern"

_DIRECTION_TRUTH = {"ACTION1": "up", "ACTION2": "down",
                    "ACTION3": "left", "ACTION4": "right"}

_RE_DIRECTION = re.compile(r"^(ACTION\d) moves the player one cell (up|down|left|right)$")
_RE_BLOCKED = re.compile(r"^(ACTION\d) is blocked by solid cells$")
_RE_PICKUP = re.compile(r"^reaching a color-(\d+) cell adds energy pips$")
_RE_VANISH = re.compile(r"^reaching a color-(\d+) cell removes it$")
_RE_KEY = re.compile(r"^bumping a color-(\d+) cell yields a color-(\d+) key$")
_RE_DOOR = re.compile(r"^a color-(\d+) door opens when holding a color-(\d+) key$")


class GameTruth:
    """Evaluates grammar claims against a game config; None = unverifiable."""

    def __init__(self, config: GameConfig | None = None):
        self.config = config or default_config()
        self.keygen_colors = {color for lvl in self.config.levels
                              for _, color in lvl.key_generators}
        self.door_colors = {color for lvl in self.config.levels
                            for _, color in lvl.doors}
        self.vanishing_colors = {STAR_COLOR, DOT_COLOR}

    def evaluate(self, text: str) -> bool | None:
        m = _RE_DIRECTION.match(text)
        if m:
            truth = _DIRECTION_TRUTH.get(m.group(1))
            return None if truth is None else truth == m.group(2)
        m = _RE_BLOCKED.match(text)
        if m:
            return m.group(1) in _DIRECTION_TRUTH
        m = _RE_PICKUP.match(text)
        if m:
            return int(m.group(1)) == DOT_COLOR
        m = _RE_VANISH.match(text)
        if m:
            return int(m.group(1)) in self.vanishing_colors
        m = _RE_KEY.match(text)
        if m:
            c1, c2 = int(m.group(1)), int(m.group(2))
            return c1 == c2 and c1 in self.keygen_colors
        m = _RE_DOOR.match(text)
        if m:
            c1, c2 = int(m.group(1)), int(m.group(2))
            return c1 == c2 and c1 in self.door_colors
        if text == ENERGY_COST_CLAIM:
            return True
        if text == "RESET starts the game":
            return True
        return None


@dataclass(frozen=True)
class ProvenanceTag:
    entry_table: str  # 'guesses' | 'figured_outs'
    entry_id: int
    text: str
    origin_turn: int
    source_diff_turn: int
    truth_status: str  # 'consistent' | 'contradicted' | 'unverifiable'
    is_fact: bool
    source_item_id: int | None


@dataclass
class CascadeReport:
    corrupted_diff_turns: list[int]
    contaminated_figured_out: int
    contaminated_facts_promoted: int
    spurious_validations: list[tuple[int, int, int]]  # (turn, score, item_id)
    cascade_detected: bool | None  # None = indeterminate (no ground truth)
    tags: list[ProvenanceTag] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "corrupted_diff_turns": self.corrupted_diff_turns,
            "contaminated_figured_out": self.contaminated_figured_out,
            "contaminated_facts_promoted": self.contaminated_facts_promoted,
            "spurious_validations": [list(v) for v in self.spurious_validations],
            "cascade_detected": self.cascade_detected,
            "tags": [{
                "entry_table": t.entry_table, "entry_id": t.entry_id,
                "text": t.text, "origin_turn": t.origin_turn,
                "source_diff_turn": t.source_diff_turn,
                "truth_status": t.truth_status, "is_fact": t.is_fact,
                "source_item_id": t.source_item_id,
            } for t in self.tags],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def provenance_graph(self) -> dict:
        """Node/edge description of the contamination flow for the dashboard."""
        nodes, edges = [], []
        for t in self.corrupted_diff_turns:
            nodes.append({"id": f"diff:{t}", "type": "diff", "turn": t,
                          "label": f"corrupted diff @ turn {t}", "status": "corrupted"})
        claims_seen = set()
        for tag in self.tags:
            if tag.truth_status == "unverifiable" and not tag.is_fact:
                continue
            cid = f"claim:{tag.text}"
            if cid not in claims_seen:
                claims_seen.add(cid)
                nodes.append({"id": cid, "type": "fact" if tag.is_fact else "claim",
                              "turn": tag.origin_turn, "label": tag.text,
                              "status": tag.truth_status})
                if tag.source_diff_turn in self.corrupted_diff_turns:
                    edges.append({"source": f"diff:{tag.source_diff_turn}",
                                  "target": cid, "kind": "derived_from"})
        for turn, score, item_id in self.spurious_validations:
            vid = f"validation:{turn}"
            nodes.append({"id": vid, "type": "validation", "turn": turn,
                          "label": f"score {score}/10 completed item {item_id}",
                          "status": "spurious"})
            edges.append({"source": vid, "target": f"item:{item_id}",
                          "kind": "completed"})
        return {"nodes": nodes, "edges": edges}


def _ground_truth_by_turn(store: Store,
                          transcript: EnvTranscript | None) -> dict[int, str] | None:
    """Canonical ground-truth diff JSON per turn, or None when unavailable."""
    if transcript is not None and transcript.ground_truth_diffs is not None:
        return {i + 1: d.to_json()
                for i, d in enumerate(transcript.ground_truth_diffs)}
    rows = {}
    for rec in store.turn_records():
        value = store.get_input(rec.turn_index, "gt_diff")
        if value is not None:
            rows[rec.turn_index] = value
    return rows or None


def audit_run(transcript: EnvTranscript | None, store: Store,
              truth: GameTruth | None = None) -> CascadeReport:
    """Tag all hypotheses/facts and detect the full contamination chain."""
    truth = truth or GameTruth()
    gt = _ground_truth_by_turn(store, transcript)
    records = store.turn_records()

    # The pipeline diff at turn t describes the transition caused by turn
    # t-1's action, so it is checked against turn t-1's ground truth. Turn 1
    # and turns following a RESET legitimately see an empty diff and are
    # skipped (their transition belongs to no in-episode action).
    records_by_turn = {r.turn_index: r for r in records}
    corrupted_turns: list[int] = []
    if gt is not None:
        for rec in records:
            if rec.diff_text is None:
                continue
            prev = records_by_turn.get(rec.turn_index - 1)
            if prev is None or prev.action.action_id.value == "RESET":
                continue
            want = gt.get(prev.turn_index)
            if want is not None and want != rec.diff_text:
                corrupted_turns.append(rec.turn_index)

    # origin turn per claim text: first appearance in either hypothesis table
    origin: dict[str, int] = {}
    rows: list[tuple[str, int, int, str, str, int | None]] = []
    for table in ("guesses", "figured_outs"):
        for r in store.table_dump(table):
            state = r.get("state", "guess")
            rows.append((table, r["entry_id"], r["turn_index"], r["text"], state,
                         r.get("source_item_id")))
            if r["text"] not in origin or r["turn_index"] < origin[r["text"]]:
                origin[r["text"]] = r["turn_index"]

    tags: list[ProvenanceTag] = []
    contaminated_confirmed: set[str] = set()
    contaminated_fact_texts: set[str] = set()
    for table, entry_id, turn_index, text, state, source_item in rows:
        if gt is None:
            status = "unverifiable"
        else:
            verdict = truth.evaluate(text)
            status = ("unverifiable" if verdict is None
                      else "consistent" if verdict else "contradicted")
        is_fact = state == "fact"
        tags.append(ProvenanceTag(
            entry_table=table, entry_id=entry_id, text=text,
            origin_turn=origin[text], source_diff_turn=origin[text],
            truth_status=status, is_fact=is_fact, source_item_id=source_item))
        if status == "contradicted" and table == "figured_outs":
            contaminated_confirmed.add(text)
            if is_fact and source_item is not None:
                contaminated_fact_texts.add(text)

    # promotions: audit rows carry the promoted entry ids and the turn
    spurious: list[tuple[int, int, int]] = []
    cascade = False
    tag_by_entry = {(t.entry_table, t.entry_id): t for t in tags}
    score_by_turn = {r.turn_index: r.sense_score for r in records}
    for row in store.audit_rows(kind="promotion"):
        payload = row["payload"]
        turn = payload["turn_index"]
        item_id = payload["item_id"]
        promoted_tags = [tag_by_entry.get(("figured_outs", eid))
                         for eid in payload["promoted_entry_ids"]]
        promoted_tags = [t for t in promoted_tags if t is not None]
        bad = [t for t in promoted_tags if t.truth_status == "contradicted"]
        if bad:
            spurious.append((turn, score_by_turn.get(turn) or 0, item_id))
            if any(t.source_diff_turn in corrupted_turns for t in bad):
                cascade = True

    return CascadeReport(
        corrupted_diff_turns=corrupted_turns,
        contaminated_figured_out=len(contaminated_confirmed),
        contaminated_facts_promoted=len(contaminated_fact_texts),
        spurious_validations=spurious,
        cascade_detected=None if gt is None else cascade,
        tags=tags)


# -- corruption injection --------------------------------------------------------


def _rebuild_summary(diff: FrameDiff, added, removed, moved, ui) -> str:
    head = compose_summary(len(added), len(removed), len(moved), len(ui))
    parts = diff.summary.split("; ")
    return "; ".join([head] + parts[1:])


def _flip_horizontal(diff: FrameDiff) -> FrameDiff:
    moved = []
    for m in diff.moved:
        dr, dc = m.displacement
        if dc == 0:
            moved.append(m)
            continue
        p = m.prev_bbox
        moved.append(MovedObject(
            prev_bbox=p, new_bbox=(p[0] + dr, p[1] - dc, p[2] + dr, p[3] - dc),
            color=m.color, cell_count=m.cell_count))
    moved_t = tuple(moved)
    return FrameDiff(added=diff.added, removed=diff.removed, moved=moved_t,
                     ui_changes=diff.ui_changes,
                     summary=_rebuild_summary(diff, diff.added, diff.removed,
                                              moved_t, diff.ui_changes))


def _relabel_ui(diff: FrameDiff) -> FrameDiff:
    ui = tuple(RegionChange(region_name=u.region_name, description=DECORATION_TEXT)
               for u in diff.ui_changes)
    return FrameDiff(added=diff.added, removed=diff.removed, moved=diff.moved,
                     ui_changes=ui,
                     summary=_rebuild_summary(diff, diff.added, diff.removed,
                                              diff.moved, ui))


def _drop_moves(diff: FrameDiff) -> FrameDiff:
    return FrameDiff(added=diff.added, removed=diff.removed, moved=(),
                     ui_changes=diff.ui_changes,
                     summary=_rebuild_summary(diff, diff.added, diff.removed,
                                              (), diff.ui_changes))


_POLICY_FNS = {
    "flip_horizontal_direction": _flip_horizontal,
    "relabel_ui_as_decoration": _relabel_ui,
    "drop_moves": _drop_moves,
}


class CorruptingDiffer:
    """Wraps any differ backend, corrupting each diff independently at `rate`."""

    def __init__(self, inner, policy: str, rate: float, seed: int = 0):
        self.inner = inner
        self.policy = policy
        self.rate = rate
        self.rng = random.Random(seed)
        self.calls = 0
        self.log: list[dict] = []

    def diff(self, prev: Observation, curr: Observation) -> FrameDiff:
        out = self.inner.diff(prev, curr)
        self.calls += 1
        if self.rng.random() < self.rate:
            corrupted = _POLICY_FNS[self.policy](out)
            self.log.append({"call_index": self.calls, "policy": self.policy,
                             "changed": corrupted != out})
            return corrupted
        return out


def inject_corruption(differ_backend, policy: str, rate: float,
                      seed: int = 0) -> CorruptingDiffer:
    if policy not in CORRUPTION_POLICIES:
        raise ValueError(f"unknown corruption policy {policy!r}; "
                         f"one of {CORRUPTION_POLICIES}")
    if rate <= 0:
        raise ValueError("rate 0 corrupts nothing: use the plain backend")
    if rate > 1:
        raise ValueError("rate must be a fraction in (0, 1]")
    return CorruptingDiffer(differ_backend, policy=policy, rate=rate, seed=seed)
