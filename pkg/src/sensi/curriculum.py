"""Learning-item state machine: selection, threshold transition, promotion.

Items progress not_reached -> learning -> completed, one item learning at
a time. Completion fires when the judge's sense score meets the item's
threshold (inclusive), at which point every active figured-out entry is
promoted to a fact for all subsequent prompts.
"""

from __future__ import annotations

from dataclasses import dataclass

from .store import LearningItem, Store, StoreError


@dataclass(frozen=True)
class CurriculumDecision:
    active_item: LearningItem | None
    just_completed: int | None = None
    promoted_fact_count: int = 0
    curriculum_done: bool = False


@dataclass(frozen=True)
class TimelinePoint:
    turn_index: int
    item_id: int
    sense_score: int
    state: str  # item state right after this turn's evaluation


def select_active(store: Store) -> CurriculumDecision:
    """Pick the lowest-queue-position open item, activating it if fresh.

    A not_reached item flips to learning here; callers must then generate
    its metric before scoring (the item is returned with metric None).
    """
    item = store.lowest_open_item()
    if item is None:
        return CurriculumDecision(active_item=None, curriculum_done=True)
    if item.state == "not_reached":
        store.set_item_state(item.item_id, "learning")
        item = store.get_item(item.item_id)
    return CurriculumDecision(active_item=item)


def evaluate_transition(store: Store, item: LearningItem, sense_score: int,
                        turn_index: int | None = None) -> CurriculumDecision:
    """Apply the threshold rule: score >= threshold completes the item."""
    current = store.get_item(item.item_id)
    if current.state != "learning":
        raise StoreError(f"item {item.item_id} is {current.state}, not learning")
    if not 1 <= sense_score <= 10:
        raise StoreError(f"sense score {sense_score} outside 1..10")
    if sense_score < current.threshold:
        return CurriculumDecision(active_item=current)
    turn = turn_index if turn_index is not None else store.max_turn() + 1
    promoted = store.promote_figured_outs(current.item_id, turn)
    store.set_item_state(current.item_id, "completed", completed_at=store.clock())
    done = store.lowest_open_item() is None
    return CurriculumDecision(active_item=None, just_completed=current.item_id,
                              promoted_fact_count=promoted, curriculum_done=done)


def curriculum_timeline(store: Store) -> list[TimelinePoint]:
    """One point per scored turn, for the sense-score progression plot."""
    points: list[TimelinePoint] = []
    for rec in store.turn_records():
        if rec.sense_score is None or rec.active_item_id is None:
            continue
        try:
            item = store.get_item(rec.active_item_id)
            threshold = item.threshold
        except StoreError:
            threshold = 8  # item deleted by a later edit; default rule
        state = "completed" if rec.sense_score >= threshold else "learning"
        points.append(TimelinePoint(turn_index=rec.turn_index,
                                    item_id=rec.active_item_id,
                                    sense_score=rec.sense_score, state=state))
    return points
