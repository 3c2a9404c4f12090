"""The five cognition stages behind pluggable backends.

Each run_* wrapper owns the stage's output contract: range checks, list
dedup rules, action validity. Backends only produce candidate outputs;
anything that survives a wrapper is safe for the orchestrator to commit.
A backend that cannot produce a valid output raises StageError, which
aborts the turn and halts the run.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Sequence

from .env import ActionCommand, ActionId
from .frames import FrameDiff, Observation
from .prompts import PromptBundle, Stage
from .store import LearningItem

DECISION_TYPES = ("GUESS", "INFORMED")


class StageError(Exception):
    """A stage failed to produce a contract-conforming output."""

    def __init__(self, stage: Stage, message: str, raw: str | None = None):
        super().__init__(f"{stage.value}: {message}")
        self.stage = stage
        self.raw = raw


@dataclass(frozen=True)
class SenseEvaluation:
    sense_score: int
    reasoning: str


@dataclass(frozen=True)
class ObserverOutput:
    guesses: tuple[str, ...]
    figured_out: tuple[str, ...]


@dataclass(frozen=True)
class ActorOutput:
    decision_type: str
    action: ActionCommand


class DifferBackend(Protocol):
    def diff(self, prev: Observation, curr: Observation) -> FrameDiff: ...


class MetricBackend(Protocol):
    def generate_metric(self, item_name: str) -> str: ...


class JudgeBackend(Protocol):
    def score(self, item_name: str, metric: str, facts: Sequence[str],
              figured_out: Sequence[str]) -> SenseEvaluation: ...


class ObserverBackend(Protocol):
    def observe(self, prompt: PromptBundle) -> ObserverOutput: ...


class ActorBackend(Protocol):
    def act(self, prompt: PromptBundle) -> ActorOutput: ...


def run_frame_diff(backend: DifferBackend, prev: Observation,
                   curr: Observation) -> FrameDiff:
    if (prev.layers, prev.height, prev.width) != (curr.layers, curr.height, curr.width):
        raise StageError(Stage.FRAME_DIFF,
                         f"frame shape mismatch {prev.height}x{prev.width} vs "
                         f"{curr.height}x{curr.width}")
    return backend.diff(prev, curr)


def run_metric_gen(backend: MetricBackend, item: LearningItem) -> str:
    """Generate the item's rubric, or serve the cached one without a call."""
    if item.metric:
        return item.metric
    text = backend.generate_metric(item.item_name)
    if not text or not text.strip():
        raise StageError(Stage.METRIC_GEN, "backend returned an empty rubric")
    return text


def run_sense_score(backend: JudgeBackend, item_name: str, metric: str,
                    facts: Sequence[str], figured_out: Sequence[str]) -> SenseEvaluation:
    if not metric:
        raise StageError(Stage.SENSE_SCORE, "no metric present for scoring")
    ev = backend.score(item_name, metric, facts, figured_out)
    if not isinstance(ev.sense_score, int) or not 1 <= ev.sense_score <= 10:
        raise StageError(Stage.SENSE_SCORE,
                         f"score {ev.sense_score!r} outside 1..10", raw=str(ev))
    if not ev.reasoning.strip():
        raise StageError(Stage.SENSE_SCORE, "empty reasoning")
    return ev


def _dedup(items: Sequence[str]) -> list[str]:
    seen: set[str] = set()
    out = []
    for x in items:
        if x not in seen:
            seen.add(x)
            out.append(x)
    return out


def run_observer(backend: ObserverBackend, prompt: PromptBundle) -> ObserverOutput:
    if prompt.stage != Stage.OBSERVER:
        raise StageError(Stage.OBSERVER, f"got a {prompt.stage.value} prompt")
    out = backend.observe(prompt)
    figured = _dedup(out.figured_out)
    # an entry appearing in both lists counts as confirmed: figured_out wins
    figured_set = set(figured)
    guesses = [g for g in _dedup(out.guesses) if g not in figured_set]
    return ObserverOutput(guesses=tuple(guesses), figured_out=tuple(figured))


def run_actor(backend: ActorBackend, prompt: PromptBundle) -> ActorOutput:
    if prompt.stage != Stage.ACTOR:
        raise StageError(Stage.ACTOR, f"got a {prompt.stage.value} prompt")
    out = backend.act(prompt)
    if out.decision_type not in DECISION_TYPES:
        raise StageError(Stage.ACTOR, f"bad decision type {out.decision_type!r}")
    if not isinstance(out.action, ActionCommand):
        raise StageError(Stage.ACTOR, "actor must return exactly one ActionCommand")
    if out.action.action_id == ActionId.ACTION6 and out.action.coords is None:
        raise StageError(Stage.ACTOR, "ACTION6 requires coords")
    return out
