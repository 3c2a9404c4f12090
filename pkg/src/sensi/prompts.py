"""Prompt assembly: the context window as a pure function of store state.

Every pipeline stage gets a PromptBundle built only from (epistemic-state
snapshot, observation, diff, history window). Rendering is byte-stable:
the same inputs produce the same bytes in any process, which is what
makes prompt hashes comparable and runs replayable. Structured sections
(facts, hypotheses, diff, history) are rendered as compact JSON so both
language models and scripted backends can consume them.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .frames import FrameDiff, Observation, RenderedImage
from .store import EpistemicState

COOPERATIVE_FRAMING = (
    "You and your friend are playing a game together: you watch the board and "
    "keep track of what is going on while your friend chooses the actions.")

CURATION_GUIDELINES = (
    "Curate both lists: keep entries that still hold, edit entries when new "
    "information refines them, remove contradicted entries, and promote "
    "confirmed guesses to the figured-out list.")

ACTOR_INSTRUCTIONS = (
    "Choose exactly one action that best resolves the open uncertainties or "
    "advances the current learning target. Label the decision GUESS when it is "
    "exploratory and INFORMED when it follows from figured-out knowledge.")

DIFF_SCHEMA_INSTRUCTIONS = (
    "Compare the two frames and reply with one JSON object using exactly the "
    "keys added, removed, moved, ui_changes, summary. Objects carry color, "
    "cells, bbox, cell_count; moved entries carry prev_bbox, new_bbox, color, "
    "cell_count; ui_changes carry region_name, description.")


class Stage(str, Enum):
    FRAME_DIFF = "frame_diff"
    METRIC_GEN = "metric_gen"
    SENSE_SCORE = "sense_score"
    OBSERVER = "observer"
    ACTOR = "actor"


class PromptInputError(ValueError):
    def __init__(self, stage: Stage, section: str):
        super().__init__(f"{stage.value} prompt is missing its {section} input")
        self.stage = stage
        self.section = section


@dataclass(frozen=True)
class PromptBundle:
    stage: Stage
    sections: tuple[tuple[str, str], ...]
    images: tuple[RenderedImage, ...] = ()

    @property
    def text(self) -> str:
        return "\n\n".join(f"## {name}\n{body}" for name, body in self.sections)

    def section(self, name: str) -> str:
        for n, body in self.sections:
            if n == name:
                return body
        raise KeyError(name)

    def has_section(self, name: str) -> bool:
        return any(n == name for n, _ in self.sections)

    def sha256(self) -> str:
        return hashlib.sha256(self.text.encode("utf-8")).hexdigest()


def _jlist(values: Sequence[str]) -> str:
    return json.dumps(list(values), separators=(",", ":"), ensure_ascii=False)


def _history_section(history: Sequence[dict], window: int) -> str:
    if window <= 0 or not history:
        return "no prior turns"
    return json.dumps(list(history)[-window:], separators=(",", ":"),
                      ensure_ascii=False)


def _sense_feedback(snapshot: EpistemicState) -> str:
    if snapshot.sense_score is None:
        return "no evaluation yet"
    return json.dumps({"sense_score": snapshot.sense_score,
                       "reasoning": snapshot.sense_reasoning or ""},
                      separators=(",", ":"), ensure_ascii=False)


def _target_section(snapshot: EpistemicState) -> str:
    if snapshot.active_item is None:
        return "curriculum complete: win the game using the known facts"
    return snapshot.active_item.item_name


def assemble_prompt(stage: Stage, snapshot: EpistemicState,
                    obs: Observation | None = None,
                    diff: FrameDiff | None = None,
                    prev_obs: Observation | None = None,
                    history: Sequence[dict] = (),
                    history_window: int = 10,
                    v1: bool = False) -> PromptBundle:
    """Render one stage's prompt; deterministic in all arguments."""
    sections: list[tuple[str, str]] = []

    if stage == Stage.FRAME_DIFF:
        if prev_obs is None or obs is None:
            raise PromptInputError(stage, "frames")
        sections = [
            ("task", DIFF_SCHEMA_INSTRUCTIONS),
            ("previous frame", prev_obs.frame_text()),
            ("current frame", obs.frame_text()),
        ]
        return PromptBundle(stage=stage, sections=tuple(sections))

    if stage == Stage.METRIC_GEN:
        if snapshot.active_item is None:
            raise PromptInputError(stage, "learning target")
        sections = [
            ("task", "Given an item the agent needs to learn about a game, write "
                     "the rubric a judge will use to score the learner's grasp of "
                     "it from 1 to 10."),
            ("learning target", snapshot.active_item.item_name),
        ]
        return PromptBundle(stage=stage, sections=tuple(sections))

    if stage == Stage.SENSE_SCORE:
        if snapshot.active_item is None:
            raise PromptInputError(stage, "learning target")
        if snapshot.metric is None:
            raise PromptInputError(stage, "metric")
        sections = [
            ("task", "Score the learner's current understanding of the learning "
                     "target against the rubric, 1 to 10, and explain the score "
                     "briefly."),
            ("learning target", snapshot.active_item.item_name),
            ("metric", snapshot.metric),
            ("facts", _jlist(snapshot.facts)),
            ("figured_out", _jlist(snapshot.figured_out)),
        ]
        return PromptBundle(stage=stage, sections=tuple(sections))

    if stage == Stage.OBSERVER:
        if obs is None:
            raise PromptInputError(stage, "frame")
        if diff is None and not v1:
            raise PromptInputError(stage, "diff")
        sections = [("framing", COOPERATIVE_FRAMING),
                    ("facts", _jlist(snapshot.facts)),
                    ("learning target", _target_section(snapshot)),
                    ("metric", snapshot.metric or "(not yet generated)"),
                    ("sense feedback", _sense_feedback(snapshot))]
        if diff is not None:
            sections.append(("diff", diff.to_json()))
        elif prev_obs is not None:
            sections.append(("previous frame", prev_obs.frame_text()))
        sections.append(("frame", obs.frame_text()
                         + f"\nscore: {obs.score}\nstatus: {obs.status.value}"))
        sections.append(("history", _history_section(history, history_window)))
        sections.append(("hypotheses", json.dumps(
            {"guesses": list(snapshot.guesses),
             "figured_out": list(snapshot.figured_out)},
            separators=(",", ":"), ensure_ascii=False)))
        sections.append(("guidelines", CURATION_GUIDELINES))
        return PromptBundle(stage=stage, sections=tuple(sections))

    if stage == Stage.ACTOR:
        sections = [("framing", COOPERATIVE_FRAMING),
                    ("facts", _jlist(snapshot.facts)),
                    ("learning target", _target_section(snapshot)),
                    ("hypotheses", json.dumps(
                        {"guesses": list(snapshot.guesses),
                         "figured_out": list(snapshot.figured_out)},
                        separators=(",", ":"), ensure_ascii=False)),
                    ("history", _history_section(history, history_window)),
                    ("instructions", ACTOR_INSTRUCTIONS)]
        return PromptBundle(stage=stage, sections=tuple(sections))

    raise ValueError(f"unknown stage {stage!r}")


def observer_prompt_hash_for_store(db_path: str) -> str:
    """Observer prompt hash over a canonical probe observation.

    Used to verify control-plane purity across processes: two processes
    pointed at the same store file must produce the same hash, and any
    fact edit must change it.
    """
    from .env import KeyQuest
    from .frames import FrameDiff
    from .store import Store

    store = Store(db_path, read_only=True)
    try:
        snapshot = store.snapshot_epistemic_state()
    finally:
        store.close()
    probe = KeyQuest().reset()
    bundle = assemble_prompt(Stage.OBSERVER, snapshot, obs=probe,
                             diff=FrameDiff(), history=(), history_window=10)
    return bundle.sha256()
