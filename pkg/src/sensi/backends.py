"""Deterministic stage backends: programmatic differ, scripted fixtures,
and a rule-based observer that derives claims from diff content.

The rule-based observer is the honest counterpart of a perception-driven
hypothesis writer: it only believes what the diff shows, promotes a claim
after seeing it twice, and drops contradicted direction claims. Feeding
it corrupted diffs therefore contaminates its figured-out list exactly
the way a misperceiving pipeline would be contaminated.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .env import ActionCommand, ActionId
from .frames import FrameDiff, Observation, Region, parse_diff, programmatic_diff
from .prompts import PromptBundle, Stage
from .stages import ActorOutput, ObserverOutput, SenseEvaluation, StageError

PIP_COLOR_DEFAULT = 3

HUD_CELL_RE = re.compile(r"\((\d+),(\d+),(\d+)\) (\d+)->(\d+)")
DIRECTION_NAMES = {(-1, 0): "up", (1, 0): "down", (0, -1): "left", (0, 1): "right"}
MOVE_CLAIM_PREFIX = "{action} moves the player one cell "

ENERGY_COST_CLAIM = "every action costs one energy pip"


def direction_claim(action: str, direction: str) -> str:
    return f"{action} moves the player one cell {direction}"


def blocked_claim(action: str) -> str:
    return f"{action} is blocked by solid cells"


def pickup_claim(color: int) -> str:
    return f"reaching a color-{color} cell adds energy pips"


def vanish_claim(color: int) -> str:
    return f"reaching a color-{color} cell removes it"


def key_claim(color: int) -> str:
    return f"bumping a color-{color} cell yields a color-{color} key"


def door_claim(color: int) -> str:
    return f"a color-{color} door opens when holding a color-{color} key"


class ProgrammaticDiffer:
    """Ground-truth-grade perception: delegates to the deterministic differ."""

    def __init__(self, hud_regions: Sequence[Region] = (), background: int = 0):
        self.hud_regions = list(hud_regions)
        self.background = background

    def diff(self, prev: Observation, curr: Observation) -> FrameDiff:
        return programmatic_diff(prev, curr, self.hud_regions, self.background)


class ScriptedDiffer:
    """Replays a canned diff transcript (possibly deliberately wrong)."""

    def __init__(self, diffs: Sequence[FrameDiff]):
        self.diffs = list(diffs)
        self.calls = 0

    def diff(self, prev: Observation, curr: Observation) -> FrameDiff:
        if self.calls >= len(self.diffs):
            raise StageError(Stage.FRAME_DIFF,
                             f"scripted diff transcript exhausted at call {self.calls}")
        out = self.diffs[self.calls]
        self.calls += 1
        return out


class ScriptedMetricGen:
    """Fixture rubrics per item name, with a deterministic fallback template."""

    def __init__(self, rubrics: dict[str, str] | None = None):
        self.rubrics = dict(rubrics or {})
        self.calls = 0

    def generate_metric(self, item_name: str) -> str:
        self.calls += 1
        if item_name in self.rubrics:
            return self.rubrics[item_name]
        return (f"Score 1-10 how completely the learner has verified: {item_name}. "
                "1 means nothing verified by observation; 10 means every aspect "
                "confirmed by direct observation.")


class MonotoneJudge:
    """Sense score grows with the confirmed-observation count: min(10, 2+|K|)."""

    def __init__(self):
        self.calls = 0

    def score(self, item_name: str, metric: str, facts: Sequence[str],
              figured_out: Sequence[str]) -> SenseEvaluation:
        self.calls += 1
        n = len(figured_out)
        return SenseEvaluation(
            sense_score=min(10, 2 + n),
            reasoning=f"{n} confirmed observations weighed against the rubric")


class ScheduleJudge:
    """Scores come from a fixed per-call schedule (fixture-pinned boundaries)."""

    def __init__(self, scores: Sequence[int], reasonings: Sequence[str] | None = None):
        self.scores = list(scores)
        self.reasonings = list(reasonings or [])
        self.calls = 0

    def score(self, item_name: str, metric: str, facts: Sequence[str],
              figured_out: Sequence[str]) -> SenseEvaluation:
        if self.calls >= len(self.scores):
            raise StageError(Stage.SENSE_SCORE,
                             f"judge schedule exhausted at call {self.calls}")
        value = self.scores[self.calls]
        reasoning = (self.reasonings[self.calls] if self.calls < len(self.reasonings)
                     else f"scheduled evaluation {self.calls + 1}: progress on "
                          f"'{item_name}' judged {value}/10")
        self.calls += 1
        return SenseEvaluation(sense_score=value, reasoning=reasoning)


@dataclass
class _PromptView:
    """Machine-readable slice of an observer/actor prompt."""

    guesses: list[str]
    figured_out: list[str]
    facts: list[str]
    diff: FrameDiff | None
    last_action: str | None

    @classmethod
    def parse(cls, prompt: PromptBundle) -> "_PromptView":
        hyp = json.loads(prompt.section("hypotheses"))
        facts = json.loads(prompt.section("facts")) if prompt.has_section("facts") else []
        diff = None
        if prompt.has_section("diff"):
            diff = parse_diff(prompt.section("diff"))
        last_action = None
        if prompt.has_section("history"):
            raw = prompt.section("history")
            if raw != "no prior turns":
                entries = json.loads(raw)
                if entries:
                    last_action = entries[-1].get("action")
        return cls(guesses=list(hyp["guesses"]), figured_out=list(hyp["figured_out"]),
                   facts=list(facts), diff=diff, last_action=last_action)


def _hud_transitions(diff: FrameDiff) -> list[tuple[int, int, int, int, int]]:
    out = []
    for change in diff.ui_changes:
        for m in HUD_CELL_RE.finditer(change.description):
            out.append(tuple(int(g) for g in m.groups()))
    return out


def derive_claims(view: _PromptView, pip_color: int = PIP_COLOR_DEFAULT) -> list[str]:
    """Deterministic claims a careful watcher could state from one diff."""
    diff = view.diff
    if diff is None or view.last_action is None:
        return []
    if "level transition" in diff.summary or "status" in diff.summary:
        return []  # board changed wholesale; nothing attributable to one action
    action = view.last_action
    claims: list[str] = []

    hud = _hud_transitions(diff)
    pip_added = sum(1 for _, _, _, old, new in hud if old == 0 and new == pip_color)
    pip_removed = sum(1 for _, _, _, old, new in hud if old == pip_color and new == 0)
    pip_net = pip_added - pip_removed
    keys_added = sorted({new for _, _, _, old, new in hud
                         if old == 0 and new not in (0, pip_color)})
    keys_removed = sorted({old for _, _, _, old, new in hud
                           if new == 0 and old not in (0, pip_color)})

    displacements = {m.displacement for m in diff.moved}
    player_moved = (len(diff.moved) >= 1 and len(displacements) == 1
                    and next(iter(displacements)) in DIRECTION_NAMES)

    if action in ("ACTION1", "ACTION2", "ACTION3", "ACTION4"):
        if player_moved:
            claims.append(direction_claim(action, DIRECTION_NAMES[next(iter(displacements))]))
        elif not diff.moved and not diff.added and not diff.removed and not keys_added:
            claims.append(blocked_claim(action))

    if pip_net == -1 and action != "RESET":
        claims.append(ENERGY_COST_CLAIM)

    for color in keys_added:
        claims.append(key_claim(color))

    removed_colors = sorted({o.color for o in diff.removed})
    for color in removed_colors:
        if color in keys_removed:
            claims.append(door_claim(color))
        elif player_moved:
            claims.append(vanish_claim(color))
            if pip_net > 0:
                claims.append(pickup_claim(color))

    return claims


_DIR_CLAIM_RE = re.compile(r"^(ACTION\d) moves the player one cell (up|down|left|right)$")


class RuleBasedObserver:
    """Honest scripted observer: believe the diff, promote on repetition.

    Stateless across calls: both hypothesis lists come in through the
    prompt, so identical prompts always produce identical outputs.
    """

    def __init__(self, pip_color: int = PIP_COLOR_DEFAULT):
        self.pip_color = pip_color
        self.calls = 0

    def observe(self, prompt: PromptBundle) -> ObserverOutput:
        self.calls += 1
        view = _PromptView.parse(prompt)
        facts = set(view.facts)
        new_claims = derive_claims(view, self.pip_color)

        # direction claims contradict same-action claims with another direction
        contradicted: set[str] = set()
        for claim in new_claims:
            m = _DIR_CLAIM_RE.match(claim)
            if not m:
                continue
            for old in view.guesses + view.figured_out:
                om = _DIR_CLAIM_RE.match(old)
                if om and om.group(1) == m.group(1) and old != claim:
                    contradicted.add(old)

        kept_figured = [k for k in view.figured_out
                        if k not in contradicted and k not in facts]
        promoted = [c for c in new_claims
                    if c in view.guesses and c not in contradicted
                    and c not in kept_figured and c not in facts]
        figured = kept_figured + promoted

        kept_guesses = [g for g in view.guesses
                        if g not in contradicted and g not in figured and g not in facts]
        fresh = [c for c in new_claims
                 if c not in figured and c not in kept_guesses and c not in facts]
        guesses = kept_guesses + fresh
        return ObserverOutput(guesses=tuple(guesses), figured_out=tuple(figured))


class TableObserver:
    """Fixture lists keyed by diff content hash, with a call-index fallback."""

    def __init__(self, entries: Sequence[dict] = (),
                 keyed: dict[str, dict] | None = None):
        self.entries = list(entries)
        self.keyed = dict(keyed or {})
        self.calls = 0

    def observe(self, prompt: PromptBundle) -> ObserverOutput:
        entry = None
        if self.keyed and prompt.has_section("diff"):
            digest = parse_diff(prompt.section("diff")).content_hash()[:12]
            entry = self.keyed.get(digest)
        if entry is None:
            if self.calls >= len(self.entries):
                raise StageError(Stage.OBSERVER,
                                 f"observer fixture exhausted at call {self.calls}")
            entry = self.entries[self.calls]
        self.calls += 1
        return ObserverOutput(guesses=tuple(entry.get("guesses", ())),
                              figured_out=tuple(entry.get("figured_out", ())))


def _decision_type(prompt: PromptBundle) -> str:
    """Exploration while guesses dominate (or nothing is known yet)."""
    hyp = json.loads(prompt.section("hypotheses"))
    n_guess, n_known = len(hyp["guesses"]), len(hyp["figured_out"])
    if n_guess > n_known or (n_guess == 0 and n_known == 0):
        return "GUESS"
    return "INFORMED"


class ScriptedActor:
    """Plays a fixed action schedule; decision type follows the epistemic state.

    GUESS while the guesses list outweighs the figured-out list, INFORMED
    once confirmed knowledge dominates.
    """

    def __init__(self, actions: Sequence[ActionCommand | str | dict]):
        self.actions = [self._coerce(a) for a in actions]
        self.calls = 0

    @staticmethod
    def _coerce(a) -> ActionCommand:
        if isinstance(a, ActionCommand):
            return a
        if isinstance(a, str):
            return ActionCommand(ActionId(a))
        return ActionCommand.from_dict(a)

    def act(self, prompt: PromptBundle) -> ActorOutput:
        if self.calls >= len(self.actions):
            raise StageError(Stage.ACTOR,
                             f"actor schedule exhausted at call {self.calls}")
        action = self.actions[self.calls]
        self.calls += 1
        return ActorOutput(decision_type=_decision_type(prompt), action=action)


class CyclingActor:
    """Endless deterministic exploration: cycles the movement actions."""

    CYCLE = ("ACTION1", "ACTION2", "ACTION3", "ACTION4",
             "ACTION1", "ACTION1", "ACTION2", "ACTION2",
             "ACTION3", "ACTION3", "ACTION4", "ACTION4")

    def __init__(self):
        self.calls = 0

    def act(self, prompt: PromptBundle) -> ActorOutput:
        action = ActionCommand(ActionId(self.CYCLE[self.calls % len(self.CYCLE)]))
        self.calls += 1
        return ActorOutput(decision_type=_decision_type(prompt), action=action)


# -- fixture files -------------------------------------------------------------


def load_fixture(path: str | Path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def builtin_fixture(name: str) -> dict:
    from importlib import resources

    text = resources.files("sensi").joinpath(f"fixtures/{name}.json").read_text("utf-8")
    return json.loads(text)


def fixture_diffs(raw: Sequence[dict]) -> list[FrameDiff]:
    return [parse_diff(json.dumps(d)) for d in raw]
