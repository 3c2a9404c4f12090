"""Stage wrappers and scripted backends: contracts, caching, claim rules."""

from __future__ import annotations

import pytest

from sensi.backends import (
    ENERGY_COST_CLAIM,
    CyclingActor,
    MonotoneJudge,
    ProgrammaticDiffer,
    RuleBasedObserver,
    ScheduleJudge,
    ScriptedActor,
    ScriptedDiffer,
    ScriptedMetricGen,
    TableObserver,
    builtin_fixture,
    direction_claim,
)
from sensi.env import ActionCommand, ActionId, KeyQuest
from sensi.frames import FrameDiff
from sensi.prompts import Stage, assemble_prompt
from sensi.stages import (
    ActorOutput,
    ObserverOutput,
    SenseEvaluation,
    StageError,
    run_actor,
    run_frame_diff,
    run_metric_gen,
    run_observer,
    run_sense_score,
)
from sensi.store import EpistemicState, init_store


def snap(guesses=(), figured_out=(), facts=("f",)):
    return EpistemicState(turn_index=1, facts=tuple(facts), guesses=tuple(guesses),
                          figured_out=tuple(figured_out), active_item=None,
                          sense_score=None, sense_reasoning=None)


def observer_prompt(diff=None, guesses=(), figured_out=(), facts=(),
                    history=()):
    obs = KeyQuest().reset()
    return assemble_prompt(Stage.OBSERVER, snap(guesses, figured_out, facts),
                           obs=obs, diff=diff or FrameDiff(), history=history)


class TestJudges:
    def test_monotone_formula(self):
        j = MonotoneJudge()
        ev = j.score("item", "metric", [], ["a", "b", "c", "d"])
        assert ev.sense_score == 6
        assert j.score("item", "metric", [], []).sense_score == 2
        assert j.score("item", "metric", [], ["x"] * 20).sense_score == 10

    def test_schedule_judge_follows_fixture(self):
        j = ScheduleJudge([3, 8], ["first", "second"])
        assert j.score("i", "m", [], []).sense_score == 3
        ev = j.score("i", "m", [], [])
        assert ev.sense_score == 8 and ev.reasoning == "second"
        with pytest.raises(StageError, match="exhausted"):
            j.score("i", "m", [], [])

    def test_wrapper_rejects_out_of_range(self):
        class Bad:
            def score(self, *a):
                return SenseEvaluation(sense_score=11, reasoning="r")

        with pytest.raises(StageError, match="outside"):
            run_sense_score(Bad(), "i", "m", [], [])


class TestMetricGen:
    def test_fixture_rubric_served(self, tmp_path):
        fixture = builtin_fixture("v2_scripted_run")
        gen = ScriptedMetricGen(fixture["metrics"])
        store = init_store(tmp_path / "m.db", "g", "c")
        item = store.items()[0]
        text = run_metric_gen(gen, item)
        assert text == fixture["metrics"]["learn what each action does in the game"]
        store.close()

    def test_cached_metric_skips_backend(self, tmp_path):
        gen = ScriptedMetricGen({})
        store = init_store(tmp_path / "m2.db", "g", "c")
        item = store.items()[0]
        first = run_metric_gen(gen, item)
        store.set_item_metric(item.item_id, first)
        item = store.get_item(item.item_id)
        second = run_metric_gen(gen, item)
        assert second == first
        assert gen.calls == 1  # second call served from the item's cache
        store.close()

    def test_empty_rubric_rejected(self, tmp_path):
        class Empty:
            def generate_metric(self, name):
                return "  "

        store = init_store(tmp_path / "m3.db", "g", "c")
        with pytest.raises(StageError, match="empty"):
            run_metric_gen(Empty(), store.items()[0])
        store.close()


class TestDiffers:
    def test_programmatic_empty_on_identical(self):
        env = KeyQuest()
        obs = env.reset()
        d = ProgrammaticDiffer(env.hud_regions()).diff(obs, obs)
        assert d.is_empty

    def test_scripted_differ_replays_and_exhausts(self):
        env = KeyQuest()
        obs = env.reset()
        canned = FrameDiff(summary="canned")
        d = ScriptedDiffer([canned])
        assert run_frame_diff(d, obs, obs) == canned
        with pytest.raises(StageError, match="exhausted"):
            run_frame_diff(d, obs, obs)


class TestObserverRules:
    def _move_diff(self, action_pair):
        env = KeyQuest()
        prev = env.reset()
        curr = env.step(ActionCommand(ActionId(action_pair)))
        return ProgrammaticDiffer(env.hud_regions()).diff(prev, curr)

    def test_movement_claim_guess_then_promote(self):
        diff = self._move_diff("ACTION3")
        history = [{"turn": 1, "action": "ACTION3", "decision": "GUESS",
                    "summary": diff.summary, "score": 0, "status": "NOT_FINISHED"}]
        obs_backend = RuleBasedObserver()
        out1 = run_observer(obs_backend,
                            observer_prompt(diff=diff, history=history))
        claim = direction_claim("ACTION3", "left")
        assert claim in out1.guesses and claim not in out1.figured_out
        out2 = run_observer(obs_backend,
                            observer_prompt(diff=diff, guesses=out1.guesses,
                                            figured_out=out1.figured_out,
                                            history=history))
        assert claim in out2.figured_out

    def test_energy_claim_derived(self):
        diff = self._move_diff("ACTION7")
        history = [{"turn": 1, "action": "ACTION7", "decision": "GUESS",
                    "summary": diff.summary, "score": 0, "status": "NOT_FINISHED"}]
        out = run_observer(RuleBasedObserver(),
                           observer_prompt(diff=diff, history=history))
        assert ENERGY_COST_CLAIM in out.guesses

    def test_contradicted_direction_claim_removed(self):
        diff = self._move_diff("ACTION3")
        history = [{"turn": 5, "action": "ACTION3", "decision": "GUESS",
                    "summary": diff.summary, "score": 0, "status": "NOT_FINISHED"}]
        wrong = direction_claim("ACTION3", "right")
        out = run_observer(RuleBasedObserver(),
                           observer_prompt(diff=diff, figured_out=(wrong,),
                                           history=history))
        assert wrong not in out.figured_out and wrong not in out.guesses
        assert direction_claim("ACTION3", "left") in out.guesses

    def test_claims_already_in_facts_dropped(self):
        diff = self._move_diff("ACTION3")
        history = [{"turn": 1, "action": "ACTION3", "decision": "GUESS",
                    "summary": diff.summary, "score": 0, "status": "NOT_FINISHED"}]
        claim = direction_claim("ACTION3", "left")
        out = run_observer(RuleBasedObserver(),
                           observer_prompt(diff=diff, facts=(claim,),
                                           history=history))
        assert claim not in out.guesses and claim not in out.figured_out

    def test_identical_prompts_identical_outputs(self):
        diff = self._move_diff("ACTION1")
        history = [{"turn": 1, "action": "ACTION1", "decision": "GUESS",
                    "summary": diff.summary, "score": 0, "status": "NOT_FINISHED"}]
        p = observer_prompt(diff=diff, history=history)
        backend = RuleBasedObserver()
        assert backend.observe(p) == backend.observe(p)


class TestObserverWrapper:
    def test_duplicates_deduplicated_order_preserved(self):
        class Dup:
            def observe(self, prompt):
                return ObserverOutput(guesses=("a", "b", "a", "c"),
                                      figured_out=("x", "x"))

        out = run_observer(Dup(), observer_prompt())
        assert out.guesses == ("a", "b", "c")
        assert out.figured_out == ("x",)

    def test_entry_in_both_lists_kept_in_figured_out(self):
        class Both:
            def observe(self, prompt):
                return ObserverOutput(guesses=("dual", "g"), figured_out=("dual",))

        out = run_observer(Both(), observer_prompt())
        assert out.figured_out == ("dual",)
        assert out.guesses == ("g",)

    def test_table_observer_keyed_on_diff_hash(self):
        env = KeyQuest()
        prev = env.reset()
        curr = env.step(ActionCommand(ActionId.ACTION4))
        diff = ProgrammaticDiffer(env.hud_regions()).diff(prev, curr)
        key = diff.content_hash()[:12]
        backend = TableObserver(keyed={key: {"guesses": ["from table"]}})
        out = run_observer(backend, observer_prompt(diff=diff))
        assert out.guesses == ("from table",)


class TestActor:
    def test_scripted_schedule_and_decision_rule(self):
        actor = ScriptedActor(["ACTION1", "ACTION2"])
        out = run_actor(actor, assemble_prompt(Stage.ACTOR, snap()))
        assert out.action.action_id == ActionId.ACTION1
        assert out.decision_type == "GUESS"  # nothing known yet -> explore
        out2 = run_actor(actor, assemble_prompt(
            Stage.ACTOR, snap(guesses=("g",), figured_out=("k1", "k2"))))
        assert out2.decision_type == "INFORMED"

    def test_guess_when_guesses_dominate(self):
        actor = CyclingActor()
        out = run_actor(actor, assemble_prompt(
            Stage.ACTOR, snap(guesses=("a", "b", "c"), figured_out=("k",))))
        assert out.decision_type == "GUESS"

    def test_action6_without_coords_is_stage_error(self):
        class Bad:
            def act(self, prompt):
                return ActorOutput(decision_type="GUESS",
                                   action=ActionCommand.__new__(ActionCommand))

        # an ActionCommand can never exist without coords for ACTION6, so
        # simulate a backend that bypasses validation
        bad_action = ActionCommand.__new__(ActionCommand)
        object.__setattr__(bad_action, "action_id", ActionId.ACTION6)
        object.__setattr__(bad_action, "coords", None)

        class Bad2:
            def act(self, prompt):
                return ActorOutput(decision_type="GUESS", action=bad_action)

        with pytest.raises(StageError, match="coords"):
            run_actor(Bad2(), assemble_prompt(Stage.ACTOR, snap()))

    def test_bad_decision_type_rejected(self):
        class Bad:
            def act(self, prompt):
                return ActorOutput(decision_type="MAYBE",
                                   action=ActionCommand(ActionId.ACTION1))

        with pytest.raises(StageError, match="decision type"):
            run_actor(Bad(), assemble_prompt(Stage.ACTOR, snap()))
