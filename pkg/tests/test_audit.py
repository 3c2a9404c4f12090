"""Cascade auditor: chain soundness, corruption wrapper, monotonicity."""

from __future__ import annotations

import pytest

from sensi.audit import (
    DECORATION_TEXT,
    CascadeReport,
    GameTruth,
    audit_run,
    inject_corruption,
)
from sensi.backends import ProgrammaticDiffer, direction_claim
from sensi.env import ActionCommand, ActionId, KeyQuest
from sensi.frames import FrameDiff
from sensi.orchestrator import RunConfig, run
from sensi.store import Store


def cascade_config(corruption=None, judge="monotone", max_turns=16):
    return RunConfig(env={"kind": "keyquest", "initial_energy": 20},
                     fixture="builtin:cascade_probe",
                     backends={"differ": "programmatic", "metric": "scripted",
                               "judge": judge, "observer": "rules",
                               "actor": "fixture"},
                     corruption=corruption, max_turns=max_turns,
                     stop_condition="max_turns")


def run_and_audit(config, tmp_path, name):
    db = tmp_path / f"{name}.db"
    result = run(config, db)
    assert result.exit_code == 0, result.error
    store = Store(db, read_only=True)
    try:
        report = audit_run(result.transcript, store)
    finally:
        store.close()
    return report


class TestGameTruth:
    def test_direction_claims(self):
        t = GameTruth()
        assert t.evaluate(direction_claim("ACTION3", "left")) is True
        assert t.evaluate(direction_claim("ACTION3", "right")) is False
        assert t.evaluate(direction_claim("ACTION1", "up")) is True

    def test_color_claims(self):
        t = GameTruth()
        assert t.evaluate("reaching a color-8 cell adds energy pips") is True
        assert t.evaluate("reaching a color-4 cell adds energy pips") is False
        assert t.evaluate("reaching a color-4 cell removes it") is True
        assert t.evaluate("bumping a color-6 cell yields a color-6 key") is True
        assert t.evaluate("a color-6 door opens when holding a color-6 key") is True

    def test_free_text_is_unverifiable(self):
        assert GameTruth().evaluate("the border looks decorative") is None


class TestCleanRun:
    def test_no_false_positives(self, tmp_path):
        report = run_and_audit(cascade_config(), tmp_path, "clean")
        assert report.corrupted_diff_turns == []
        assert report.contaminated_figured_out == 0
        assert report.contaminated_facts_promoted == 0
        assert report.cascade_detected is False
        assert report.spurious_validations == []

    def test_all_grammar_claims_consistent_on_clean_run(self, tmp_path):
        report = run_and_audit(cascade_config(), tmp_path, "clean2")
        verdicts = {t.truth_status for t in report.tags
                    if t.truth_status != "unverifiable"}
        assert verdicts <= {"consistent"}


class TestCascadeReproduction:
    def test_flip_rate_one_produces_full_cascade(self, tmp_path):
        report = run_and_audit(
            cascade_config({"policy": "flip_horizontal_direction",
                            "rate": 1.0, "seed": 0}),
            tmp_path, "flip")
        assert report.cascade_detected is True
        assert report.contaminated_facts_promoted >= 1
        assert report.contaminated_figured_out >= 2
        assert len(report.spurious_validations) >= 1
        turn, score, item_id = report.spurious_validations[0]
        assert score >= 8
        # the corrupted turns are exactly the horizontal-move transitions
        assert set(report.corrupted_diff_turns) == {6, 7, 8, 9}

    def test_low_judge_breaks_chain_at_validation(self, tmp_path):
        # constant low score: contamination happens but never validates
        import json

        fix = tmp_path / "lowjudge.json"
        from sensi.backends import builtin_fixture

        base = builtin_fixture("cascade_probe")
        fix.write_text(json.dumps({
            "actions": base["actions"],
            "judge": {"scores": [3] * 16},
            "metrics": {}}))
        config = RunConfig(env=base["env"], fixture=str(fix),
                           backends={"differ": "programmatic", "metric": "scripted",
                                     "judge": "schedule", "observer": "rules",
                                     "actor": "fixture"},
                           corruption={"policy": "flip_horizontal_direction",
                                       "rate": 1.0, "seed": 0},
                           max_turns=16, stop_condition="max_turns")
        report = run_and_audit(config, tmp_path, "lowjudge")
        assert report.contaminated_figured_out > 0
        assert report.contaminated_facts_promoted == 0
        assert report.cascade_detected is False

    def test_fixed_seed_is_deterministic(self, tmp_path):
        cfg = cascade_config({"policy": "flip_horizontal_direction",
                              "rate": 0.5, "seed": 7})
        a = run_and_audit(cfg, tmp_path, "det-a")
        b = run_and_audit(cfg, tmp_path, "det-b")
        assert a.corrupted_diff_turns == b.corrupted_diff_turns
        assert a.contaminated_figured_out == b.contaminated_figured_out

    def test_rate_monotonicity_in_expectation(self, tmp_path):
        means = []
        for rate in (0.25, 0.5, 1.0):
            total = 0
            for seed in range(10):
                cfg = cascade_config({"policy": "flip_horizontal_direction",
                                      "rate": rate, "seed": seed})
                report = run_and_audit(cfg, tmp_path, f"mono-{rate}-{seed}")
                total += report.contaminated_figured_out
            means.append(total / 10)
        assert means == sorted(means), means


class TestIndeterminateAudit:
    def test_no_ground_truth_is_indeterminate(self, tmp_path):
        db = tmp_path / "nogt.db"
        result = run(cascade_config(), db)
        store = Store(db, read_only=True)
        # wipe the stored ground truth to mimic a remote run
        writer = Store(db)
        writer._conn.execute("DELETE FROM inputs WHERE key='gt_diff'")
        writer.close()
        transcript = result.transcript
        transcript.ground_truth_diffs = None
        try:
            report = audit_run(transcript, store)
        finally:
            store.close()
        assert report.cascade_detected is None
        assert {t.truth_status for t in report.tags} == {"unverifiable"}


class TestCorruptionWrapper:
    def _one_move_diff(self):
        env = KeyQuest()
        prev = env.reset()
        curr = env.step(ActionCommand(ActionId.ACTION3))
        return ProgrammaticDiffer(env.hud_regions()).diff(prev, curr)

    def test_flip_negates_horizontal_displacement(self):
        diff = self._one_move_diff()
        assert all(m.displacement == (0, -1) for m in diff.moved)
        wrapper = inject_corruption(_Fixed(diff), "flip_horizontal_direction", 1.0)
        out = wrapper.diff(None, None)
        assert all(m.displacement == (0, 1) for m in out.moved)
        assert len(out.moved) == len(diff.moved)

    def test_relabel_replaces_ui_descriptions(self):
        diff = self._one_move_diff()
        wrapper = inject_corruption(_Fixed(diff), "relabel_ui_as_decoration", 1.0)
        out = wrapper.diff(None, None)
        assert all(u.description == DECORATION_TEXT for u in out.ui_changes)
        assert len(out.ui_changes) == len(diff.ui_changes) >= 1

    def test_drop_moves_empties_moved_and_summary(self):
        diff = self._one_move_diff()
        wrapper = inject_corruption(_Fixed(diff), "drop_moves", 1.0)
        out = wrapper.diff(None, None)
        assert out.moved == ()
        assert "0 moved" in out.summary

    def test_rate_zero_rejected(self):
        with pytest.raises(ValueError, match="plain backend"):
            inject_corruption(_Fixed(FrameDiff()), "drop_moves", 0.0)

    def test_unknown_policy_rejected(self):
        with pytest.raises(ValueError, match="unknown corruption policy"):
            inject_corruption(_Fixed(FrameDiff()), "invert_colors", 1.0)

    def test_seeded_corruption_sets_identical(self):
        diff = self._one_move_diff()
        picks = []
        for _ in range(2):
            wrapper = inject_corruption(_Fixed(diff), "flip_horizontal_direction",
                                        0.5, seed=42)
            outcomes = [wrapper.diff(None, None) != diff for _ in range(100)]
            picks.append(outcomes)
        assert picks[0] == picks[1]
        assert any(picks[0]) and not all(picks[0])

    def test_corrupted_diff_still_validates(self):
        from sensi.frames import parse_diff

        diff = self._one_move_diff()
        for policy in ("flip_horizontal_direction", "relabel_ui_as_decoration",
                       "drop_moves"):
            out = inject_corruption(_Fixed(diff), policy, 1.0).diff(None, None)
            assert parse_diff(out.to_json()) == out


class _Fixed:
    def __init__(self, diff):
        self._diff = diff

    def diff(self, prev, curr):
        return self._diff


class TestReportShape:
    def test_report_serializes_and_graph_renders(self, tmp_path):
        report = run_and_audit(
            cascade_config({"policy": "flip_horizontal_direction",
                            "rate": 1.0, "seed": 0}),
            tmp_path, "shape")
        payload = report.to_dict()
        assert isinstance(report.to_json(), str)
        graph = report.provenance_graph()
        kinds = {n["type"] for n in graph["nodes"]}
        assert {"diff", "validation"} <= kinds
        assert any(e["kind"] == "derived_from" for e in graph["edges"])
