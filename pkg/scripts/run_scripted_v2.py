#!/usr/bin/env python3
"""Run the shipped scripted v2 curriculum and print the headline numbers.

Usage: python scripts/run_scripted_v2.py [workdir]

Produces workdir/scripted_v2.db plus manifest/transcript/metrics files,
prints per-item completion turns and the sample-efficiency ratios, then
verifies the run with a full replay.
"""

from __future__ import annotations

import sys
from pathlib import Path

from sensi.backends import builtin_fixture
from sensi.orchestrator import RunConfig, replay, run


def main() -> int:
    workdir = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("out")
    workdir.mkdir(parents=True, exist_ok=True)
    db = workdir / "scripted_v2.db"
    if db.exists():
        db.unlink()

    fixture = builtin_fixture("v2_scripted_run")
    config = RunConfig(env=fixture["env"])
    result = run(config, db)
    m = result.metrics

    print(f"stop reason:            {result.stop_reason}")
    print(f"total interactions:     {m.total_interactions}")
    print(f"curriculum completed:   turn {m.curriculum_completion_turn}")
    for item_id, turn in sorted(m.per_item_completion_turns.items()):
        print(f"  item {item_id} completed at turn {turn}")
    for baseline, ratio in m.efficiency_ratios:
        print(f"efficiency vs {baseline:>5} interactions: {ratio}x")

    report = replay(db)
    print(f"replay match:           {report.match} "
          f"({report.turns_compared} turns compared)")
    print(f"artifacts in:           {workdir}/")
    return 0 if (result.exit_code == 0 and report.match) else 1


if __name__ == "__main__":
    sys.exit(main())
