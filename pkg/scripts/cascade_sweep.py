#!/usr/bin/env python3
"""Corruption-rate sweep: how perception error contaminates the fact base.

Runs the short probe curriculum with the flip policy at several rates and
seeds, auditing each run against simulator ground truth. Prints mean
contaminated figured-out counts, contaminated facts, and how often the
full cascade chain was witnessed.

Usage: python scripts/cascade_sweep.py [--seeds N] [--rates 0.25,0.5,1.0]
"""

from __future__ import annotations

import argparse
import sys
import tempfile
from pathlib import Path

from sensi.audit import audit_run
from sensi.orchestrator import RunConfig, run
from sensi.store import Store


def probe_config(rate: float | None, seed: int) -> RunConfig:
    corruption = None
    if rate:
        corruption = {"policy": "flip_horizontal_direction", "rate": rate,
                      "seed": seed}
    return RunConfig(env={"kind": "keyquest", "initial_energy": 20},
                     fixture="builtin:cascade_probe",
                     backends={"differ": "programmatic", "metric": "scripted",
                               "judge": "monotone", "observer": "rules",
                               "actor": "fixture"},
                     corruption=corruption, max_turns=16,
                     stop_condition="max_turns")


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--seeds", type=int, default=10)
    parser.add_argument("--rates", default="0.25,0.5,1.0")
    args = parser.parse_args()
    rates = [float(r) for r in args.rates.split(",")]

    print(f"{'rate':>6} | {'mean contaminated K':>20} | "
          f"{'mean contaminated facts':>24} | {'cascade rate':>12}")
    with tempfile.TemporaryDirectory() as tmp:
        for rate in [None] + rates:
            k_total = fact_total = cascades = 0
            for seed in range(args.seeds):
                db = Path(tmp) / f"sweep-{rate}-{seed}.db"
                result = run(probe_config(rate, seed), db)
                store = Store(db, read_only=True)
                try:
                    report = audit_run(result.transcript, store)
                finally:
                    store.close()
                k_total += report.contaminated_figured_out
                fact_total += report.contaminated_facts_promoted
                cascades += 1 if report.cascade_detected else 0
            label = "0 (off)" if rate is None else f"{rate}"
            print(f"{label:>6} | {k_total / args.seeds:>20.2f} | "
                  f"{fact_total / args.seeds:>24.2f} | "
                  f"{cascades}/{args.seeds:>10}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
