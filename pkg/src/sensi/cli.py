"""Command-line surface: run, replay, audit, inspect, plot, seed, serve."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .env import ConfigError
from .orchestrator import (
    EXIT_ENV_ERROR,
    EXIT_STAGE_ERROR,
    ReplayReport,
    RunConfig,
    RunConfigError,
    RunController,
    replay,
    run,
)
from .store import ExternalEdit, Store, StoreError, init_store

EXIT_USAGE = 64
EXIT_CONFIG = 65


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def build_parser() -> _Parser:
    p = _Parser(prog="sensi", description="curriculum-learning game agent engine")
    sub = p.add_subparsers(dest="command", required=True)

    runp = sub.add_parser("run", help="execute a run from a config file")
    runp.add_argument("--config", help="run config JSON (defaults to the shipped "
                                       "scripted v2 fixture run)")
    runp.add_argument("--db", required=True, help="store file to create")
    runp.add_argument("--mode", choices=["v1", "v2"])
    runp.add_argument("--max-turns", type=int)
    runp.add_argument("--game-config", help="game config JSON for the built-in env")
    runp.add_argument("--trace", action="store_true",
                      help="write per-turn stage traces beside the db")
    runp.add_argument("--bind", help="host:port for the control API during the run")
    runp.add_argument("--ui-dir", help="static dashboard directory for the API")
    runp.add_argument("--pause", action="store_true",
                      help="start paused (resume via POST /run/resume)")

    rep = sub.add_parser("replay", help="re-execute a run and verify it matches")
    rep.add_argument("--db", required=True)
    rep.add_argument("--config", help="override config (defaults to the manifest)")

    aud = sub.add_parser("audit", help="cascade report for a recorded run")
    aud.add_argument("--db", required=True)

    ins = sub.add_parser("inspect", help="dump one store table as JSON lines")
    ins.add_argument("--db", required=True)
    ins.add_argument("--table", required=True)

    plot = sub.add_parser("plot", help="sense-score timeline as CSV + SVG")
    plot.add_argument("--db", required=True)

    seed = sub.add_parser("seed", help="apply curriculum/fact edits from a file")
    seed.add_argument("--db", required=True)
    seed.add_argument("--file", required=True,
                      help="JSON list of {kind, payload} edits")
    seed.add_argument("--game-id", default="keyquest")
    seed.add_argument("--card-id", default="card-1")

    srv = sub.add_parser("serve", help="control API over an existing store")
    srv.add_argument("--db", required=True)
    srv.add_argument("--bind", default="127.0.0.1:8356")
    srv.add_argument("--ui-dir")
    return p


def _parse_bind(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    return (host or "127.0.0.1", int(port))


def _cmd_run(args) -> int:
    try:
        if args.config:
            config = RunConfig.from_file(args.config)
        else:
            from .backends import builtin_fixture

            fixture = builtin_fixture("v2_scripted_run")
            config = RunConfig(env=fixture["env"])
        if args.mode:
            config = RunConfig.from_dict({**config.to_dict(), "mode": args.mode})
        if args.max_turns:
            config = RunConfig.from_dict({**config.to_dict(),
                                          "max_turns": args.max_turns})
        if args.game_config:
            env = dict(config.env)
            env.update({"kind": "keyquest", "config_path": args.game_config})
            config = RunConfig.from_dict({**config.to_dict(), "env": env})
        if args.trace:
            config = RunConfig.from_dict({**config.to_dict(), "trace": True})
    except (RunConfigError, ConfigError, OSError, json.JSONDecodeError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    controller = None
    server = None
    if args.bind:
        from .control_api import serve_control_api

        controller = RunController()
        if args.pause:
            controller.pause()
        # the store file must exist before the API can read it
        clock_store = init_store(args.db, config.game_id, config.card_id,
                                 curriculum=config.curriculum,
                                 seed_facts=config.seed_facts)
        clock_store.close()
        server = serve_control_api(args.db, controller,
                                   bind=_parse_bind(args.bind),
                                   ui_dir=args.ui_dir)
        host, port = server.server_address[:2]
        print(f"control api listening on http://{host}:{port}", flush=True)

    try:
        result = run(config, args.db, controller=controller)
    except Exception:
        if server is not None:
            server.shutdown()
        raise

    m = result.metrics
    print(f"stop: {result.stop_reason}")
    if result.error:
        print(f"error: {result.error}", file=sys.stderr)
    print(f"total interactions: {m.total_interactions}")
    print(f"curriculum completion turn: {m.curriculum_completion_turn}")
    for item_id, turn in sorted(m.per_item_completion_turns.items()):
        print(f"  item {item_id} completed at turn {turn}")
    print(f"levels won: {m.levels_won}")
    for baseline, ratio in m.efficiency_ratios:
        print(f"sample efficiency vs {baseline}: {ratio}x")
    if server is not None:
        # the steering plane outlives the run for post-hoc inspection
        print("run finished; control api still serving (ctrl-c to exit)",
              flush=True)
        try:
            import time

            while True:
                time.sleep(3600)
        except KeyboardInterrupt:
            pass
        finally:
            server.shutdown()
    return result.exit_code


def _cmd_replay(args) -> int:
    config = RunConfig.from_file(args.config) if args.config else None
    report: ReplayReport = replay(args.db, config=config)
    print(json.dumps(report.to_dict(), indent=2))
    return 0 if report.match else 1


def _cmd_audit(args) -> int:
    from .audit import audit_run

    store = Store(args.db, read_only=True)
    try:
        report = audit_run(None, store)
    finally:
        store.close()
    payload = report.to_dict()
    payload["provenance_graph"] = report.provenance_graph()
    print(json.dumps(payload, indent=2, sort_keys=True))
    return 0


def _cmd_inspect(args) -> int:
    store = Store(args.db, read_only=True)
    try:
        rows = store.table_dump(args.table)
    except StoreError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    finally:
        store.close()
    for row in rows:
        print(json.dumps(row, sort_keys=True))
    print(f"{len(rows)} row(s) in {args.table}", file=sys.stderr)
    return 0


def _cmd_plot(args) -> int:
    from .viz import timeline_csv, timeline_svg

    store = Store(args.db, read_only=True)
    try:
        csv_text = timeline_csv(store)
        threshold = 8
        items = store.items()
        if items:
            threshold = items[0].threshold
        svg_text = timeline_svg(store, threshold=threshold)
    finally:
        store.close()
    base = Path(args.db)
    csv_path = base.with_suffix(".timeline.csv")
    svg_path = base.with_suffix(".timeline.svg")
    csv_path.write_text(csv_text, encoding="utf-8")
    svg_path.write_text(svg_text, encoding="utf-8")
    sys.stdout.write(csv_text)
    print(f"wrote {csv_path} and {svg_path}", file=sys.stderr)
    return 0


def _cmd_seed(args) -> int:
    try:
        with open(args.file, "r", encoding="utf-8") as fh:
            edits = json.load(fh)
        if not isinstance(edits, list):
            raise ValueError("edit file must hold a JSON list")
    except (OSError, ValueError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    store = init_store(args.db, args.game_id, args.card_id)
    try:
        for raw in edits:
            receipt = store.apply_external_edit(
                ExternalEdit(kind=raw["kind"], payload=raw.get("payload", {})))
            print(json.dumps(receipt, sort_keys=True))
    except StoreError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    finally:
        store.close()
    return 0


def _cmd_serve(args) -> int:
    from .control_api import serve_control_api

    server = serve_control_api(args.db, None, bind=_parse_bind(args.bind),
                               ui_dir=args.ui_dir)
    host, port = server.server_address[:2]
    print(f"control api listening on http://{host}:{port} (ctrl-c to stop)")
    try:
        import time

        while True:
            time.sleep(3600)
    except KeyboardInterrupt:
        server.shutdown()
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    handlers = {"run": _cmd_run, "replay": _cmd_replay, "audit": _cmd_audit,
                "inspect": _cmd_inspect, "plot": _cmd_plot, "seed": _cmd_seed,
                "serve": _cmd_serve}
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
