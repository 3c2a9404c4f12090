"""Turn execution engine: one turn = diff, curriculum bookkeeping, judge,
observer, actor, environment step, all committed atomically per turn.

The per-turn order is load-bearing and test-pinned: metric generation
fires only when an item is first activated; the judge scores the
previous turn's figured-out list; promotion happens before the observer
rewrites the lists; the actor acts last. A run loops turns until its
stop condition, auto-resetting (and logging the losing sequence) on
game over, with curriculum state persisting across resets.
"""

from __future__ import annotations

import json
import queue
import threading
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

from . import __version__
from .curriculum import evaluate_transition, select_active
from .env import (
    ActionCommand,
    ActionId,
    EnvError,
    EnvTranscript,
    GameConfig,
    KeyQuest,
    default_config,
)
from .frames import FrameDiff, GameStatus, Observation
from .prompts import Stage, assemble_prompt
from .stages import (
    StageError,
    run_actor,
    run_frame_diff,
    run_metric_gen,
    run_observer,
    run_sense_score,
)
from .store import (
    DEFAULT_CURRICULUM,
    DEFAULT_SEED_FACTS,
    CounterClock,
    EpistemicState,
    Store,
    TurnRecord,
    init_store,
)

COGNITION_STAGES = {"frame_diff", "metric_gen", "sense_score", "observer", "actor"}

EXIT_OK = 0
EXIT_STAGE_ERROR = 2
EXIT_ENV_ERROR = 3


class RunConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """JSON-able run description; the manifest echoes it verbatim."""

    mode: str = "v2"
    game_id: str = "keyquest"
    card_id: str = "card-1"
    env: dict = field(default_factory=lambda: {"kind": "keyquest"})
    backends: dict = field(default_factory=lambda: {
        "differ": "programmatic", "metric": "scripted", "judge": "schedule",
        "observer": "rules", "actor": "fixture"})
    fixture: str | None = "builtin:v2_scripted_run"
    corruption: dict | None = None
    max_turns: int = 200
    history_window: int = 10
    tau_override: int | None = None
    stop_condition: str = "curriculum_done"
    curriculum: list[str] = field(default_factory=lambda: list(DEFAULT_CURRICULUM))
    seed_facts: list[str] = field(default_factory=lambda: list(DEFAULT_SEED_FACTS))
    baselines: list[int] = field(default_factory=lambda: [1600, 3000])
    fixed_clock: bool = True
    trace: bool = False

    def __post_init__(self):
        if self.mode not in ("v1", "v2"):
            raise RunConfigError(f"mode must be v1 or v2, got {self.mode!r}")
        if self.stop_condition not in ("curriculum_done", "win", "max_turns"):
            raise RunConfigError(f"unknown stop condition {self.stop_condition!r}")
        if self.mode == "v1" and self.stop_condition == "curriculum_done":
            raise RunConfigError("v1 mode has no curriculum; stop on win or max_turns")
        if self.max_turns < 1:
            raise RunConfigError("max_turns must be >= 1")
        if self.tau_override is not None and not 1 <= self.tau_override <= 10:
            raise RunConfigError("tau override must be in 1..10")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise RunConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class RunMetrics:
    total_interactions: int
    curriculum_completion_turn: int | None
    per_item_completion_turns: dict[int, int]
    levels_won: int
    efficiency_ratios: list[tuple[int, float]]

    def to_dict(self) -> dict:
        return {
            "total_interactions": self.total_interactions,
            "curriculum_completion_turn": self.curriculum_completion_turn,
            "per_item_completion_turns": {str(k): v for k, v
                                          in self.per_item_completion_turns.items()},
            "levels_won": self.levels_won,
            "efficiency_ratios": [[b, r] for b, r in self.efficiency_ratios],
        }


@dataclass
class RunResult:
    metrics: RunMetrics
    transcript: EnvTranscript
    db_path: str
    exit_code: int = EXIT_OK
    stop_reason: str = ""
    error: str | None = None


class RunController:
    """Thread-safe pause/resume/stop plus the turn event broadcast."""

    def __init__(self):
        self._paused = threading.Event()
        self._stopped = threading.Event()
        self._subs: list[queue.Queue] = []
        self._lock = threading.Lock()
        self.current_turn = 0
        self.run_active = False

    @property
    def paused(self) -> bool:
        return self._paused.is_set()

    @property
    def stopped(self) -> bool:
        return self._stopped.is_set()

    def pause(self) -> None:
        self._paused.set()

    def resume(self) -> None:
        self._paused.clear()

    def stop(self) -> None:
        self._stopped.set()
        self._paused.clear()

    def wait_if_paused(self) -> None:
        while self._paused.is_set() and not self._stopped.is_set():
            time.sleep(0.01)

    def subscribe(self) -> queue.Queue:
        q: queue.Queue = queue.Queue()
        with self._lock:
            self._subs.append(q)
        return q

    def unsubscribe(self, q: queue.Queue) -> None:
        with self._lock:
            if q in self._subs:
                self._subs.remove(q)

    def publish(self, event: dict) -> None:
        with self._lock:
            subs = list(self._subs)
        for q in subs:
            q.put(event)


def _wire_env(config: RunConfig):
    spec = dict(config.env)
    kind = spec.pop("kind", "keyquest")
    if kind == "keyquest":
        if "config_path" in spec:
            game_config = GameConfig.from_file(spec["config_path"])
        elif "config" in spec:
            game_config = GameConfig.from_dict(spec["config"])
        else:
            game_config = default_config(
                initial_energy=spec.get("initial_energy", 20),
                energy_dot_bonus=spec.get("energy_dot_bonus", 5))
        return KeyQuest(game_config)
    if kind == "remote":
        from .remote_env import remote_connect

        return remote_connect(spec["endpoint"], spec.get("token", ""),
                              spec.get("game_id", config.game_id))
    raise RunConfigError(f"unknown env kind {kind!r}")


def _load_fixture(config: RunConfig) -> dict:
    if not config.fixture:
        return {}
    from .backends import builtin_fixture, load_fixture

    if config.fixture.startswith("builtin:"):
        return builtin_fixture(config.fixture.split(":", 1)[1])
    return load_fixture(config.fixture)


def _wire_backends(config: RunConfig, env, fixture: dict) -> dict:
    from . import backends as B

    wired: dict[str, Any] = {}
    kinds = config.backends
    remote_client = None

    def client():
        nonlocal remote_client
        if remote_client is None:
            from .remote_llm import ChatClient

            remote_client = ChatClient.from_env()
        return remote_client

    differ_kind = kinds.get("differ", "programmatic")
    if differ_kind == "programmatic":
        wired["differ"] = B.ProgrammaticDiffer(env.hud_regions())
    elif differ_kind == "scripted":
        wired["differ"] = B.ScriptedDiffer(B.fixture_diffs(fixture.get("diffs", [])))
    elif differ_kind == "remote":
        from .remote_llm import RemoteDiffer

        wired["differ"] = RemoteDiffer(client())
    else:
        raise RunConfigError(f"unknown differ backend {differ_kind!r}")

    if config.corruption:
        from .audit import inject_corruption

        wired["differ"] = inject_corruption(
            wired["differ"], policy=config.corruption["policy"],
            rate=config.corruption.get("rate", 1.0),
            seed=config.corruption.get("seed", 0))

    metric_kind = kinds.get("metric", "scripted")
    if metric_kind == "scripted":
        wired["metric"] = B.ScriptedMetricGen(fixture.get("metrics", {}))
    elif metric_kind == "remote":
        from .remote_llm import RemoteMetricGen

        wired["metric"] = RemoteMetricGen(client())
    else:
        raise RunConfigError(f"unknown metric backend {metric_kind!r}")

    judge_kind = kinds.get("judge", "schedule")
    if judge_kind == "schedule":
        judge_fix = fixture.get("judge", {})
        wired["judge"] = B.ScheduleJudge(judge_fix.get("scores", []),
                                         judge_fix.get("reasonings"))
    elif judge_kind == "monotone":
        wired["judge"] = B.MonotoneJudge()
    elif judge_kind == "remote":
        from .remote_llm import RemoteJudge

        wired["judge"] = RemoteJudge(client())
    else:
        raise RunConfigError(f"unknown judge backend {judge_kind!r}")

    observer_kind = kinds.get("observer", "rules")
    if observer_kind == "rules":
        wired["observer"] = B.RuleBasedObserver()
    elif observer_kind == "table":
        obs_fix = fixture.get("observer", {})
        wired["observer"] = B.TableObserver(obs_fix.get("entries", []),
                                            obs_fix.get("keyed"))
    elif observer_kind == "remote":
        from .remote_llm import RemoteObserver

        wired["observer"] = RemoteObserver(client())
    else:
        raise RunConfigError(f"unknown observer backend {observer_kind!r}")

    actor_kind = kinds.get("actor", "fixture")
    if actor_kind == "fixture":
        wired["actor"] = B.ScriptedActor(fixture.get("actions", []))
    elif actor_kind == "cycle":
        wired["actor"] = B.CyclingActor()
    elif actor_kind == "remote":
        from .remote_llm import RemoteActor

        wired["actor"] = RemoteActor(client())
    else:
        raise RunConfigError(f"unknown actor backend {actor_kind!r}")

    return wired


class TurnEngine:
    """Executes turns against one store/env/backend wiring."""

    def __init__(self, store: Store, env, backends: dict, config: RunConfig,
                 controller: RunController | None = None,
                 trace_dir: Path | None = None):
        self.store = store
        self.env = env
        self.backends = backends
        self.config = config
        self.controller = controller
        self.trace_dir = trace_dir
        self.turn = 0
        self.prev_obs: Observation | None = None
        self.curr_obs: Observation | None = None
        self.history: list[dict] = []
        self.transcript: EnvTranscript | None = None
        self.curriculum_done = False
        self.levels_won = 0
        self.completion_turns: dict[int, int] = {}
        self.episode_actions: list[ActionCommand] = []

    # -- lifecycle -------------------------------------------------------------

    def start(self) -> None:
        obs = self.env.reset()
        record_gt = getattr(self.env, "track_diffs", False)
        self.transcript = EnvTranscript(initial=obs,
                                        ground_truth_diffs=[] if record_gt else None)
        self.prev_obs = obs
        self.curr_obs = obs
        self.store.put_input(0, "frame", json.dumps(obs.to_dict(),
                                                    separators=(",", ":")))

    def _publish(self, record: TurnRecord, diff: FrameDiff | None,
                 applied_edits: list[dict]) -> None:
        if self.controller is None:
            return
        self.controller.current_turn = record.turn_index
        self.controller.publish({
            "turn_index": record.turn_index,
            "action_id": record.action.action_id.value,
            "decision_type": record.decision_type,
            "diff_summary": diff.summary if diff else "",
            "sense_score": record.sense_score,
            "sense_reasoning": record.sense_reasoning,
            "score": record.score,
            "status": record.status.value,
            "active_item_id": record.active_item_id,
            "prompt_hash": record.prompt_hash,
            "applied_edits": [e.get("edit_id") for e in applied_edits],
        })

    def _trace(self, turn: int, payload: dict) -> None:
        if self.trace_dir is None:
            return
        payload = {k: v for k, v in payload.items() if not k.startswith("_")}
        self.trace_dir.mkdir(parents=True, exist_ok=True)
        with open(self.trace_dir / f"turn_{turn:04d}.json", "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, ensure_ascii=False)

    def _history_entry(self, record: TurnRecord, diff: FrameDiff | None) -> dict:
        return {"turn": record.turn_index,
                "action": record.action.action_id.value,
                "decision": record.decision_type,
                "summary": diff.summary if diff else "",
                "score": record.score,
                "status": record.status.value}

    def _record_env_step(self, cmd: ActionCommand, obs: Observation) -> None:
        gt = None
        if self.transcript.ground_truth_diffs is not None:
            gt = self.env.ground_truth_diff()
        self.transcript.append(cmd, obs, gt)
        if gt is not None:
            self.store.put_input(self.turn, "gt_diff", gt.to_json())

    def handle_reset(self, log_losing: bool) -> TurnRecord:
        """Terminal recovery: optionally log the losing sequence, then RESET."""
        self.turn += 1
        self.store.begin_turn()
        try:
            if log_losing:
                self.store.log_losing_sequence(self.episode_actions)
            cmd = ActionCommand(ActionId.RESET)
            obs = self.env.step(cmd)
            self._record_env_step(cmd, obs)
            record = TurnRecord(
                turn_index=self.turn, frame_ref=f"inputs:{self.turn}:frame",
                action=cmd, score=obs.score, status=obs.status)
            self.store.put_input(self.turn, "frame",
                                 json.dumps(obs.to_dict(), separators=(",", ":")))
            self.store.put_input(self.turn, "stages", json.dumps(["env_step"]))
            self.store.record_turn(record)
            self.store.commit_turn()
        except Exception:
            self.store.rollback_turn()
            raise
        self.episode_actions = []
        self.prev_obs = obs
        self.curr_obs = obs
        self.history.append(self._history_entry(record, None))
        self._publish(record, None, [])
        return record

    def execute_turn(self, applied_edits: list[dict] | None = None) -> TurnRecord:
        """One full pipeline turn in the pinned stage order."""
        self.turn += 1
        trace: list[str] = []
        stage_io: dict = {}
        self.store.begin_turn()
        try:
            record = (self._v2_turn(trace, stage_io) if self.config.mode == "v2"
                      else self._v1_turn(trace, stage_io))
            self.store.put_input(self.turn, "stages", json.dumps(trace))
            self.store.record_turn(record)
            self.store.commit_turn()
        except Exception:
            self.store.rollback_turn()
            self.turn -= 1
            raise
        self._trace(record.turn_index, {"stages": trace, **stage_io})
        diff = stage_io.get("_diff_obj")
        self.history.append(self._history_entry(record, diff))
        self._publish(record, diff, applied_edits or [])
        return record

    def _v2_turn(self, trace: list[str], stage_io: dict) -> TurnRecord:
        diff = run_frame_diff(self.backends["differ"], self.prev_obs, self.curr_obs)
        trace.append("frame_diff")
        stage_io["_diff_obj"] = diff
        stage_io["diff"] = diff.to_dict()

        decision = select_active(self.store)
        trace.append("select_active")
        active = decision.active_item
        self.curriculum_done = decision.curriculum_done

        sense = None
        if active is not None:
            if active.metric is None:
                metric = run_metric_gen(self.backends["metric"], active)
                self.store.set_item_metric(active.item_id, metric)
                active = self.store.get_item(active.item_id)
                trace.append("metric_gen")
                stage_io["metric"] = metric
            facts_pre = tuple(e.text for e in self.store.facts())
            figured_prev = tuple(e.text for e in
                                 self.store.active_hypotheses("figured_out"))
            sense = run_sense_score(self.backends["judge"], active.item_name,
                                    active.metric, facts_pre, figured_prev)
            trace.append("sense_score")
            stage_io["sense"] = {"score": sense.sense_score,
                                 "reasoning": sense.reasoning}
            outcome = evaluate_transition(self.store, active, sense.sense_score,
                                          turn_index=self.turn)
            if outcome.just_completed is not None:
                trace.append("promote")
                self.completion_turns[outcome.just_completed] = self.turn
                self.curriculum_done = outcome.curriculum_done
        else:
            facts_pre = tuple(e.text for e in self.store.facts())

        # Observer sees the pre-promotion facts and the pre-turn lists, with
        # this turn's sense reasoning as feedback.
        snap = EpistemicState(
            turn_index=self.turn,
            facts=facts_pre,
            guesses=tuple(e.text for e in self.store.active_hypotheses("guess")),
            figured_out=tuple(e.text for e in
                              self.store.active_hypotheses("figured_out")),
            active_item=active,
            sense_score=sense.sense_score if sense else None,
            sense_reasoning=sense.reasoning if sense else None)
        obs_prompt = assemble_prompt(Stage.OBSERVER, snap, obs=self.curr_obs,
                                     diff=diff, history=self.history,
                                     history_window=self.config.history_window)
        observer_out = run_observer(self.backends["observer"], obs_prompt)
        self.store.append_hypotheses(self.turn, list(observer_out.guesses),
                                     list(observer_out.figured_out))
        trace.append("observer")
        stage_io["observer"] = {"prompt_sha256": obs_prompt.sha256(),
                                "guesses": list(observer_out.guesses),
                                "figured_out": list(observer_out.figured_out)}

        actor_snap = EpistemicState(
            turn_index=self.turn, facts=facts_pre,
            guesses=observer_out.guesses, figured_out=observer_out.figured_out,
            active_item=active,
            sense_score=sense.sense_score if sense else None,
            sense_reasoning=sense.reasoning if sense else None)
        actor_prompt = assemble_prompt(Stage.ACTOR, actor_snap,
                                       history=self.history,
                                       history_window=self.config.history_window)
        actor_out = run_actor(self.backends["actor"], actor_prompt)
        trace.append("actor")
        stage_io["actor"] = {"decision": actor_out.decision_type,
                             "action": actor_out.action.to_dict()}

        new_obs = self.env.step(actor_out.action)
        trace.append("env_step")
        self._record_env_step(actor_out.action, new_obs)
        self.episode_actions.append(actor_out.action)
        if new_obs.score > self.curr_obs.score:
            self.levels_won += new_obs.score - self.curr_obs.score

        record = TurnRecord(
            turn_index=self.turn, frame_ref=f"inputs:{self.turn}:frame",
            action=actor_out.action, score=new_obs.score, status=new_obs.status,
            decision_type=actor_out.decision_type, diff_text=diff.to_json(),
            sense_score=sense.sense_score if sense else None,
            sense_reasoning=sense.reasoning if sense else None,
            active_item_id=active.item_id if active else None,
            prompt_hash=obs_prompt.sha256())
        self.store.put_input(self.turn, "frame",
                             json.dumps(new_obs.to_dict(), separators=(",", ":")))
        self.prev_obs = self.curr_obs
        self.curr_obs = new_obs
        return record

    def _v1_turn(self, trace: list[str], stage_io: dict) -> TurnRecord:
        snap = EpistemicState(
            turn_index=self.turn,
            facts=tuple(e.text for e in self.store.facts()),
            guesses=tuple(e.text for e in self.store.active_hypotheses("guess")),
            figured_out=tuple(e.text for e in
                              self.store.active_hypotheses("figured_out")),
            active_item=None, sense_score=None, sense_reasoning=None)
        obs_prompt = assemble_prompt(Stage.OBSERVER, snap, obs=self.curr_obs,
                                     prev_obs=self.prev_obs, history=self.history,
                                     history_window=self.config.history_window,
                                     v1=True)
        observer_out = run_observer(self.backends["observer"], obs_prompt)
        self.store.append_hypotheses(self.turn, list(observer_out.guesses),
                                     list(observer_out.figured_out))
        trace.append("observer")

        actor_snap = EpistemicState(
            turn_index=self.turn, facts=snap.facts,
            guesses=observer_out.guesses, figured_out=observer_out.figured_out,
            active_item=None, sense_score=None, sense_reasoning=None)
        actor_prompt = assemble_prompt(Stage.ACTOR, actor_snap,
                                       history=self.history,
                                       history_window=self.config.history_window)
        actor_out = run_actor(self.backends["actor"], actor_prompt)
        trace.append("actor")

        new_obs = self.env.step(actor_out.action)
        trace.append("env_step")
        self._record_env_step(actor_out.action, new_obs)
        self.episode_actions.append(actor_out.action)
        if new_obs.score > self.curr_obs.score:
            self.levels_won += new_obs.score - self.curr_obs.score

        record = TurnRecord(
            turn_index=self.turn, frame_ref=f"inputs:{self.turn}:frame",
            action=actor_out.action, score=new_obs.score, status=new_obs.status,
            decision_type=actor_out.decision_type, diff_text=None,
            prompt_hash=obs_prompt.sha256())
        self.store.put_input(self.turn, "frame",
                             json.dumps(new_obs.to_dict(), separators=(",", ":")))
        self.prev_obs = self.curr_obs
        self.curr_obs = new_obs
        return record

    # -- run loop ----------------------------------------------------------------

    def should_stop(self) -> str | None:
        if self.turn >= self.config.max_turns:
            return "max_turns"
        if (self.config.stop_condition == "curriculum_done" and self.curriculum_done):
            return "curriculum_done"
        if (self.config.stop_condition == "win"
                and self.curr_obs.status == GameStatus.WIN):
            return "win"
        return None

    def metrics(self) -> RunMetrics:
        records = self.store.turn_records()
        total = sum(1 for r in records if r.action.action_id != ActionId.RESET)
        completion = max(self.completion_turns.values()) if (
            self.curriculum_done and self.completion_turns) else None
        ratios = [(b, b / total if total else 0.0) for b in self.config.baselines]
        return RunMetrics(total_interactions=total,
                          curriculum_completion_turn=completion,
                          per_item_completion_turns=dict(self.completion_turns),
                          levels_won=self.levels_won,
                          efficiency_ratios=ratios)


def run(config: RunConfig, db_path: str | Path,
        controller: RunController | None = None) -> RunResult:
    """Execute a full run; writes manifest, transcript and metrics beside the db."""
    db_path = Path(db_path)
    clock = CounterClock() if config.fixed_clock else None
    store = init_store(db_path, config.game_id, config.card_id,
                       curriculum=config.curriculum, seed_facts=config.seed_facts,
                       clock=clock)
    if config.tau_override is not None:
        for item in store.items():
            store._conn.execute(
                "UPDATE items_to_learn SET threshold=? WHERE item_id=?",
                (config.tau_override, item.item_id))
        store._audit("config:tau_override", {"threshold": config.tau_override})

    env = _wire_env(config)
    fixture = _load_fixture(config)
    backends = _wire_backends(config, env, fixture)
    trace_dir = db_path.with_suffix(".trace") if config.trace else None
    engine = TurnEngine(store, env, backends, config, controller=controller,
                        trace_dir=trace_dir)

    _write_json(db_path.with_suffix(".manifest.json"), {
        "config": config.to_dict(),
        "package_version": __version__,
        "schema_version": 1,
    })

    if controller is not None:
        controller.run_active = True
    exit_code, stop_reason, error = EXIT_OK, "", None
    try:
        engine.start()
        while True:
            if controller is not None:
                controller.wait_if_paused()
                if controller.stopped:
                    stop_reason = "stopped"
                    break
            reason = engine.should_stop()
            if reason:
                stop_reason = reason
                break
            applied = store.drain_pending_edits(applied_at_turn=engine.turn + 1)
            if engine.curr_obs.status == GameStatus.GAME_OVER:
                engine.handle_reset(log_losing=True)
                continue
            if engine.curr_obs.status == GameStatus.WIN:
                engine.handle_reset(log_losing=False)
                continue
            engine.execute_turn(applied_edits=applied)
    except StageError as e:
        exit_code, error = EXIT_STAGE_ERROR, str(e)
        stop_reason = "stage_error"
    except EnvError as e:
        exit_code, error = EXIT_ENV_ERROR, str(e)
        stop_reason = "env_error"
    finally:
        if controller is not None:
            controller.run_active = False

    metrics = engine.metrics()
    transcript = engine.transcript or EnvTranscript(
        initial=Observation(frame=[[[0]]], score=0,
                            status=GameStatus.NOT_PLAYED, turn_index=0))
    _write_text(db_path.with_suffix(".transcript.json"), transcript.to_json())
    _write_json(db_path.with_suffix(".metrics.json"), metrics.to_dict())
    store.close()
    return RunResult(metrics=metrics, transcript=transcript, db_path=str(db_path),
                     exit_code=exit_code, stop_reason=stop_reason, error=error)


@dataclass
class ReplayReport:
    match: bool
    turns_compared: int
    first_divergence: tuple[int, str, str, str] | None = None  # turn, field, want, got

    def to_dict(self) -> dict:
        return {"match": self.match, "turns_compared": self.turns_compared,
                "first_divergence": (list(self.first_divergence)
                                     if self.first_divergence else None)}


_COMPARE_FIELDS = ("action", "score", "status", "decision_type", "diff_text",
                   "sense_score", "prompt_hash")


def replay(db_path: str | Path, config: RunConfig | None = None,
           transcript: EnvTranscript | None = None,
           scratch_dir: str | Path | None = None) -> ReplayReport:
    """Re-execute a recorded run and report the first divergence, if any.

    The replay seeds its fresh store from the original store's seed state
    (facts not produced by promotion, curriculum item names in queue
    order), so any fact injected into the original store surfaces as a
    prompt-hash divergence at the first turn it would have influenced.
    """
    import tempfile

    db_path = Path(db_path)
    if config is None:
        manifest = json.loads(db_path.with_suffix(".manifest.json").read_text())
        config = RunConfig.from_dict(manifest["config"])
    if transcript is None:
        transcript = EnvTranscript.from_json(
            db_path.with_suffix(".transcript.json").read_text())

    original = Store(db_path, read_only=True)
    try:
        seed_facts = [e.text for e in original.facts() if e.source_item_id is None]
        curriculum = [i.item_name for i in original.items()]
        original_records = original.turn_records()
    finally:
        original.close()

    config = RunConfig.from_dict({**config.to_dict(),
                                  "curriculum": curriculum,
                                  "seed_facts": seed_facts})

    with tempfile.TemporaryDirectory(dir=scratch_dir) as tmp:
        rerun_db = Path(tmp) / "replay.db"
        result = run(config, rerun_db)
        rerun = Store(rerun_db, read_only=True)
        try:
            new_records = rerun.turn_records()
        finally:
            rerun.close()

    turns = 0
    for old, new in zip(original_records, new_records):
        turns += 1
        for fld in _COMPARE_FIELDS:
            want, got = getattr(old, fld), getattr(new, fld)
            if fld == "action":
                want, got = want.to_dict(), got.to_dict()
            if want != got:
                return ReplayReport(False, turns,
                                    (old.turn_index, fld, str(want), str(got)))
    if len(original_records) != len(new_records):
        return ReplayReport(False, turns,
                            (turns + 1, "turn_count", str(len(original_records)),
                             str(len(new_records))))

    # the provided transcript must also match the re-executed environment
    new_t = result.transcript
    if transcript.initial.to_dict() != new_t.initial.to_dict():
        return ReplayReport(False, turns, (0, "initial_observation", "", ""))
    for i, ((cmd_a, obs_a), (cmd_b, obs_b)) in enumerate(
            zip(transcript.steps, new_t.steps), start=1):
        if cmd_a.to_dict() != cmd_b.to_dict():
            return ReplayReport(False, turns,
                                (i, "transcript_action", json.dumps(cmd_a.to_dict()),
                                 json.dumps(cmd_b.to_dict())))
        if obs_a.to_dict() != obs_b.to_dict():
            return ReplayReport(False, turns, (i, "transcript_observation", "", ""))
    if len(transcript.steps) != len(new_t.steps):
        return ReplayReport(False, turns,
                            (turns + 1, "transcript_length",
                             str(len(transcript.steps)), str(len(new_t.steps))))
    return ReplayReport(True, turns)


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


def _write_text(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8")
