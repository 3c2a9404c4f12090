"""Built-in deterministic puzzle environment (KeyQuest) and env-side types.

KeyQuest is a small two-level grid game: a two-cell player (blue body,
red cap) walks around collecting stars behind key-locked doors while an
energy meter drains one pip per action. The board lives on grid layer 0,
the player on layer 1, and the top two rows are a HUD (energy pips on
the left, held keys on the right). Everything is deterministic, so the
simulator can emit an authoritative structured diff for every transition
computed from its own state.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Protocol, Sequence

from .frames import (
    FrameDiff,
    GameStatus,
    Observation,
    Region,
    programmatic_diff,
)

# Board color roles.
WALL_COLOR = 5
PLAYER_BODY_COLOR = 1   # blue
PLAYER_CAP_COLOR = 2    # red
STAR_COLOR = 4          # yellow
PIP_COLOR = 3           # green
DOT_COLOR = 8           # azure
KEY_COLORS = (6, 7)     # fuchsia, orange: generator, door and key share a color

HUD_ROWS = 2
KEY_SLOTS = 4


class ActionId(str, Enum):
    RESET = "RESET"
    ACTION1 = "ACTION1"  # up
    ACTION2 = "ACTION2"  # down
    ACTION3 = "ACTION3"  # left
    ACTION4 = "ACTION4"  # right
    ACTION5 = "ACTION5"
    ACTION6 = "ACTION6"  # coordinate-parameterized
    ACTION7 = "ACTION7"


MOVE_DELTAS = {
    ActionId.ACTION1: (-1, 0),
    ActionId.ACTION2: (1, 0),
    ActionId.ACTION3: (0, -1),
    ActionId.ACTION4: (0, 1),
}

ALL_ACTION_NAMES = "ACTION1, ACTION2, ACTION3, ACTION4, ACTION5, ACTION6, ACTION7, RESET"


class EnvError(Exception):
    pass


class NotResetError(EnvError):
    """An action was issued before the first RESET."""


class TerminalStateError(EnvError):
    """An action was issued in a terminal state; issue RESET to continue."""


class ConfigError(EnvError):
    pass


@dataclass(frozen=True)
class ActionCommand:
    """One environment command; coords are required exactly for ACTION6."""

    action_id: ActionId
    coords: tuple[int, int] | None = None  # (x, y)

    def __post_init__(self):
        if not isinstance(self.action_id, ActionId):
            object.__setattr__(self, "action_id", ActionId(self.action_id))
        if self.coords is not None:
            object.__setattr__(self, "coords", (int(self.coords[0]), int(self.coords[1])))
        if self.action_id == ActionId.ACTION6 and self.coords is None:
            raise ValueError("ACTION6 requires coords")
        if self.action_id != ActionId.ACTION6 and self.coords is not None:
            raise ValueError(f"{self.action_id.value} does not take coords")

    def to_dict(self) -> dict:
        d: dict = {"action_id": self.action_id.value}
        if self.coords is not None:
            d["coords"] = {"x": self.coords[0], "y": self.coords[1]}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ActionCommand":
        coords = d.get("coords")
        return cls(action_id=ActionId(d["action_id"]),
                   coords=(coords["x"], coords["y"]) if coords else None)


DEFAULT_LEGEND = {
    "#": "wall", ".": "floor", "P": "player", "*": "star", "e": "dot",
    "K": ("keygen", KEY_COLORS[0]), "D": ("door", KEY_COLORS[0]),
    "L": ("keygen", KEY_COLORS[1]), "M": ("door", KEY_COLORS[1]),
}


@dataclass(frozen=True)
class LevelSpec:
    """Static layout of one level, in playfield coordinates (row 0 = below HUD)."""

    walls: frozenset[tuple[int, int]]
    player_start: tuple[int, int]
    key_generators: tuple[tuple[tuple[int, int], int], ...]  # ((row,col), color)
    doors: tuple[tuple[tuple[int, int], int], ...]
    stars: frozenset[tuple[int, int]]
    energy_dots: frozenset[tuple[int, int]]
    rows: tuple[str, ...]  # source ascii, kept for config round-trips

    @classmethod
    def from_ascii(cls, rows: Sequence[str]) -> "LevelSpec":
        walls, stars, dots = set(), set(), set()
        gens, doors = [], []
        start = None
        for r, row in enumerate(rows):
            for c, ch in enumerate(row):
                role = DEFAULT_LEGEND.get(ch)
                if role is None:
                    raise ConfigError(f"unknown map character {ch!r} at ({r},{c})")
                if role == "wall":
                    walls.add((r, c))
                elif role == "player":
                    if start is not None:
                        raise ConfigError("multiple player starts")
                    start = (r, c)
                elif role == "star":
                    stars.add((r, c))
                elif role == "dot":
                    dots.add((r, c))
                elif isinstance(role, tuple):
                    kind, color = role
                    (gens if kind == "keygen" else doors).append(((r, c), color))
        if start is None:
            raise ConfigError("level has no player start")
        return cls(walls=frozenset(walls), player_start=start,
                   key_generators=tuple(gens), doors=tuple(doors),
                   stars=frozenset(stars), energy_dots=frozenset(dots),
                   rows=tuple(rows))

    def validate(self, height: int, width: int) -> None:
        if len(self.rows) != height or any(len(r) != width for r in self.rows):
            raise ConfigError(f"level rows must be {height}x{width}")
        if not self.stars:
            raise ConfigError("every level needs at least one star")
        if self.player_start in self.walls:
            raise ConfigError("player start is inside a wall")
        door_colors = {color for _, color in self.doors}
        for _, color in self.key_generators:
            if self.doors and color not in door_colors:
                raise ConfigError(f"key generator color {color} has no matching door")


@dataclass(frozen=True)
class GameConfig:
    """Full game description: grid dims, energy economy, level layouts."""

    game_id: str
    width: int
    height: int  # playfield height; the rendered frame adds HUD_ROWS on top
    initial_energy: int
    energy_dot_bonus: int
    levels: tuple[LevelSpec, ...]
    rng_seed: int = 0  # unused by KeyQuest; reserved for stochastic games

    def __post_init__(self):
        if self.width < 4 or self.height < 4:
            raise ConfigError("grid too small")
        if self.width > 64 or self.height + HUD_ROWS > 64:
            raise ConfigError("grid exceeds 64x64 including HUD")
        if self.initial_energy < 1:
            raise ConfigError("initial_energy must be >= 1")
        if self.initial_energy > self.pip_capacity:
            raise ConfigError(
                f"initial_energy {self.initial_energy} exceeds HUD pip capacity "
                f"{self.pip_capacity}")
        if not self.levels:
            raise ConfigError("at least one level required")
        for lvl in self.levels:
            lvl.validate(self.height, self.width)

    @property
    def pip_capacity(self) -> int:
        return 2 * self.width - KEY_SLOTS

    @property
    def frame_height(self) -> int:
        return self.height + HUD_ROWS

    def hud_regions(self) -> list[Region]:
        return [Region("hud", 0, 0, HUD_ROWS - 1, self.width - 1)]

    def to_dict(self) -> dict:
        return {
            "game_id": self.game_id,
            "width": self.width,
            "height": self.height,
            "initial_energy": self.initial_energy,
            "energy_dot_bonus": self.energy_dot_bonus,
            "rng_seed": self.rng_seed,
            "levels": [{"rows": list(lvl.rows)} for lvl in self.levels],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GameConfig":
        levels = tuple(LevelSpec.from_ascii(lvl["rows"]) for lvl in d["levels"])
        return cls(game_id=d["game_id"], width=d["width"], height=d["height"],
                   initial_energy=d["initial_energy"],
                   energy_dot_bonus=d.get("energy_dot_bonus", 5),
                   levels=levels, rng_seed=d.get("rng_seed", 0))

    @classmethod
    def from_file(cls, path) -> "GameConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


LEVEL_1 = (
    "################",
    "#..............#",
    "#.e.........e..#",
    "#....######....#",
    "#....#....#....#",
    "#....#.*..#..K.#",
    "#....#....#....#",
    "#....##D###....#",
    "#..............#",
    "#.....P........#",
    "#...e.....e....#",
    "#..*...........#",
    "#..............#",
    "################",
)

LEVEL_2 = (
    "################",
    "#..............#",
    "#..P.......e...#",
    "#..............#",
    "#....######....#",
    "#....#..*.#....#",
    "#....#....#....#",
    "#....###D##....#",
    "#..............#",
    "#......K.......#",
    "#..............#",
    "#.e............#",
    "#..............#",
    "################",
)


def default_config(initial_energy: int = 20, energy_dot_bonus: int = 5) -> GameConfig:
    return GameConfig(
        game_id="keyquest",
        width=16,
        height=14,
        initial_energy=initial_energy,
        energy_dot_bonus=energy_dot_bonus,
        levels=(LevelSpec.from_ascii(LEVEL_1), LevelSpec.from_ascii(LEVEL_2)),
    )


@dataclass
class EnvTranscript:
    """Complete record of one environment session, replayable byte-for-byte."""

    initial: Observation
    steps: list[tuple[ActionCommand, Observation]] = field(default_factory=list)
    ground_truth_diffs: list[FrameDiff] | None = None

    def append(self, cmd: ActionCommand, obs: Observation,
               gt_diff: FrameDiff | None) -> None:
        self.steps.append((cmd, obs))
        if gt_diff is not None:
            if self.ground_truth_diffs is None:
                self.ground_truth_diffs = []
            self.ground_truth_diffs.append(gt_diff)
        if self.ground_truth_diffs is not None and len(self.ground_truth_diffs) != len(self.steps):
            raise ValueError("ground truth diffs out of step with actions")

    def to_json(self) -> str:
        payload = {
            "initial": self.initial.to_dict(),
            "steps": [{"action": c.to_dict(), "observation": o.to_dict()}
                      for c, o in self.steps],
            "ground_truth_diffs": (
                None if self.ground_truth_diffs is None
                else [d.to_dict() for d in self.ground_truth_diffs]),
        }
        return json.dumps(payload, separators=(",", ":"), ensure_ascii=False)

    @classmethod
    def from_json(cls, text: str) -> "EnvTranscript":
        from .frames import parse_diff

        raw = json.loads(text)
        diffs = raw.get("ground_truth_diffs")
        return cls(
            initial=Observation.from_dict(raw["initial"]),
            steps=[(ActionCommand.from_dict(s["action"]),
                    Observation.from_dict(s["observation"])) for s in raw["steps"]],
            ground_truth_diffs=(None if diffs is None else
                                [parse_diff(json.dumps(d)) for d in diffs]),
        )


class GameEnvironment(Protocol):
    """Common surface of the built-in simulator and the remote client."""

    game_id: str

    def reset(self) -> Observation: ...

    def step(self, cmd: ActionCommand) -> Observation: ...

    def ground_truth_diff(self) -> FrameDiff | None: ...

    def hud_regions(self) -> list[Region]: ...


class KeyQuest:
    """Deterministic reference game; the oracle side of every end-to-end test."""

    def __init__(self, config: GameConfig | None = None, track_diffs: bool = True):
        self.config = config or default_config()
        self.game_id = self.config.game_id
        self.track_diffs = track_diffs
        self._status = GameStatus.NOT_PLAYED
        self._obs_counter = 0
        self._last_obs: Observation | None = None
        self._last_gt_diff: FrameDiff | None = None
        self.actions_since_reset: list[ActionCommand] = []

    # -- state readable by tests and the auditor ---------------------------

    @property
    def status(self) -> GameStatus:
        return self._status

    @property
    def energy(self) -> int:
        return self._energy

    @property
    def player_pos(self) -> tuple[int, int]:
        return self._player

    @property
    def inventory(self) -> frozenset[int]:
        return frozenset(self._keys)

    @property
    def level_index(self) -> int:
        return self._level_index

    @property
    def stars_remaining(self) -> frozenset[tuple[int, int]]:
        return frozenset(self._stars)

    @property
    def score(self) -> int:
        return self._score

    def hud_regions(self) -> list[Region]:
        return self.config.hud_regions()

    # -- environment protocol ----------------------------------------------

    def reset(self) -> Observation:
        prev_frame_obs = self._last_obs
        self._level_index = 0
        self._score = 0
        self._energy = self.config.initial_energy
        self._status = GameStatus.NOT_FINISHED
        self._load_level(0)
        self.actions_since_reset = []
        obs = self._observe()
        if prev_frame_obs is not None and self.track_diffs:
            self._last_gt_diff = programmatic_diff(prev_frame_obs, obs,
                                                   self.hud_regions())
        self._last_obs = obs
        return obs

    def step(self, cmd: ActionCommand) -> Observation:
        if cmd.action_id == ActionId.RESET:
            return self.reset()
        if self._status == GameStatus.NOT_PLAYED:
            raise NotResetError("step before reset; call reset() first")
        if self._status in (GameStatus.GAME_OVER, GameStatus.WIN):
            raise TerminalStateError(
                f"game is {self._status.value}; issue RESET to continue")
        if cmd.action_id == ActionId.ACTION6:
            x, y = cmd.coords
            if not (0 <= x < self.config.width and 0 <= y < self.config.frame_height):
                raise EnvError(f"ACTION6 coords {cmd.coords} outside frame bounds")

        bonus = 0
        if cmd.action_id in MOVE_DELTAS:
            bonus = self._move(MOVE_DELTAS[cmd.action_id])
        # ACTION5/6/7 have no board effect in KeyQuest beyond the energy cost.

        self._energy = self._energy - 1 + bonus
        if not self._stars and self._status == GameStatus.NOT_FINISHED:
            self._score += 1
            if self._level_index + 1 >= len(self.config.levels):
                self._status = GameStatus.WIN
            else:
                self._level_index += 1
                self._load_level(self._level_index)
        if self._status == GameStatus.NOT_FINISHED and self._energy <= 0:
            self._energy = 0
            self._status = GameStatus.GAME_OVER

        self.actions_since_reset.append(cmd)
        prev = self._last_obs
        obs = self._observe()
        if self.track_diffs:
            self._last_gt_diff = programmatic_diff(prev, obs, self.hud_regions())
        self._last_obs = obs
        return obs

    def ground_truth_diff(self) -> FrameDiff | None:
        """Authoritative diff for the last transition, from simulator state."""
        if self._last_gt_diff is None:
            raise EnvError("no transition yet: ground truth diff needs a step")
        return self._last_gt_diff

    # -- internals -----------------------------------------------------------

    def _load_level(self, index: int) -> None:
        lvl = self.config.levels[index]
        self._player = lvl.player_start
        self._stars = set(lvl.stars)
        self._dots = set(lvl.energy_dots)
        self._doors = {pos: color for pos, color in lvl.doors}
        self._gens = {pos: color for pos, color in lvl.key_generators}
        self._walls = lvl.walls
        self._keys: set[int] = set()

    def _move(self, delta: tuple[int, int]) -> int:
        """Apply one movement; returns the energy bonus picked up."""
        r, c = self._player
        nr, nc = r + delta[0], c + delta[1]
        if not (0 <= nr < self.config.height and 0 <= nc < self.config.width):
            return 0
        if (nr, nc) in self._walls:
            return 0
        if (nr, nc) in self._gens:
            color = self._gens[(nr, nc)]
            self._keys.add(color)  # one key per color; extra bumps are no-ops
            return 0
        if (nr, nc) in self._doors:
            color = self._doors[(nr, nc)]
            if color in self._keys:
                self._keys.discard(color)
                del self._doors[(nr, nc)]
            return 0  # opening (or failing to) does not move the player
        self._player = (nr, nc)
        bonus = 0
        if (nr, nc) in self._stars:
            self._stars.discard((nr, nc))
        if (nr, nc) in self._dots:
            self._dots.discard((nr, nc))
            bonus = self.config.energy_dot_bonus
        return bonus

    def _compose_frame(self) -> tuple:
        """Build the logical frame tensor from entity state (layer 0 board, layer 1 player)."""
        w, fh = self.config.width, self.config.frame_height
        board = [[0] * w for _ in range(fh)]
        player = [[0] * w for _ in range(fh)]
        for r in range(HUD_ROWS, fh):
            for c in range(w):
                pr = r - HUD_ROWS
                if (pr, c) in self._walls:
                    board[r][c] = WALL_COLOR
        for (pr, c), color in self._doors.items():
            board[pr + HUD_ROWS][c] = color
        for (pr, c), color in self._gens.items():
            board[pr + HUD_ROWS][c] = color
        for pr, c in self._stars:
            board[pr + HUD_ROWS][c] = STAR_COLOR
        for pr, c in self._dots:
            board[pr + HUD_ROWS][c] = DOT_COLOR
        # HUD: energy pips flow left-to-right across the two rows; keys sit
        # in the reserved slots at the right end of row 1.
        for i in range(min(self._energy, self.config.pip_capacity)):
            board[i // w][i % w] = PIP_COLOR
        for j, color in enumerate(sorted(self._keys)):
            board[1][w - 1 - j] = color
        pr, pc = self._player
        player[pr + HUD_ROWS][pc] = PLAYER_BODY_COLOR
        player[pr + HUD_ROWS - 1][pc] = PLAYER_CAP_COLOR
        return (tuple(tuple(row) for row in board),
                tuple(tuple(row) for row in player))

    def _observe(self) -> Observation:
        obs = Observation(frame=self._compose_frame(), score=self._score,
                          status=self._status, turn_index=self._obs_counter)
        self._obs_counter += 1
        return obs


def walk(env: KeyQuest, actions: Sequence[ActionCommand | ActionId | str],
         record_ground_truth: bool = True) -> EnvTranscript:
    """Reset, run a scripted action sequence, and return the transcript."""
    initial = env.reset()
    transcript = EnvTranscript(initial=initial,
                               ground_truth_diffs=[] if record_ground_truth else None)
    for a in actions:
        cmd = a if isinstance(a, ActionCommand) else ActionCommand(ActionId(a))
        obs = env.step(cmd)
        transcript.append(cmd, obs, env.ground_truth_diff() if record_ground_truth else None)
    return transcript


def moves(*ids: str) -> list[ActionCommand]:
    return [ActionCommand(ActionId(i)) for i in ids]
