"""Checkers for the 15 ground-truth game facts, shared with the acceptance gate.

Each check_fact_* function raises AssertionError on violation. The heavy
movement facts run over an exhaustive breadth-first enumeration of every
reachable (level, position, items) state of the reference game, trying
all four movement actions from each.
"""

from __future__ import annotations

from sensi.env import (
    HUD_ROWS,
    DOT_COLOR,
    PIP_COLOR,
    PLAYER_BODY_COLOR,
    PLAYER_CAP_COLOR,
    STAR_COLOR,
    ActionCommand,
    ActionId,
    GameConfig,
    KeyQuest,
    default_config,
    moves,
)
from sensi.frames import GameStatus

MOVE_ACTIONS = ("ACTION1", "ACTION2", "ACTION3", "ACTION4")
DELTAS = {"ACTION1": (-1, 0), "ACTION2": (1, 0), "ACTION3": (0, -1), "ACTION4": (0, 1)}

BIG_ENERGY = 10**6


def _snapshot(env: KeyQuest):
    return (env._level_index, env._player, frozenset(env._stars),
            frozenset(env._dots), frozenset(env._keys),
            tuple(sorted(env._doors.items())), env._score, env._status)


def _restore(env: KeyQuest, snap) -> None:
    (env._level_index, env._player, stars, dots, keys, doors,
     env._score, env._status) = snap
    lvl = env.config.levels[env._level_index]
    env._stars = set(stars)
    env._dots = set(dots)
    env._keys = set(keys)
    env._doors = dict(doors)
    env._gens = {pos: color for pos, color in lvl.key_generators}
    env._walls = lvl.walls
    env._energy = BIG_ENERGY


def enumerate_reachable(config: GameConfig | None = None, check=None,
                        frame_check_stride: int = 17) -> int:
    """BFS over all reachable game states, running `check` on each transition.

    check(env, snap_before, action, moved_to, obs) is called for every
    (state, movement action) pair; obs is only rendered every
    frame_check_stride transitions to keep the sweep fast.
    """
    env = KeyQuest(config or default_config(), track_diffs=False)
    env.reset()
    env._energy = BIG_ENERGY
    start = _snapshot(env)
    seen = {start}
    queue = [start]
    transitions = 0
    while queue:
        snap = queue.pop()
        for action in MOVE_ACTIONS:
            _restore(env, snap)
            if env._status != GameStatus.NOT_FINISHED:
                continue
            before_pos = env._player
            want_obs = transitions % frame_check_stride == 0
            obs = env.step(ActionCommand(ActionId(action)))
            transitions += 1
            if check is not None:
                check(env, snap, action, before_pos, obs if want_obs else None)
            after = _snapshot(env)
            if after not in seen:
                seen.add(after)
                queue.append(after)
    return transitions


def _walkable(env: KeyQuest, snap, target) -> bool:
    level_index, _, stars, dots, keys, doors, _, _ = snap
    lvl = env.config.levels[level_index]
    r, c = target
    if not (0 <= r < env.config.height and 0 <= c < env.config.width):
        return False
    if target in lvl.walls:
        return False
    if any(pos == target for pos, _ in lvl.key_generators):
        return False
    if target in dict(doors):
        return False
    return True


# -- facts 1..15 --------------------------------------------------------------


def check_fact_01_reset_starts_game():
    env = KeyQuest(default_config(initial_energy=2))
    obs = env.reset()
    assert obs.status == GameStatus.NOT_FINISHED and obs.score == 0
    env.step(ActionCommand(ActionId.ACTION7))
    env.step(ActionCommand(ActionId.ACTION7))
    assert env.status == GameStatus.GAME_OVER
    obs2 = env.step(ActionCommand(ActionId.RESET))
    assert obs2.status == GameStatus.NOT_FINISHED
    assert obs2.frame == obs.frame and obs2.score == 0


def _player_domino(obs):
    bodies = [(r, c) for r, row in enumerate(obs.frame[1])
              for c, v in enumerate(row) if v == PLAYER_BODY_COLOR]
    caps = [(r, c) for r, row in enumerate(obs.frame[1])
            for c, v in enumerate(row) if v == PLAYER_CAP_COLOR]
    assert len(bodies) == 1 and len(caps) == 1, "exactly one player"
    (br, bc), (cr, cc) = bodies[0], caps[0]
    assert (cr, cc) == (br - 1, bc), "red cap sits directly on the blue body"
    return bodies[0]


_SWEEP_CACHE: dict[str, list] | None = None


def movement_sweep() -> dict[str, list]:
    """One exhaustive sweep validating facts 2-6; violations keyed per fact."""
    global _SWEEP_CACHE
    if _SWEEP_CACHE is not None:
        return _SWEEP_CACHE
    violations: dict[str, list] = {a: [] for a in MOVE_ACTIONS}
    violations["domino"] = []

    def check(env, snap, act, before_pos, obs):
        delta = DELTAS[act]
        target = (before_pos[0] + delta[0], before_pos[1] + delta[1])
        if env._level_index != snap[0] or env._status == GameStatus.WIN:
            # the move collected the last star: it must have been walkable
            if not (_walkable(env, snap, target) and target in snap[2]):
                violations[act].append((snap, act))
        elif _walkable(env, snap, target):
            if env._player != target:
                violations[act].append((snap, act, "did not move"))
        elif env._player != before_pos:
            violations[act].append((snap, act, "moved while blocked"))
        lvl = env.config.levels[env._level_index]
        if env._player in lvl.walls:
            violations[act].append((snap, act, "player inside a wall"))
        if obs is not None:
            try:
                body = _player_domino(obs)
                assert body == (env._player[0] + HUD_ROWS, env._player[1])
            except AssertionError as e:
                violations["domino"].append((snap, act, str(e)))

    enumerate_reachable(check=check, frame_check_stride=5)
    _SWEEP_CACHE = violations
    return violations


def check_fact_02_blue_platform_red_top_is_player():
    assert movement_sweep()["domino"] == []


def check_fact_03_action1_moves_up():
    assert movement_sweep()["ACTION1"] == []


def check_fact_04_action2_moves_down():
    assert movement_sweep()["ACTION2"] == []


def check_fact_05_action3_moves_left():
    assert movement_sweep()["ACTION3"] == []


def check_fact_06_action4_moves_right():
    assert movement_sweep()["ACTION4"] == []


def check_fact_07_every_action_costs_one_energy_pip():
    env = KeyQuest(default_config(initial_energy=24))
    obs = env.reset()

    def pips(o):
        return sum(1 for r in range(HUD_ROWS) for c in range(env.config.width)
                   if o.frame[0][r][c] == PIP_COLOR)

    assert pips(obs) == 24
    path = moves("ACTION1", "ACTION4", "ACTION7", "ACTION5", "ACTION3",
                 "ACTION3", "ACTION2", "ACTION2")
    for cmd in path:
        before = env.energy
        dots_before = set(env._dots)
        obs = env.step(cmd)
        bonus = env.config.energy_dot_bonus * (len(dots_before) - len(env._dots))
        assert env.energy == before - 1 + bonus
        assert pips(obs) == min(env.energy, env.config.pip_capacity)


def check_fact_08_generator_keys_match_doors():
    config = default_config()
    for lvl in config.levels:
        door_colors = {color for _, color in lvl.doors}
        for _, color in lvl.key_generators:
            assert color in door_colors, "generator produces keys for some door"


def check_fact_09_keygen_bump_creates_key_of_that_color():
    env = KeyQuest()
    env.reset()
    for cmd in moves(*["ACTION4"] * 7 + ["ACTION1"] * 3):
        env.step(cmd)
    gen_color = dict(env.config.levels[0].key_generators)[(5, 13)]
    assert env.inventory == frozenset()
    obs = env.step(ActionCommand(ActionId.ACTION1))
    assert env.inventory == {gen_color}
    # the key is visible in the HUD key slots
    assert obs.frame[0][1][env.config.width - 1] == gen_color


def _run_to_open_door(initial_energy=28):
    env = KeyQuest(default_config(initial_energy=initial_energy))
    env.reset()
    path = (["ACTION4"] * 7 + ["ACTION1"] * 4        # key at (5,13)
            + ["ACTION2"] * 2 + ["ACTION3"] * 6)     # to (8,7) facing the door
    for cmd in moves(*path):
        env.step(cmd)
    return env


def check_fact_10_keys_consumed_on_use():
    env = _run_to_open_door()
    assert env.inventory != frozenset()
    obs = env.step(ActionCommand(ActionId.ACTION1))  # open the door
    assert env.inventory == frozenset()
    assert obs.frame[0][1][env.config.width - 1] == 0  # HUD slot cleared


def check_fact_11_doors_disappear_when_opened():
    env = _run_to_open_door()
    door_cell = (7 + HUD_ROWS, 7)
    assert env._last_obs.frame[0][door_cell[0]][door_cell[1]] != 0
    env.step(ActionCommand(ActionId.ACTION1))
    assert env._last_obs.frame[0][door_cell[0]][door_cell[1]] == 0
    env.step(ActionCommand(ActionId.ACTION1))
    assert env.player_pos == (7, 7), "opened doorway is walkable"


def check_fact_12_energy_dots_add_energy():
    env = KeyQuest()
    env.reset()
    for cmd in moves("ACTION3", "ACTION3"):
        env.step(cmd)
    before = env.energy
    env.step(ActionCommand(ActionId.ACTION2))  # onto the dot at (10,4)
    assert env.energy == before - 1 + env.config.energy_dot_bonus


def check_fact_13_game_over_at_zero_energy():
    env = KeyQuest(default_config(initial_energy=3))
    env.reset()
    env.step(ActionCommand(ActionId.ACTION5))
    env.step(ActionCommand(ActionId.ACTION5))
    assert env.status == GameStatus.NOT_FINISHED and env.energy == 1
    obs = env.step(ActionCommand(ActionId.ACTION5))
    assert env.energy == 0 and obs.status == GameStatus.GAME_OVER


def check_fact_14_stars_are_collectible():
    env = KeyQuest()
    env.reset()
    star = (11, 3)
    assert star in env.stars_remaining
    for cmd in moves("ACTION3", "ACTION3", "ACTION3", "ACTION2", "ACTION2"):
        env.step(cmd)
    assert env.player_pos == (11, 3)
    assert star not in env.stars_remaining
    assert env._last_obs.frame[0][star[0] + HUD_ROWS][star[1]] != STAR_COLOR


def check_fact_15_all_stars_complete_level():
    from .test_env import WIN_PATH_L1, WIN_PATH_L2

    env = KeyQuest(default_config(initial_energy=28, energy_dot_bonus=12))
    env.reset()
    for cmd in moves(*WIN_PATH_L1):
        obs = env.step(cmd)
    assert env.score == 1 and env.level_index == 1, "level completes, score +1"
    for cmd in moves(*WIN_PATH_L2):
        obs = env.step(cmd)
    assert obs.status == GameStatus.WIN and obs.score == 2, "last level wins"


ALL_FACT_CHECKS = [
    ("fact 01: RESET starts the game", check_fact_01_reset_starts_game),
    ("fact 02: blue platform with red top is the player", check_fact_02_blue_platform_red_top_is_player),
    ("fact 03: ACTION1 moves the player one cell up", check_fact_03_action1_moves_up),
    ("fact 04: ACTION2 moves the player one cell down", check_fact_04_action2_moves_down),
    ("fact 05: ACTION3 moves the player one cell left", check_fact_05_action3_moves_left),
    ("fact 06: ACTION4 moves the player one cell right", check_fact_06_action4_moves_right),
    ("fact 07: each action consumes one energy pip", check_fact_07_every_action_costs_one_energy_pip),
    ("fact 08: key generators match doors", check_fact_08_generator_keys_match_doors),
    ("fact 09: keygen bump creates a key of that color", check_fact_09_keygen_bump_creates_key_of_that_color),
    ("fact 10: keys are consumed on use", check_fact_10_keys_consumed_on_use),
    ("fact 11: doors disappear when opened", check_fact_11_doors_disappear_when_opened),
    ("fact 12: energy dots add energy", check_fact_12_energy_dots_add_energy),
    ("fact 13: game over at zero energy", check_fact_13_game_over_at_zero_energy),
    ("fact 14: stars are collectible", check_fact_14_stars_are_collectible),
    ("fact 15: collecting all stars completes the level", check_fact_15_all_stars_complete_level),
]
