"""The 15 ground-truth game facts, one named test each.

Movement facts run over an exhaustive enumeration of reachable states of
the 16x16 reference game; the rest are scripted transcripts.
"""

from __future__ import annotations

from . import game_facts_lib as lib


def test_fact_01_reset_starts_game():
    lib.check_fact_01_reset_starts_game()


def test_fact_02_blue_platform_with_red_top_is_player():
    lib.check_fact_02_blue_platform_red_top_is_player()


def test_fact_03_action1_moves_player_up():
    lib.check_fact_03_action1_moves_up()


def test_fact_04_action2_moves_player_down():
    lib.check_fact_04_action2_moves_down()


def test_fact_05_action3_moves_player_left():
    lib.check_fact_05_action3_moves_left()


def test_fact_06_action4_moves_player_right():
    lib.check_fact_06_action4_moves_right()


def test_fact_07_each_action_consumes_one_energy_pip():
    lib.check_fact_07_every_action_costs_one_energy_pip()


def test_fact_08_key_generator_produces_keys_for_doors():
    lib.check_fact_08_generator_keys_match_doors()


def test_fact_09_walking_into_keygen_creates_matching_key():
    lib.check_fact_09_keygen_bump_creates_key_of_that_color()


def test_fact_10_keys_consumed_when_opening_doors():
    lib.check_fact_10_keys_consumed_on_use()


def test_fact_11_doors_disappear_when_opened():
    lib.check_fact_11_doors_disappear_when_opened()


def test_fact_12_energy_dots_provide_additional_energy():
    lib.check_fact_12_energy_dots_add_energy()


def test_fact_13_game_over_when_energy_reaches_zero():
    lib.check_fact_13_game_over_at_zero_energy()


def test_fact_14_stars_are_collectible():
    lib.check_fact_14_stars_are_collectible()


def test_fact_15_collecting_all_stars_completes_level():
    lib.check_fact_15_all_stars_complete_level()
