import pytest

from aircombat.engine.rewards import (
    engage_terms, reward_attack, reward_commander, reward_defend, reward_engage,
)
from aircombat.engine.types import AGENT, OPPONENT, StepEvents
from aircombat.errors import InvalidStateError
from conftest import make_world, plane
from oracles import random_reward_violations


@pytest.mark.parametrize("c_rem,destroyed,expected", [
    (50, False, 0.0), (0, False, 1.0), (25, False, 0.5), (50, True, -1.0), (0, True, 0.0), (40, True, -0.8),
])
def test_attack_reward_examples(c_rem, destroyed, expected):
    assert reward_attack(50, c_rem, destroyed) == pytest.approx(expected)


@pytest.mark.parametrize("c_max,c_rem", [(50, 51), (50, -1), (0, 0)])
def test_attack_reward_rejects_bad_ammo(c_max, c_rem):
    with pytest.raises(InvalidStateError):
        reward_attack(c_max, c_rem, False)


def test_defend_reward_examples():
    assert reward_defend(False, False) == 0.0
    assert reward_defend(True, False) == -1.0
    assert reward_defend(False, True) == -1.0
    assert reward_defend(True, True) == -2.0


def test_engage_reward_on_the_tail_is_two():
    # agent 1 km behind an opponent flying away from it
    w = make_world([plane(1, AGENT, 30, 30, 0), plane(2, OPPONENT, 30, 31, 0)])
    assert engage_terms(w, 1) == pytest.approx((1.0, 1.0))
    assert reward_engage(w, 1) == pytest.approx(2.0)


def test_engage_reward_head_on_is_zero():
    w = make_world([plane(1, AGENT, 30, 30, 0), plane(2, OPPONENT, 30, 31, 180)])
    assert reward_engage(w, 1) == pytest.approx(0.0, abs=1e-12)


def test_engage_reward_uses_nearest_opponent_and_dead_agent_gets_zero():
    w = make_world([plane(1, AGENT, 30, 30, 0), plane(2, OPPONENT, 30, 31, 180), plane(3, OPPONENT, 30, 35, 0)])
    assert reward_engage(w, 1) == pytest.approx(0.0, abs=1e-12)
    w.get(2).alive = False
    assert reward_engage(w, 1) == pytest.approx(2.0)
    w.get(1).alive = False
    assert reward_engage(w, 1) == 0.0


def test_commander_reward_counts_kills_and_death():
    team_of = {1: AGENT, 2: AGENT, 3: OPPONENT, 4: OPPONENT}
    events = [StepEvents(kills=[(3, 1)]), StepEvents(kills=[(2, 1)]), StepEvents(kills=[(4, 1), (1, 4)])]
    assert reward_commander(events, 1, team_of) == pytest.approx(1.0)  # +1 +0 +1 -1
    assert reward_commander(events, 2, team_of) == pytest.approx(-1.0)
    assert reward_commander([], 1, team_of) == 0.0


def test_random_episodes_respect_reward_ranges():
    violations, ticks, terminals = random_reward_violations(60, seed=1)
    assert terminals == 120 and ticks > 0
    assert violations == []
