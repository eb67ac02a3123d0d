import numpy as np
import pytest

from aircombat.engine.types import AC1, AC2, AGENT, OPPONENT, AircraftState, ScenarioConfig
from aircombat.engine.world import World, map_velocity


def plane(aid, team, x, y, heading, spec=AC1, v=4, alive=True):
    return AircraftState(id=aid, team=team, spec=spec, x=float(x), y=float(y), heading=float(heading),
                         heading_setpoint=float(heading), speed=map_velocity(v, spec),
                         cannon_remaining=spec.cannon_capacity, rockets_remaining=spec.rocket_count,
                         alive=alive)


def make_world(planes, seed=0, map_size=60.0, max_ticks=500):
    n_a = sum(p.team == AGENT for p in planes)
    n_o = sum(p.team == OPPONENT for p in planes)
    cfg = ScenarioConfig(max(n_a, 1), max(n_o, 1), map_size=map_size, max_ticks=max_ticks, seed=seed)
    return World(cfg, planes, np.random.default_rng(seed))


@pytest.fixture
def duel():
    """Agent 1 at the origin-ish pointing north, opponent 2 one km ahead flying north."""
    return make_world([plane(1, AGENT, 30, 30, 0), plane(2, OPPONENT, 30, 31, 0)])


__all__ = ["AC1", "AC2", "AGENT", "OPPONENT", "make_world", "plane"]


def pytest_terminal_summary(terminalreporter):
    from oracles import ACCEPTANCE
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
