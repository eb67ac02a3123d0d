"""Head-to-head evaluation of team policies."""

from ..engine.types import OPPONENT
from ..errors import InvalidConfigError
from ..runner import outcome_fractions, run_episodes


def evaluate(agents, opponents, scenario, episodes, seed=0, batch=16):
    """Win/loss/draw fractions of ``agents`` against ``opponents``.

    Outcomes are from the agent team's side; the result also carries the
    episode count and seed.
    """
    if not isinstance(episodes, int) or episodes < 1:
        raise InvalidConfigError("episodes must be a positive integer")
    results = run_episodes(scenario, agents, opponents, episodes, seed=seed, batch=batch)
    out = outcome_fractions(results)
    out.update(episodes=episodes, seed=seed)
    return out


def kill_rate(results):
    """Fraction of episodes in which at least one opponent was destroyed."""
    return sum(r.losses[OPPONENT] > 0 for r in results) / len(results)
