"""Temporally extended options selected by the commander."""

from dataclasses import dataclass

from ..errors import InvalidCommandError
from .types import HOLD, OPTION_TICKS, StepEvents
from .world import Outcome

ATTACK, ENGAGE, DEFEND = 0, 1, 2
MODES = ("attack", "engage", "defend")


def mode_index(mode):
    if isinstance(mode, str):
        try:
            return MODES.index(mode)
        except ValueError:
            raise InvalidCommandError(f"unknown mode {mode!r}") from None
    if mode not in (ATTACK, ENGAGE, DEFEND):
        raise InvalidCommandError(f"unknown mode {mode!r}")
    return int(mode)


@dataclass
class OptionCommand:
    mode: int
    duration: int = OPTION_TICKS
    elapsed: int = 0

    def __post_init__(self):
        self.mode = mode_index(self.mode)
        if self.duration < 1 or not 0 <= self.elapsed <= self.duration:
            raise InvalidCommandError("option needs duration >= 1 and 0 <= elapsed <= duration")

    @property
    def name(self):
        return MODES[self.mode]

    @property
    def done(self):
        return self.elapsed >= self.duration


def initiation(world, agent_id):
    """Every option may start in any state where the agent is alive."""
    return agent_id in world and world.get(agent_id).alive


def terminated(world, agent_id):
    """Early termination fires only when the agent has been destroyed."""
    return not world.get(agent_id).alive


def _as_controller(controller):
    if callable(controller):
        return controller
    from ..agents import NetController

    return NetController(controller, greedy=True)


def run_option(world, agent_id, cmd, controller, others=None):
    """Run one option for ``agent_id`` in place.

    Every other living aircraft is driven by ``others(world, aircraft_id)``
    (default: hold course). Returns ``(world, events, reason)`` with reason
    one of ``"duration"``, ``"death"`` or ``"episode_end"``.
    """
    if not initiation(world, agent_id):
        raise InvalidCommandError(f"aircraft {agent_id} cannot start an option")
    ctrl = _as_controller(controller)
    events = StepEvents()
    reason = "duration"
    while not cmd.done:
        actions = {}
        for a in world.aircraft:
            if not a.alive:
                continue
            if a.id == agent_id:
                actions[a.id] = ctrl(world, a.id)
            else:
                actions[a.id] = others(world, a.id) if others is not None else HOLD
        events.extend(world.step(actions))
        cmd.elapsed += 1
        if terminated(world, agent_id):
            reason = "death"
            break
        if world.outcome() is not Outcome.ONGOING:
            reason = "episode_end"
            break
    return world, events, reason
