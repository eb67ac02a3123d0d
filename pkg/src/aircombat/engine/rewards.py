"""Reward functions of the three control modes and of the commander."""

from .. import geometry as geo
from ..errors import InvalidStateError
from .observe import hostile_team, ranked_others

ATTACK_RANGE = (-1.0, 1.0)
ENGAGE_RANGE = (0.0, 2.0)
DEFEND_RANGE = (-2.0, 0.0)


def reward_attack(c_max, c_rem, destroyed):
    """Fraction of cannon rounds spent, minus one if destroyed.

    Evaluated once, when the aircraft dies or the episode ends.
    """
    if c_max <= 0 or not 0 <= c_rem <= c_max:
        raise InvalidStateError(f"remaining rounds {c_rem} outside [0, {c_max}]")
    return (c_max - c_rem) / c_max + (-1.0 if destroyed else 0.0)


def engage_terms(world, agent_id):
    """``(ata_term, aa_term)`` against the nearest living opponent, or ``None``.

    ``ata_term`` is the opponent's antenna train angle onto the agent over 180
    (1 when the agent sits on its tail); ``aa_term`` is one minus the
    opponent's aspect angle over 180 (1 when it flies away from the agent).
    """
    me = world.get(agent_id)
    if not me.alive:
        return None
    ranked = ranked_others(world, me, hostile_team(me.team))
    if not ranked or ranked[0][0] <= geo.COINCIDENT_KM:
        return None
    opp = ranked[0][1]
    ata_term = geo.ata(opp.pos, opp.heading, me.pos) / 180.0
    aa_term = 1.0 - geo.aspect_angle(me.pos, opp.pos, opp.heading) / 180.0
    return ata_term, aa_term


def reward_engage(world, agent_id):
    """Dense per-tick tail-position reward in ``[0, 2]``."""
    terms = engage_terms(world, agent_id)
    if terms is None:
        return 0.0
    return terms[0] + terms[1]


def reward_defend(destroyed, caused_friendly_kill):
    return (-1.0 if destroyed else 0.0) + (-1.0 if caused_friendly_kill else 0.0)


def reward_commander(events_in_window, agent_id, team_of=None):
    """+1 per opponent this agent destroyed in the window, -1 if it was destroyed.

    ``events_in_window`` is an iterable of :class:`StepEvents`. Friendly kills
    are not counted as kills when ``team_of`` (id -> team) is given.
    """
    total = 0.0
    for ev in events_in_window:
        for victim, killer in ev.kills:
            if killer == agent_id and victim != agent_id:
                if team_of is None or team_of[victim] != team_of[agent_id]:
                    total += 1.0
            if victim == agent_id:
                total -= 1.0
    return total
