"""Observation vectors for low-level controllers and the commander.

Low-level layout (width 21)::

    own      x/map, y/map, sin(heading), cos(heading), speed frac, ammo frac, has rockets
    friend   valid, d/map, sin(rel bearing), cos(rel bearing), ATA/180, AA/180, ammo frac
    hostile  same as friend

Commander layout (width 8 + 10 m)::

    own      type index, x/map, y/map, sin(heading), cos(heading), speed frac, ammo frac, rocket frac
    m hostile blocks, then m friendly blocks, each
             d/30km, ATA/180, AA/180, type index, valid

Entity blocks are sorted nearest first and zero padded.
"""

import math

import numpy as np

from .. import geometry as geo
from ..errors import InvalidConfigError, InvalidQueryError
from .types import AGENT, OPPONENT

OWN_WIDTH = 7
REL_WIDTH = 7
LOW_LEVEL_OBS_WIDTH = OWN_WIDTH + 2 * REL_WIDTH

COMMANDER_OWN_WIDTH = 8
ENTITY_WIDTH = 5
COMMANDER_DISTANCE_SCALE_KM = 30.0
MAX_SENSING = 5

# entity block fields
E_DIST, E_ATA, E_AA, E_TYPE, E_VALID = range(ENTITY_WIDTH)


def commander_obs_width(m):
    return COMMANDER_OWN_WIDTH + 2 * m * ENTITY_WIDTH


def hostile_block(m, k=0):
    """Slice of the ``k``-th nearest hostile block in a commander observation."""
    start = COMMANDER_OWN_WIDTH + k * ENTITY_WIDTH
    return slice(start, start + ENTITY_WIDTH)


def friendly_block(m, k=0):
    start = COMMANDER_OWN_WIDTH + (m + k) * ENTITY_WIDTH
    return slice(start, start + ENTITY_WIDTH)


def encode_entity(d_km, ata_deg, aa_deg, type_index, valid=1.0):
    return np.array([d_km / COMMANDER_DISTANCE_SCALE_KM, ata_deg / 180.0, aa_deg / 180.0,
                     float(type_index), float(valid)])


def decode_entity(block):
    """``(d_km, ata_deg, aa_deg, type_index, valid)`` from an entity block."""
    return (float(block[E_DIST]) * COMMANDER_DISTANCE_SCALE_KM, float(block[E_ATA]) * 180.0,
            float(block[E_AA]) * 180.0, int(round(block[E_TYPE])), float(block[E_VALID]))


def hostile_team(team):
    return OPPONENT if team == AGENT else AGENT


def _speed_frac(a):
    return (a.speed - a.spec.v_min) / (a.spec.v_max - a.spec.v_min)


def _ammo_frac(a):
    return a.cannon_remaining / a.spec.cannon_capacity


def ranked_others(world, me, team):
    """Living aircraft of ``team`` other than ``me``, as ``(distance, aircraft)`` nearest first."""
    out = []
    for o in world.aircraft:
        if o is me or not o.alive or o.team != team:
            continue
        out.append((math.hypot(o.x - me.x, o.y - me.y), o.id, o))
    out.sort(key=lambda t: (t[0], t[1]))
    return [(d, o) for d, _, o in out]


def _relative_block(world, me, other, d):
    if other is None or d <= geo.COINCIDENT_KM:
        return [0.0] * REL_WIDTH
    rb = math.radians(geo.relative_bearing(me.pos, me.heading, other.pos))
    return [
        1.0,
        d / world.config.map_size,
        math.sin(rb),
        math.cos(rb),
        geo.ata(me.pos, me.heading, other.pos) / 180.0,
        geo.aspect_angle(me.pos, other.pos, other.heading) / 180.0,
        _ammo_frac(other),
    ]


def low_level_observation(world, agent_id):
    me = world.get(agent_id)
    if not me.alive:
        raise InvalidQueryError(f"aircraft {agent_id} is destroyed")
    size = world.config.map_size
    rad = math.radians(me.heading)
    obs = [me.x / size, me.y / size, math.sin(rad), math.cos(rad), _speed_frac(me),
           _ammo_frac(me), 1.0 if me.rockets_remaining > 0 else 0.0]
    for team in (me.team, hostile_team(me.team)):
        ranked = ranked_others(world, me, team)
        d, other = ranked[0] if ranked else (0.0, None)
        obs.extend(_relative_block(world, me, other, d))
    return np.array(obs)


def _entity_blocks(me, ranked, m):
    blocks = []
    for d, o in ranked[:m]:
        if d <= geo.COINCIDENT_KM:
            ata_deg, aa_deg = 0.0, 0.0
        else:
            ata_deg = geo.ata(me.pos, me.heading, o.pos)
            aa_deg = geo.aspect_angle(me.pos, o.pos, o.heading)
        blocks.extend([d / COMMANDER_DISTANCE_SCALE_KM, ata_deg / 180.0, aa_deg / 180.0,
                       float(o.spec.type_index), 1.0])
    blocks.extend([0.0] * (ENTITY_WIDTH * (m - min(m, len(ranked)))))
    return blocks


def commander_observation(world, agent_id, m):
    if not isinstance(m, (int, np.integer)) or not 1 <= m <= MAX_SENSING:
        raise InvalidConfigError(f"sensing capability m={m!r} outside 1..{MAX_SENSING}")
    me = world.get(agent_id)
    if not me.alive:
        raise InvalidQueryError(f"aircraft {agent_id} is destroyed")
    size = world.config.map_size
    rad = math.radians(me.heading)
    rockets = me.rockets_remaining / me.spec.rocket_count if me.spec.rocket_count else 0.0
    obs = [float(me.spec.type_index), me.x / size, me.y / size, math.sin(rad), math.cos(rad),
           _speed_frac(me), _ammo_frac(me), rockets]
    obs.extend(_entity_blocks(me, ranked_others(world, me, hostile_team(me.team)), m))
    obs.extend(_entity_blocks(me, ranked_others(world, me, me.team), m))
    return np.array(obs)
