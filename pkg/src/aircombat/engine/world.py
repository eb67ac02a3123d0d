"""World state and the per-tick transition."""

import copy
import enum
import math

import numpy as np

from .. import geometry as geo
from ..errors import InvalidActionError
from .types import (
    AC1, AC2, AGENT, HEADING_STEP_DEG, HETEROGENEOUS, KNOT_KM_S, OPPONENT,
    ROCKET_KILL_RADIUS_KM, ROCKET_LIFETIME, ROCKET_LOCK_ATA, ROCKET_LOCK_RANGE_FACTOR,
    ROCKET_SPEED_KN, ROCKET_TURN_RATE, SPAWN_BAND_KM, SPAWN_HEADING_SPREAD,
    AircraftState, RocketState, ScenarioConfig, StepEvents,
)


class Outcome(enum.Enum):
    WIN = "win"
    LOSS = "loss"
    DRAW = "draw"
    ONGOING = "ongoing"


class World:
    """Full simulation state of one episode.

    The instance is mutated in place by :meth:`step`; use :func:`step` for a
    copy-on-write transition.
    """

    def __init__(self, config, aircraft, rng, tick=0, rockets=None):
        self.config = config
        self.aircraft = aircraft
        self.rng = rng
        self.tick = tick
        self.rockets = rockets if rockets is not None else []
        self._by_id = {a.id: a for a in aircraft}
        # per-episode scratch space for team policies; not part of the simulated state
        self.info = {}

    @property
    def map_size(self):
        return self.config.map_size

    @property
    def max_ticks(self):
        return self.config.max_ticks

    def get(self, aircraft_id):
        return self._by_id[aircraft_id]

    def __contains__(self, aircraft_id):
        return aircraft_id in self._by_id

    def living(self, team=None):
        return [a for a in self.aircraft if a.alive and (team is None or a.team == team)]

    def living_ids(self, team=None):
        return [a.id for a in self.aircraft if a.alive and (team is None or a.team == team)]

    def team_ids(self, team):
        return [a.id for a in self.aircraft if a.team == team]

    def copy(self):
        return copy.deepcopy(self)

    def outcome(self):
        return outcome(self)

    def is_over(self):
        return outcome(self) is not Outcome.ONGOING

    def step(self, joint_actions):
        """Advance one tick in place and return the tick's events."""
        return _step_inplace(self, joint_actions)

    def snapshot(self):
        """JSON-ready dump of the mutable state."""
        return {
            "tick": self.tick,
            "aircraft": [
                {
                    "id": a.id, "team": a.team, "type": a.spec.type_id,
                    "x": a.x, "y": a.y, "heading": a.heading,
                    "heading_setpoint": a.heading_setpoint, "speed": a.speed,
                    "cannon_remaining": a.cannon_remaining,
                    "rockets_remaining": a.rockets_remaining, "alive": a.alive,
                }
                for a in self.aircraft
            ],
            "rockets": [
                {
                    "shooter_id": r.shooter_id, "target_id": r.target_id,
                    "x": r.x, "y": r.y, "heading": r.heading,
                    "ticks_remaining": r.ticks_remaining,
                }
                for r in self.rockets
            ],
        }


def _team_types(n, composition, rng):
    if composition != HETEROGENEOUS:
        return [AC1] * n
    if n == 1:
        return [AC1 if rng.random() < 0.5 else AC2]
    types = [AC1, AC2] + [AC1 if u < 0.5 else AC2 for u in rng.random(n - 2)]
    order = rng.permutation(n)
    return [types[i] for i in order]


def spawn_scenario(config, rng=None):
    """Draw an initial world for ``config``.

    Agents spawn in the southern band and opponents in the northern band,
    each pointed at the other band within a 45 degree spread.
    """
    config.validate()
    if rng is None:
        rng = np.random.default_rng(config.seed)
    size = config.map_size
    aircraft = []
    next_id = 1
    for team, n, y0, base in (
        (AGENT, config.n_agents, 0.0, 0.0),
        (OPPONENT, config.n_opponents, size - SPAWN_BAND_KM, 180.0),
    ):
        for spec in _team_types(n, config.composition, rng):
            x = float(rng.uniform(0.0, size))
            y = float(rng.uniform(y0, y0 + SPAWN_BAND_KM))
            heading = geo.wrap_heading(base + float(rng.uniform(-SPAWN_HEADING_SPREAD, SPAWN_HEADING_SPREAD)))
            aircraft.append(AircraftState(
                id=next_id, team=team, spec=spec, x=x, y=y,
                heading=heading, heading_setpoint=heading,
                speed=map_velocity(4, spec),
                cannon_remaining=spec.cannon_capacity,
                rockets_remaining=spec.rocket_count,
            ))
            next_id += 1
    return World(config, aircraft, rng)


def apply_heading_command(current, h):
    """Heading setpoint after a relative turn command of ``15 * h`` degrees."""
    if not isinstance(h, (int, np.integer)) or not -6 <= h <= 6:
        raise InvalidActionError(f"heading command {h!r} outside -6..6")
    return geo.wrap_heading(current + HEADING_STEP_DEG * h)


def map_velocity(v, spec):
    """Speed in knots for velocity level ``v`` of an aircraft type."""
    if not isinstance(v, (int, np.integer)) or not 0 <= v <= 8:
        raise InvalidActionError(f"velocity command {v!r} outside 0..8")
    return spec.v_min + (v / 8.0) * (spec.v_max - spec.v_min)


def turn_toward(heading, setpoint, max_turn):
    delta = geo.signed_delta(heading, setpoint)
    if delta > max_turn:
        delta = max_turn
    elif delta < -max_turn:
        delta = -max_turn
    return geo.wrap_heading(heading + delta)


def _keep_in_bounds(a, size):
    # clamp to the edge and mirror the heading component pointing outwards
    if a.x < 0.0 or a.x > size:
        a.x = min(max(a.x, 0.0), size)
        a.heading = geo.wrap_heading(-a.heading)
        a.heading_setpoint = geo.wrap_heading(-a.heading_setpoint)
    if a.y < 0.0 or a.y > size:
        a.y = min(max(a.y, 0.0), size)
        a.heading = geo.wrap_heading(180.0 - a.heading)
        a.heading_setpoint = geo.wrap_heading(180.0 - a.heading_setpoint)


def _move_aircraft(a, action, dt, size):
    a.heading_setpoint = apply_heading_command(a.heading, action.h)
    a.heading = turn_toward(a.heading, a.heading_setpoint, a.spec.omega_max * dt)
    a.speed = map_velocity(action.v, a.spec)
    dist = a.speed * KNOT_KM_S * dt
    rad = math.radians(a.heading)
    a.x += dist * math.sin(rad)
    a.y += dist * math.cos(rad)
    _keep_in_bounds(a, size)


def wez_targets(world, shooter):
    """Living aircraft inside the shooter's cannon cone, nearest first."""
    out = []
    for other in world.aircraft:
        if other is shooter or not other.alive:
            continue
        d = math.hypot(other.x - shooter.x, other.y - shooter.y)
        if d > shooter.spec.d_a_max or d <= geo.COINCIDENT_KM:
            continue
        if geo.ata(shooter.pos, shooter.heading, other.pos) <= shooter.spec.wez_half_angle_max:
            out.append((d, other.id, other))
    out.sort(key=lambda t: (t[0], t[1]))
    return [t[2] for t in out]


def resolve_cannon(world, shooter_id, rng=None):
    """One gated cannon trigger pull.

    A round is spent only if some aircraft, friend or foe, is inside the
    cone; the nearest one is the target. Kills are reported but not applied.
    """
    rng = world.rng if rng is None else rng
    shooter = world.get(shooter_id)
    events = StepEvents()
    if not shooter.alive or shooter.cannon_remaining <= 0:
        return events
    targets = wez_targets(world, shooter)
    if not targets:
        return events
    target = targets[0]
    shooter.cannon_remaining -= 1
    hit = bool(rng.random() < shooter.spec.hit_prob)
    events.cannon_shots.append((shooter.id, target.id, hit))
    if hit:
        events.kills.append((target.id, shooter.id))
        if target.team == shooter.team:
            events.friendly_fire_hits.append((shooter.id, target.id))
    return events


def rocket_lock(world, shooter):
    best = None
    lock_range = ROCKET_LOCK_RANGE_FACTOR * shooter.spec.d_a_max
    for other in world.aircraft:
        if not other.alive or other.team == shooter.team:
            continue
        d = math.hypot(other.x - shooter.x, other.y - shooter.y)
        if d <= geo.COINCIDENT_KM:
            continue
        if best is None or (d, other.id) < best[:2]:
            best = (d, other.id, other)
    if best is None or best[0] > lock_range:
        return None
    target = best[2]
    if geo.ata(shooter.pos, shooter.heading, target.pos) > ROCKET_LOCK_ATA:
        return None
    return target


def fire_rocket(world, shooter_id):
    """Launch a rocket at the locked target, if any. Invalid launches are no-ops."""
    shooter = world.get(shooter_id)
    events = StepEvents()
    if not shooter.alive or shooter.rockets_remaining <= 0:
        return events
    target = rocket_lock(world, shooter)
    if target is None:
        return events
    shooter.rockets_remaining -= 1
    world.rockets.append(RocketState(
        shooter_id=shooter.id, target_id=target.id, x=shooter.x, y=shooter.y,
        heading=shooter.heading, speed=ROCKET_SPEED_KN, ticks_remaining=ROCKET_LIFETIME,
    ))
    events.rocket_launches.append((shooter.id, target.id))
    return events


def _segment_point_distance(x0, y0, x1, y1, px, py):
    dx, dy = x1 - x0, y1 - y0
    seg2 = dx * dx + dy * dy
    t = 0.0 if seg2 == 0.0 else min(max(((px - x0) * dx + (py - y0) * dy) / seg2, 0.0), 1.0)
    return math.hypot(x0 + t * dx - px, y0 + t * dy - py)


def update_rockets(world, rng=None, dt=None):
    """Advance every rocket one tick, applying rocket kills immediately."""
    dt = world.config.dt if dt is None else dt
    events = StepEvents()
    survivors = []
    for r in world.rockets:
        target = world.get(r.target_id)
        if not target.alive:
            continue
        d = math.hypot(target.x - r.x, target.y - r.y)
        if d > geo.COINCIDENT_KM:
            r.heading = turn_toward(r.heading, geo.bearing(r.pos, target.pos), ROCKET_TURN_RATE * dt)
        step = r.speed * KNOT_KM_S * dt
        rad = math.radians(r.heading)
        x1 = r.x + step * math.sin(rad)
        y1 = r.y + step * math.cos(rad)
        miss = _segment_point_distance(r.x, r.y, x1, y1, target.x, target.y)
        r.x, r.y = x1, y1
        r.ticks_remaining -= 1
        if miss <= ROCKET_KILL_RADIUS_KM:
            target.alive = False
            events.rocket_hits.append((r.shooter_id, target.id))
            events.kills.append((target.id, r.shooter_id))
            continue
        if r.ticks_remaining > 0:
            survivors.append(r)
    world.rockets = survivors
    return events


def _validate_actions(world, joint_actions):
    for aid in joint_actions:
        if aid not in world:
            raise InvalidActionError(f"action for unknown aircraft {aid}")
        if not world.get(aid).alive:
            raise InvalidActionError(f"action for destroyed aircraft {aid}")
    for a in world.aircraft:
        if a.alive and a.id not in joint_actions:
            raise InvalidActionError(f"missing action for living aircraft {a.id}")
        if a.alive:
            joint_actions[a.id].validate()


def _step_inplace(world, joint_actions):
    _validate_actions(world, joint_actions)
    dt = world.config.dt
    size = world.config.map_size
    shooters = [a for a in world.aircraft if a.alive]
    for a in shooters:
        _move_aircraft(a, joint_actions[a.id], dt, size)

    events = StepEvents()
    # all cannons fire against the same post-move picture, kills land afterwards
    for a in shooters:
        if joint_actions[a.id].c_c:
            events.extend(resolve_cannon(world, a.id))
    victims = set()
    kills = []
    for victim, killer in events.kills:
        if victim not in victims:
            victims.add(victim)
            kills.append((victim, killer))
    events.kills = kills
    for victim in victims:
        world.get(victim).alive = False

    for a in shooters:
        if joint_actions[a.id].c_r and a.alive:
            events.extend(fire_rocket(world, a.id))
    events.extend(update_rockets(world, dt=dt))
    world.tick += 1
    return events


def step(world, joint_actions):
    """Copy-on-write transition: returns ``(new_world, events)``."""
    new = world.copy()
    events = new.step(dict(joint_actions))
    return new, events


def outcome(world):
    agents = any(a.alive for a in world.aircraft if a.team == AGENT)
    opponents = any(a.alive for a in world.aircraft if a.team == OPPONENT)
    if not agents and not opponents:
        return Outcome.DRAW
    if not opponents:
        return Outcome.WIN
    if not agents:
        return Outcome.LOSS
    if world.tick >= world.config.max_ticks:
        return Outcome.DRAW
    return Outcome.ONGOING

