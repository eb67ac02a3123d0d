"""Aircraft types, state records and actions."""

from dataclasses import dataclass, field, replace

from ..errors import InvalidActionError, InvalidConfigError

KNOT_KM_S = 1.852 / 3600.0

DT = 1.0
MAX_TICKS = 500
MAP_SIZE_KM = 60.0
SPAWN_BAND_KM = 15.0
SPAWN_HEADING_SPREAD = 45.0
OPTION_TICKS = 20
CANNON_ROUNDS = 50
AC1_ROCKETS = 4

ROCKET_SPEED_KN = 1200.0
ROCKET_TURN_RATE = 12.0
ROCKET_LIFETIME = 60
ROCKET_KILL_RADIUS_KM = 0.1
ROCKET_LOCK_RANGE_FACTOR = 2.0
ROCKET_LOCK_ATA = 30.0

HEADING_STEP_DEG = 15.0
HEADING_LEVELS = 13  # h in -6..6
SPEED_LEVELS = 9  # v in 0..8
LOW_LEVEL_HEADS = (HEADING_LEVELS, SPEED_LEVELS, 2, 2)

AGENT = "agent"
OPPONENT = "opponent"

HOMOGENEOUS = "homogeneous_AC1"
HETEROGENEOUS = "heterogeneous"


@dataclass(frozen=True)
class AircraftSpec:
    type_id: str
    type_index: int
    omega_max: float  # deg/s
    v_min: float  # knots
    v_max: float
    wez_half_angle_max: float  # deg
    d_a_max: float  # km
    hit_prob: float
    cannon_capacity: int
    rocket_count: int


AC1 = AircraftSpec("AC1", 0, 5.0, 100.0, 900.0, 10.0, 2.0, 0.70, CANNON_ROUNDS, AC1_ROCKETS)
AC2 = AircraftSpec("AC2", 1, 3.6, 100.0, 600.0, 7.0, 4.5, 0.85, CANNON_ROUNDS, 0)
SPECS = {"AC1": AC1, "AC2": AC2}
SPEC_BY_INDEX = (AC1, AC2)


@dataclass(slots=True)
class AircraftState:
    id: int
    team: str
    spec: AircraftSpec
    x: float
    y: float
    heading: float
    heading_setpoint: float
    speed: float
    cannon_remaining: int
    rockets_remaining: int
    alive: bool = True

    @property
    def pos(self):
        return (self.x, self.y)


@dataclass(slots=True)
class RocketState:
    shooter_id: int
    target_id: int
    x: float
    y: float
    heading: float
    speed: float
    ticks_remaining: int

    @property
    def pos(self):
        return (self.x, self.y)


@dataclass(frozen=True, slots=True)
class LowLevelAction:
    """One tick of manoeuvre and weapon commands.

    ``h`` turns the heading setpoint by ``15 * h`` degrees, ``v`` selects one
    of nine evenly spaced speeds, ``c_c`` pulls the cannon trigger and
    ``c_r`` requests a rocket launch.
    """

    h: int = 0
    v: int = 4
    c_c: int = 0
    c_r: int = 0

    def validate(self):
        if not -6 <= self.h <= 6:
            raise InvalidActionError(f"heading command {self.h} outside -6..6")
        if not 0 <= self.v <= 8:
            raise InvalidActionError(f"velocity command {self.v} outside 0..8")
        if self.c_c not in (0, 1) or self.c_r not in (0, 1):
            raise InvalidActionError("fire commands must be 0 or 1")
        return self

    def to_indices(self):
        """Head indices as used by the policy heads."""
        return (self.h + 6, self.v, self.c_c, self.c_r)

    @classmethod
    def from_indices(cls, idx):
        return cls(int(idx[0]) - 6, int(idx[1]), int(idx[2]), int(idx[3]))


HOLD = LowLevelAction()


@dataclass
class StepEvents:
    cannon_shots: list = field(default_factory=list)  # (shooter, target, hit)
    rocket_launches: list = field(default_factory=list)  # (shooter, target)
    rocket_hits: list = field(default_factory=list)  # (shooter, target)
    kills: list = field(default_factory=list)  # (victim, killer)
    friendly_fire_hits: list = field(default_factory=list)  # (shooter, victim)

    def extend(self, other):
        self.cannon_shots.extend(other.cannon_shots)
        self.rocket_launches.extend(other.rocket_launches)
        self.rocket_hits.extend(other.rocket_hits)
        self.kills.extend(other.kills)
        self.friendly_fire_hits.extend(other.friendly_fire_hits)
        return self

    def is_empty(self):
        return not (self.cannon_shots or self.rocket_launches or self.rocket_hits
                    or self.kills or self.friendly_fire_hits)

    def to_dict(self):
        return {
            "cannon_shots": [[s, t, bool(h)] for s, t, h in self.cannon_shots],
            "rocket_launches": [list(e) for e in self.rocket_launches],
            "rocket_hits": [list(e) for e in self.rocket_hits],
            "kills": [list(e) for e in self.kills],
            "friendly_fire_hits": [list(e) for e in self.friendly_fire_hits],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            cannon_shots=[(int(s), int(t), bool(h)) for s, t, h in d.get("cannon_shots", [])],
            rocket_launches=[tuple(e) for e in d.get("rocket_launches", [])],
            rocket_hits=[tuple(e) for e in d.get("rocket_hits", [])],
            kills=[tuple(e) for e in d.get("kills", [])],
            friendly_fire_hits=[tuple(e) for e in d.get("friendly_fire_hits", [])],
        )


@dataclass(frozen=True)
class ScenarioConfig:
    n_agents: int = 5
    n_opponents: int = 5
    composition: str = HOMOGENEOUS
    map_size: float = MAP_SIZE_KM
    max_ticks: int = MAX_TICKS
    dt: float = DT
    seed: int = 0

    def validate(self):
        if self.n_agents < 1 or self.n_opponents < 1:
            raise InvalidConfigError("each team needs at least one aircraft")
        if self.composition not in (HOMOGENEOUS, HETEROGENEOUS):
            raise InvalidConfigError(f"unknown composition {self.composition!r}")
        if self.map_size <= 2 * SPAWN_BAND_KM:
            raise InvalidConfigError("map too small for the spawn bands")
        if self.max_ticks < 1 or self.dt <= 0:
            raise InvalidConfigError("max_ticks and dt must be positive")
        return self

    def with_seed(self, seed):
        return replace(self, seed=int(seed))
