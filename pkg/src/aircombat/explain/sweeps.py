"""Global episode sweeps and local direct-probe sweeps over the commander."""

import math
import zlib
from dataclasses import dataclass

import numpy as np

from ..agents import CommanderTeam, ControllerBank, ModeTeam, commander_choice
from ..engine.observe import (
    COMMANDER_OWN_WIDTH, E_DIST, commander_obs_width, decode_entity, encode_entity, friendly_block,
    hostile_block,
)
from ..engine.options import MODES
from ..engine.types import AC1, HETEROGENEOUS, HOMOGENEOUS, MAX_TICKS, OPTION_TICKS, ScenarioConfig
from ..errors import ConsistencyError, InvalidConfigError, MissingArtifactError
from ..runner import run_episodes
from .records import GLOBAL_AXES, LOCAL_AXES, ActivationRecord

STRATEGIES = ("attack", "engage", "defend", "mixed")
BASE_TEAM = 5
FILLER_D_MIN = 0.5
FILLER_D_MAX = 30.0


def cell_seed(seed, coords):
    """Seed owned by one sweep cell, independent of scheduling."""
    key = zlib.crc32(repr(tuple(coords)).encode("utf-8"))
    return int(np.random.SeedSequence([int(seed), key]).generate_state(1)[0])


@dataclass(frozen=True)
class GlobalSweepSpec:
    strategies: tuple = STRATEGIES
    differences: tuple = tuple(range(-4, 6))
    sensing: tuple = (1, 2, 3, 4, 5)
    episodes_per_cell: int = 100
    composition: str = "homo"
    seed: int = 0
    max_ticks: int = MAX_TICKS

    def validate(self):
        if not self.strategies or not self.differences or not self.sensing:
            raise InvalidConfigError("sweep axes must be non-empty")
        if not set(self.strategies) <= set(STRATEGIES):
            raise InvalidConfigError(f"unknown opponent strategies {sorted(set(self.strategies) - set(STRATEGIES))}")
        if any(not -BASE_TEAM + 1 <= k for k in self.differences):
            raise InvalidConfigError("combat difference must leave at least one agent")
        if any(not 1 <= m <= 5 for m in self.sensing):
            raise InvalidConfigError("sensing capability outside 1..5")
        if self.episodes_per_cell < 1 or self.max_ticks < 1:
            raise InvalidConfigError("episodes_per_cell and max_ticks must be positive")
        if self.composition not in ("homo", "hetero"):
            raise InvalidConfigError("composition must be 'homo' or 'hetero'")
        return self

    @property
    def axes(self):
        return [(GLOBAL_AXES[0], list(self.strategies)), (GLOBAL_AXES[1], list(self.differences)),
                (GLOBAL_AXES[2], list(self.sensing))]

    def cells(self):
        return [(s, k, m) for s in self.strategies for k in self.differences for m in self.sensing]

    @property
    def window_cap(self):
        return math.ceil(self.max_ticks / OPTION_TICKS)

    def scenario(self, difference):
        return ScenarioConfig(n_agents=BASE_TEAM + difference, n_opponents=BASE_TEAM,
                              composition=HETEROGENEOUS if self.composition == "hetero" else HOMOGENEOUS,
                              max_ticks=self.max_ticks)


@dataclass(frozen=True)
class LocalSweepSpec:
    distances: tuple = (1, 3, 5, 7, 9, 11, 13, 15)
    ata_bins: tuple = (0, 30, 60, 90, 120, 150, 180)
    aa_bins: tuple = (0, 30, 60, 90, 120, 150, 180)
    m: int = 3
    samples_per_cell: int = 100
    seed: int = 0

    def validate(self):
        if self.m != 3:
            raise InvalidConfigError("local sweeps probe the m = 3 commander")
        for name, values in (("distances", self.distances), ("ata_bins", self.ata_bins), ("aa_bins", self.aa_bins)):
            if not values or list(values) != sorted(values):
                raise InvalidConfigError(f"{name} must be non-empty and ascending")
        if min(self.distances) <= 0 or max(self.distances) > FILLER_D_MAX:
            raise InvalidConfigError(f"distances must lie in (0, {FILLER_D_MAX}] km")
        if min(self.ata_bins + self.aa_bins) < 0 or max(self.ata_bins + self.aa_bins) > 180:
            raise InvalidConfigError("angle bins must lie in [0, 180]")
        if self.samples_per_cell < 1:
            raise InvalidConfigError("samples_per_cell must be positive")
        return self

    @property
    def axes(self):
        return [(LOCAL_AXES[0], list(self.distances)), (LOCAL_AXES[1], list(self.ata_bins)),
                (LOCAL_AXES[2], list(self.aa_bins))]

    def cells(self):
        return [(d, a, b) for d in self.distances for a in self.ata_bins for b in self.aa_bins]


def _select(cells, only):
    if only is None:
        return cells
    wanted = {tuple(c) for c in only}
    missing = wanted - set(cells)
    if missing:
        raise InvalidConfigError(f"cells not on the sweep axes: {sorted(missing, key=repr)}")
    return [c for c in cells if c in wanted]


def _map(fn, jobs, workers):
    if workers and workers > 1 and len(jobs) > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, jobs))
    return [fn(j) for j in jobs]


def _global_cell(job):
    spec, cell, commander, controllers = job
    strategy, difference, m = cell
    bank = ControllerBank(controllers, greedy=True)
    agents = CommanderTeam(commander, bank, m, greedy_commander=True)
    opponents = ModeTeam(bank, strategy)
    results = run_episodes(spec.scenario(difference), agents, opponents, spec.episodes_per_cell,
                           seed=cell_seed(spec.seed, cell))
    out = []
    for res in results:
        if res.ticks > spec.max_ticks:
            raise ConsistencyError(f"episode ran {res.ticks} ticks, cap is {spec.max_ticks}")
        for window, aid, type_index, mode in res.activations:
            if window >= spec.window_cap:
                raise ConsistencyError(f"window {window} beyond cap {spec.window_cap}")
            out.append(ActivationRecord(cell, res.episode, window, aid, type_index, mode))
    return out


def run_global_sweep(spec, commanders, controllers, cells=None, workers=1):
    """Play every cell's episodes and log each commander activation.

    ``commanders`` maps m to a commander (network or callable); ``cells``
    optionally restricts the run to a subset of coordinates.
    """
    spec = spec.validate()
    chosen = _select(spec.cells(), cells)
    missing = sorted({c[2] for c in chosen} - set(commanders))
    if missing:
        raise MissingArtifactError(f"no commander for sensing capability m in {missing}")
    if isinstance(controllers, dict):
        controllers = [controllers[m] for m in MODES]
    jobs = [(spec, c, commanders[c[2]], list(controllers)) for c in chosen]
    return [r for part in _map(_global_cell, jobs, workers) for r in part]


def synthetic_observation(rng, d_km, ata_deg, aa_deg, m=3):
    """A valid commander observation whose nearest hostile sits at (d, ATA, AA).

    Own state and the other blocks are drawn from their valid ranges; the
    remaining hostiles are at least as far as the probed one.
    """
    obs = np.zeros(commander_obs_width(m))
    own_type = int(rng.integers(0, 2))
    heading = math.radians(rng.uniform(0.0, 360.0))
    rockets = rng.integers(0, AC1.rocket_count + 1) / AC1.rocket_count if own_type == AC1.type_index else 0.0
    obs[:COMMANDER_OWN_WIDTH] = [own_type, rng.uniform(), rng.uniform(), math.sin(heading), math.cos(heading),
                                 rng.uniform(), rng.uniform(), rockets]
    obs[hostile_block(m, 0)] = encode_entity(d_km, ata_deg, aa_deg, rng.integers(0, 2))
    lo = max(d_km, FILLER_D_MIN)
    far = np.sort(rng.uniform(lo, FILLER_D_MAX, size=m - 1))
    for k, d in enumerate(far, start=1):
        obs[hostile_block(m, k)] = encode_entity(d, rng.uniform(0, 180), rng.uniform(0, 180), rng.integers(0, 2))
    friends = np.sort(rng.uniform(FILLER_D_MIN, FILLER_D_MAX, size=m))
    for k, d in enumerate(friends):
        obs[friendly_block(m, k)] = encode_entity(d, rng.uniform(0, 180), rng.uniform(0, 180), rng.integers(0, 2))
    check_ordering(obs, m)
    return obs


def check_ordering(obs, m):
    hostile = [obs[hostile_block(m, k)][E_DIST] for k in range(m)]
    friendly = [obs[friendly_block(m, k)][E_DIST] for k in range(m)]
    for name, ds in (("hostile", hostile), ("friendly", friendly)):
        if any(b < a for a, b in zip(ds, ds[1:])):
            raise ConsistencyError(f"synthetic {name} blocks are not ordered nearest first: {ds}")


def run_local_sweep(spec, commander, cells=None):
    """Probe the commander with synthetic observations in every (d, ATA, AA) cell.

    Each query records the commander's most probable mode.
    """
    spec = spec.validate()
    tags = getattr(commander, "tags", None) or {}
    if "m" in tags and tags["m"] != spec.m:
        raise InvalidConfigError(f"local sweeps need an m = {spec.m} commander, got m = {tags['m']}")
    out = []
    for cell in _select(spec.cells(), cells):
        rng = np.random.default_rng(cell_seed(spec.seed, cell))
        obs = np.stack([synthetic_observation(rng, *cell, m=spec.m) for _ in range(spec.samples_per_cell)])
        modes = commander_choice(commander, obs, greedy_choice=True)
        for j, (o, mode) in enumerate(zip(obs, modes)):
            out.append(ActivationRecord(cell, j, 0, 0, int(round(o[0])), int(mode)))
    return out


def rule_commander(obs, m=3):
    """Scripted commander over the nearest hostile: attack if AA < 60 and ATA < 60,
    defend if AA > 120, engage otherwise."""
    obs = np.atleast_2d(obs)
    out = np.empty(len(obs), dtype=np.int64)
    for i, o in enumerate(obs):
        _, ata_deg, aa_deg, _, _ = decode_entity(o[hostile_block(m, 0)])
        ata_deg, aa_deg = round(ata_deg, 9), round(aa_deg, 9)
        if aa_deg < 60 and ata_deg < 60:
            out[i] = 0
        elif aa_deg > 120:
            out[i] = 2
        else:
            out[i] = 1
    return out


def rule_mode(ata_deg, aa_deg):
    """The scripted rule evaluated directly on cell coordinates."""
    if aa_deg < 60 and ata_deg < 60:
        return 0
    return 2 if aa_deg > 120 else 1

