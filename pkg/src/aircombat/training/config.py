"""Training configuration and strict JSON loading."""

import dataclasses
import json
from dataclasses import dataclass, field

from ..engine.types import HETEROGENEOUS, HOMOGENEOUS, ScenarioConfig
from ..errors import InvalidConfigError


@dataclass(frozen=True)
class PpoConfig:
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip: float = 0.2
    learning_rate: float = 3e-4
    epochs_per_update: int = 4
    minibatch_size: int = 256
    entropy_coef: float = 0.01
    value_coef: float = 0.5
    max_grad_norm: float = 0.5
    rollout_ticks: int = 256
    n_envs: int = 8
    total_env_steps: int = 100_000
    seed: int = 0

    def validate(self):
        if not 0.0 <= self.gamma < 1.0:
            raise InvalidConfigError("gamma must lie in [0, 1)")
        if not 0.0 <= self.gae_lambda <= 1.0:
            raise InvalidConfigError("gae_lambda must lie in [0, 1]")
        if self.clip <= 0:
            raise InvalidConfigError("clip must be positive")
        if self.learning_rate <= 0 or self.epochs_per_update < 1 or self.minibatch_size < 1:
            raise InvalidConfigError("learning_rate, epochs_per_update and minibatch_size must be positive")
        if self.rollout_ticks < 1 or self.n_envs < 1 or self.total_env_steps < 1:
            raise InvalidConfigError("rollout_ticks, n_envs and total_env_steps must be positive")
        return self


@dataclass(frozen=True)
class LeagueConfig:
    stages: int = 2
    convergence_window: int = 50
    convergence_threshold: float = 0.01

    def validate(self):
        if self.stages < 1 or self.convergence_window < 1 or self.convergence_threshold < 0:
            raise InvalidConfigError("invalid league settings")
        return self


@dataclass(frozen=True)
class RewardConfig:
    """Training-side reward delivery for the low-level controllers.

    ``attack_timing="incremental"`` pays the attack reward as it accrues (ammo
    fraction per tick, -1 on death); the episode sum equals the terminal form.
    ``shaping`` scales a potential-based pursuit term applied to the modes in
    ``shaping_modes``; it telescopes and vanishes on terminal transitions.
    """

    attack_timing: str = "incremental"
    shaping: float = 1.0
    shaping_modes: tuple = ("attack",)

    def validate(self):
        if self.attack_timing not in ("terminal", "incremental"):
            raise InvalidConfigError("attack_timing must be 'terminal' or 'incremental'")
        if self.shaping < 0:
            raise InvalidConfigError("shaping must be non-negative")
        if not set(self.shaping_modes) <= {"attack", "engage", "defend"}:
            raise InvalidConfigError(f"unknown shaping modes {list(self.shaping_modes)}")
        return self

    def for_mode(self, mode):
        """Keyword arguments for the collector when training ``mode``."""
        return {"reward_timing": self.attack_timing,
                "shaping": self.shaping if mode in self.shaping_modes else 0.0}


@dataclass(frozen=True)
class CommanderConfig:
    m: int = 3
    composition: str = "homo"
    opponent_modes: tuple = ("attack", "engage")
    n_agents: int = 3
    n_opponents: int = 3

    def validate(self):
        if self.n_agents < 1 or self.n_opponents < 1:
            raise InvalidConfigError("commander training needs at least one aircraft per team")
        if not set(self.opponent_modes) or not set(self.opponent_modes) <= {"attack", "engage", "defend"}:
            raise InvalidConfigError(f"invalid opponent modes {list(self.opponent_modes)}")
        if not 1 <= self.m <= 5:
            raise InvalidConfigError(f"sensing capability m={self.m} outside 1..5")
        if self.composition not in ("homo", "hetero"):
            raise InvalidConfigError("composition must be 'homo' or 'hetero'")
        return self


@dataclass(frozen=True)
class SweepConfig:
    episodes_per_cell: int = 100
    samples_per_cell: int = 100
    composition: str = "homo"
    strategies: tuple = ("attack", "engage", "defend", "mixed")
    differences: tuple = tuple(range(-4, 6))
    sensing: tuple = (1, 2, 3, 4, 5)
    distances: tuple = (1, 3, 5, 7, 9, 11, 13, 15)
    ata_bins: tuple = (0, 30, 60, 90, 120, 150, 180)
    aa_bins: tuple = (0, 30, 60, 90, 120, 150, 180)


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    output_dir: str = "runs"
    scenario: ScenarioConfig = field(default_factory=lambda: ScenarioConfig(n_agents=1, n_opponents=1))
    ppo: PpoConfig = field(default_factory=PpoConfig)
    league: LeagueConfig = field(default_factory=LeagueConfig)
    rewards: RewardConfig = field(default_factory=RewardConfig)
    commander: CommanderConfig = field(default_factory=CommanderConfig)
    commander_ppo: PpoConfig = field(default_factory=lambda: PpoConfig(
        rollout_ticks=200, n_envs=8, minibatch_size=64, total_env_steps=200_000))
    sweep: SweepConfig = field(default_factory=SweepConfig)

    def validate(self):
        self.scenario.validate()
        self.ppo.validate()
        self.league.validate()
        self.rewards.validate()
        self.commander.validate()
        self.commander_ppo.validate()
        return self


COMPOSITIONS = {"homo": HOMOGENEOUS, "hetero": HETEROGENEOUS,
                HOMOGENEOUS: HOMOGENEOUS, HETEROGENEOUS: HETEROGENEOUS}


def _build(cls, data, where):
    if not isinstance(data, dict):
        raise InvalidConfigError(f"{where}: expected an object")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(fields))
    if unknown:
        raise InvalidConfigError(f"{where}: unknown keys {unknown}")
    kwargs = {}
    defaults = cls()
    for name, value in data.items():
        current = getattr(defaults, name)
        if dataclasses.is_dataclass(current):
            kwargs[name] = _build(type(current), value, f"{where}.{name}")
        elif isinstance(current, tuple):
            if not isinstance(value, list):
                raise InvalidConfigError(f"{where}.{name}: expected a list")
            kwargs[name] = tuple(value)
        elif isinstance(current, bool) or value is None:
            kwargs[name] = value
        elif isinstance(current, int) and not isinstance(current, bool):
            if not isinstance(value, int) or isinstance(value, bool):
                raise InvalidConfigError(f"{where}.{name}: expected an integer")
            kwargs[name] = value
        elif isinstance(current, float):
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise InvalidConfigError(f"{where}.{name}: expected a number")
            kwargs[name] = float(value)
        elif isinstance(current, str):
            if not isinstance(value, str):
                raise InvalidConfigError(f"{where}.{name}: expected a string")
            kwargs[name] = value
        else:
            kwargs[name] = value
    if cls is ScenarioConfig and "composition" in kwargs:
        if kwargs["composition"] not in COMPOSITIONS:
            raise InvalidConfigError(f"{where}.composition: unknown value {kwargs['composition']!r}")
        kwargs["composition"] = COMPOSITIONS[kwargs["composition"]]
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise InvalidConfigError(f"{where}: {exc}") from None


def run_config_from_dict(data):
    return _build(RunConfig, data, "config").validate()


def load_run_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise InvalidConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise InvalidConfigError(f"{path}: invalid JSON ({exc})") from None
    return run_config_from_dict(data)


def to_dict(cfg):
    def conv(v):
        if dataclasses.is_dataclass(v):
            return {f.name: conv(getattr(v, f.name)) for f in dataclasses.fields(v)}
        if isinstance(v, tuple):
            return [conv(x) for x in v]
        return v
    return conv(cfg)
