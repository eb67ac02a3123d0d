"""Simulation engine: world state, kinematics, weapons, observations, rewards, options."""

from .episode_log import EpisodeLogger, read_log, replay_lines
from .observe import (
    LOW_LEVEL_OBS_WIDTH, commander_obs_width, commander_observation, low_level_observation,
)
from .options import ATTACK, DEFEND, ENGAGE, MODES, OptionCommand, run_option
from .rewards import reward_attack, reward_commander, reward_defend, reward_engage
from .types import (
    AC1, AC2, AGENT, HETEROGENEOUS, HOLD, HOMOGENEOUS, LOW_LEVEL_HEADS, OPPONENT,
    AircraftSpec, AircraftState, LowLevelAction, RocketState, ScenarioConfig, StepEvents,
)
from .world import (
    Outcome, World, apply_heading_command, fire_rocket, map_velocity, outcome,
    resolve_cannon, spawn_scenario, step, update_rockets,
)

__all__ = [
    "AC1", "AC2", "AGENT", "ATTACK", "DEFEND", "ENGAGE", "HETEROGENEOUS", "HOLD",
    "HOMOGENEOUS", "LOW_LEVEL_HEADS", "LOW_LEVEL_OBS_WIDTH", "MODES", "OPPONENT",
    "AircraftSpec", "AircraftState", "EpisodeLogger", "LowLevelAction", "OptionCommand",
    "Outcome", "RocketState", "ScenarioConfig", "StepEvents", "World",
    "apply_heading_command", "commander_obs_width", "commander_observation",
    "fire_rocket", "low_level_observation", "map_velocity", "outcome", "read_log",
    "replay_lines", "resolve_cannon", "reward_attack", "reward_commander",
    "reward_defend", "reward_engage", "run_option", "spawn_scenario", "step",
    "update_rockets",
]
