"""PPO training: rollouts, updates, league self-play, commander training, evaluation."""

from .commander import CommanderCollector, train_commander
from .config import (
    CommanderConfig, LeagueConfig, PpoConfig, RewardConfig, RunConfig, SweepConfig,
    load_run_config, run_config_from_dict, to_dict,
)
from .evaluate import evaluate, kill_rate
from .league import ConvergenceTracker, LeagueState, TrainResult, train_low_level
from .ppo import Adam, PpoBatch, ppo_loss, ppo_update
from .rollout import LowLevelCollector, RolloutBuffer, collect_rollouts, compute_gae

__all__ = [
    "Adam", "CommanderCollector", "CommanderConfig", "ConvergenceTracker", "LeagueConfig",
    "LeagueState", "LowLevelCollector", "PpoBatch", "PpoConfig", "RewardConfig",
    "RolloutBuffer", "RunConfig", "SweepConfig", "TrainResult", "collect_rollouts",
    "compute_gae", "evaluate", "kill_rate", "load_run_config", "ppo_loss", "ppo_update",
    "run_config_from_dict", "to_dict", "train_commander", "train_low_level",
]
