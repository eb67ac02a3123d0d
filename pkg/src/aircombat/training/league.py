"""League self-play for the low-level controllers."""

import copy
import csv
import os
from dataclasses import dataclass, field

import numpy as np

from ..agents import ControllerBank, ModeTeam, RandomTeam
from ..engine.observe import LOW_LEVEL_OBS_WIDTH
from ..engine.options import MODES
from ..errors import ConsistencyError
from ..policy import build_controllers, save_checkpoint
from .ppo import Adam, batch_from_buffer, ppo_update
from .rollout import LowLevelCollector

METRIC_FIELDS = ("update", "stage", "env_steps", "return_mean", "episodes", "loss", "policy_loss",
                 "value_loss", "entropy", "approx_kl", "clip_fraction", "grad_norm")


class ConvergenceTracker:
    """Plateau test on a moving average of per-update mean returns.

    With ``window`` w, the stage has converged once 2w values are recorded
    and the latest w-average improves on the w-average before it by less than
    ``threshold`` (relative).
    """

    def __init__(self, window=50, threshold=0.01):
        self.window = window
        self.threshold = threshold
        self.values = []

    def push(self, value):
        self.values.append(float(value))
        return self.converged()

    def converged(self):
        w = self.window
        if len(self.values) < 2 * w:
            return False
        recent = np.mean(self.values[-w:])
        before = np.mean(self.values[-2 * w:-w])
        return (recent - before) < self.threshold * max(abs(before), 1e-8)


@dataclass
class LeagueState:
    """Curriculum position: stage 0 plays random opponents, stage k the stage k-1 snapshot."""

    mode: str
    stage: int = 0
    snapshot: object = None
    tracker: ConvergenceTracker = field(default_factory=ConvergenceTracker)

    def opponent_team(self):
        if self.stage == 0 or self.snapshot is None:
            return RandomTeam()
        return ModeTeam(ControllerBank([self.snapshot] * len(MODES)), self.mode,
                        name=f"{self.mode}-stage{self.stage - 1}")

    def advance(self, net):
        snap = copy.deepcopy(net)
        snap.frozen = True
        self.snapshot = snap
        self.stage += 1
        self.tracker = ConvergenceTracker(self.tracker.window, self.tracker.threshold)
        return self


@dataclass
class TrainResult:
    net: object
    checkpoints: list
    metrics: list


def write_metrics(rows, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=METRIC_FIELDS, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: (f"{row[k]:.10g}" if isinstance(row[k], float) else row[k]) for k in METRIC_FIELDS})


def train_stage(net, league, scenario, ppo, seed, stage_steps=None, on_update=None, update_offset=0,
                reward_timing="terminal", shaping=0.0):
    """Train ``net`` against the league's current opponents until plateau or budget."""
    budget = ppo.total_env_steps if stage_steps is None else stage_steps
    collector = LowLevelCollector(scenario, league.mode, net, league.opponent_team(), ppo.n_envs,
                                  np.random.SeedSequence([seed, 10, league.stage]).generate_state(1)[0],
                                  reward_timing=reward_timing, shaping=shaping, gamma=ppo.gamma)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 11, league.stage]))
    opt = Adam(net.parameters(), lr=ppo.learning_rate)
    steps = 0
    rows = []
    last_return = 0.0
    while steps < budget:
        buf = collector.collect(ppo.rollout_ticks)
        steps += ppo.rollout_ticks * ppo.n_envs
        buf.compute_advantages(ppo.gamma, ppo.gae_lambda)
        _, stats = ppo_update(net, batch_from_buffer(buf), ppo, opt, rng)
        if buf.episode_returns:
            last_return = float(np.mean(buf.episode_returns))
        row = {"update": update_offset + len(rows), "stage": league.stage, "env_steps": steps,
               "return_mean": last_return, "episodes": len(buf.episode_returns or []), **stats}
        rows.append(row)
        if on_update is not None:
            on_update(row)
        if buf.episode_returns and league.tracker.push(last_return):
            break
    return rows


def train_low_level(mode, league=None, scenario=None, ppo=None, stages=1, controllers=None,
                    out_dir=None, seed=None, on_update=None, league_config=None,
                    reward_timing="terminal", shaping=0.0, freeze_trunk=False):
    """Train the shared ``mode`` controller through ``stages`` league stages.

    Each stage plays until the return plateau or ``ppo.total_env_steps``
    environment ticks. With ``out_dir`` a stage-tagged checkpoint is written
    after every stage, plus ``<mode>.ckpt`` and ``<mode>_metrics.csv``.

    ``freeze_trunk`` keeps the shared trunk fixed (it was trained with an
    earlier mode), so only this mode's own layers learn.
    """
    from .config import LeagueConfig, PpoConfig
    from ..engine.types import ScenarioConfig

    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    ppo = (ppo or PpoConfig()).validate()
    scenario = scenario or ScenarioConfig(n_agents=1, n_opponents=1)
    seed = ppo.seed if seed is None else seed
    lc = league_config or LeagueConfig()
    if league is None:
        league = LeagueState(mode, tracker=ConvergenceTracker(lc.convergence_window, lc.convergence_threshold))
    if controllers is None:
        controllers = build_controllers(LOW_LEVEL_OBS_WIDTH, np.random.default_rng(np.random.SeedSequence([seed, 3])))
    net = controllers[mode]
    net.trunk_frozen = bool(freeze_trunk)
    trunk_before = [p.copy() for p in net.trunk.parameters()] if freeze_trunk else None
    metrics = []
    checkpoints = []
    for _ in range(stages):
        metrics.extend(train_stage(net, league, scenario, ppo, seed, on_update=on_update,
                                   update_offset=len(metrics), reward_timing=reward_timing,
                                   shaping=shaping))
        net.tags = {"mode": mode, "stage": league.stage, "trunk": "frozen" if freeze_trunk else "trained"}
        if out_dir is not None:
            checkpoints.append(save_checkpoint(net, os.path.join(out_dir, f"{mode}_stage{league.stage}.ckpt")))
        league.advance(net)
    if freeze_trunk and not all(np.array_equal(a, b) for a, b in zip(trunk_before, net.trunk.parameters())):
        raise ConsistencyError("frozen trunk changed during training")
    net.trunk_frozen = False
    if out_dir is not None:
        checkpoints.append(save_checkpoint(net, os.path.join(out_dir, f"{mode}.ckpt")))
        write_metrics(metrics, os.path.join(out_dir, f"{mode}_metrics.csv"))
    return TrainResult(net, checkpoints, metrics)


def controllers_on_trunk(existing, seed=0, head_sizes=(64,)):
    """Fresh controllers built on the trunk of already trained ``existing`` nets.

    ``existing`` maps modes to loaded nets; their trunks must be
    bit-identical, and trained modes keep their own heads.
    """
    from ..policy import share_trunks

    nets = share_trunks(list(existing.values()))
    trunks = {id(n.trunk) for n in nets}
    if len(trunks) != 1:
        raise ConsistencyError("existing controllers do not share one trunk")
    trunk = nets[0].trunk
    fresh = build_controllers(LOW_LEVEL_OBS_WIDTH, np.random.default_rng(np.random.SeedSequence([seed, 3])),
                              head_sizes=head_sizes, trunk=trunk)
    fresh.update(existing)
    return fresh
