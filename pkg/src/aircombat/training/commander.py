"""Commander training over frozen low-level controllers."""

import os
from collections import defaultdict

import numpy as np

from ..agents import ControllerBank, ModeTeam
from ..engine.observe import commander_obs_width, commander_observation
from ..engine.rewards import reward_commander
from ..engine.types import AGENT, HETEROGENEOUS, HOMOGENEOUS, OPPONENT, OPTION_TICKS, ScenarioConfig
from ..engine.world import Outcome, spawn_scenario
from ..errors import InvalidConfigError, InvalidSetupError
from ..policy import build_commander, sample, save_checkpoint
from .league import TrainResult, write_metrics
from .ppo import Adam, batch_from_buffer, ppo_update
from .rollout import _empty_columns, _finish


class CommanderCollector:
    """Lockstep worlds where each agent's commander picks a mode every window.

    One transition per living agent per window; the window reward is
    :func:`reward_commander` over the window's events.
    """

    def __init__(self, scenario, commander, bank, m, opponent_team, n_envs, seed,
                 option_ticks=OPTION_TICKS):
        self.scenario = scenario
        self.commander = commander
        self.bank = bank
        self.m = m
        self.opponent_team = opponent_team
        self.n_envs = n_envs
        self.option_ticks = option_ticks
        self.seed = int(seed)
        self.rng = np.random.default_rng(np.random.SeedSequence([self.seed, 21]))
        self.episodes_started = 0
        self.next_stream = 0
        self.worlds = [None] * n_envs
        self.stream_of = [None] * n_envs
        self.running = [None] * n_envs
        for i in range(n_envs):
            self._reset(i)

    def _reset(self, i):
        seed = int(np.random.SeedSequence([self.seed, 22, self.episodes_started]).generate_state(1)[0])
        self.episodes_started += 1
        self.worlds[i] = spawn_scenario(self.scenario.with_seed(seed))
        self.stream_of[i] = {}
        for aid in self.worlds[i].team_ids(AGENT):
            self.stream_of[i][aid] = self.next_stream
            self.next_stream += 1
        self.running[i] = defaultdict(float)

    def collect(self, n_windows):
        cols = _empty_columns()
        episode_returns = []
        outcomes = []
        ticks = 0
        for _ in range(n_windows):
            pairs = [(i, aid) for i, w in enumerate(self.worlds) for aid in w.living_ids(AGENT)]
            obs = np.stack([commander_observation(self.worlds[i], aid, self.m) for i, aid in pairs])
            logits, values = self.commander.forward(obs)
            idx, logp = sample(logits, None, self.rng, self.commander.head_spec)
            modes = [{} for _ in self.worlds]
            for (i, aid), a in zip(pairs, idx[:, 0]):
                modes[i][aid] = int(a)
            events = [[] for _ in self.worlds]
            active = list(range(self.n_envs))
            for _t in range(self.option_ticks):
                if not active:
                    break
                ws = [self.worlds[i] for i in active]
                requests = [(self.worlds[i], aid, modes[i][aid]) for i in active
                            for aid in self.worlds[i].living_ids(AGENT)]
                acts = self.bank.act(requests, self.rng)
                opp = self.opponent_team.act(ws, OPPONENT, self.rng)
                joint = {i: dict(o) for i, o in zip(active, opp)}
                where = {id(self.worlds[i]): i for i in active}
                for (w, aid, _), a in zip(requests, acts):
                    joint[where[id(w)]][aid] = a
                still = []
                for i in active:
                    events[i].append(self.worlds[i].step(joint[i]))
                    ticks += 1
                    if self.worlds[i].outcome() is Outcome.ONGOING:
                        still.append(i)
                active = still
            rewards = np.zeros(len(pairs))
            dones = np.zeros(len(pairs))
            for k, (i, aid) in enumerate(pairs):
                w = self.worlds[i]
                team_of = {a.id: a.team for a in w.aircraft}
                rewards[k] = reward_commander(events[i], aid, team_of)
                if not w.get(aid).alive or w.outcome() is not Outcome.ONGOING:
                    dones[k] = 1.0
                self.running[i][aid] += rewards[k]
                if dones[k]:
                    episode_returns.append(self.running[i].pop(aid))
            cols["obs"].extend(obs)
            cols["actions"].extend(idx)
            cols["log_probs"].extend(logp)
            cols["rewards"].extend(rewards)
            cols["values"].extend(values)
            cols["dones"].extend(dones)
            cols["agent_ids"].extend(aid for _, aid in pairs)
            cols["streams"].extend(self.stream_of[i][aid] for i, aid in pairs)
            cols["masks"].extend(np.ones((len(pairs), 3), dtype=bool))
            for i, w in enumerate(self.worlds):
                if w.outcome() is not Outcome.ONGOING:
                    outcomes.append(w.outcome())
                    self._reset(i)
        bootstrap = {}
        pairs = [(i, aid) for i, w in enumerate(self.worlds) for aid in w.living_ids(AGENT)]
        if pairs:
            obs = np.stack([commander_observation(self.worlds[i], aid, self.m) for i, aid in pairs])
            _, values = self.commander.forward(obs)
            for (i, aid), v in zip(pairs, values):
                bootstrap[self.stream_of[i][aid]] = float(v)
        buf = _finish(cols, bootstrap, episode_returns, self.commander.obs_width, 1, 3)
        buf.outcomes = outcomes
        buf.ticks = ticks
        return buf


def check_frozen(controllers):
    nets = list(controllers.values()) if isinstance(controllers, dict) else list(controllers)
    for net in nets:
        if not getattr(net, "frozen", False):
            raise InvalidSetupError(f"controller {net.role!r} must be frozen before commander training")
    return nets


def train_commander(m, composition, controllers, scenario=None, ppo=None, seed=None,
                    opponent_modes=("attack", "engage"), out_dir=None, on_update=None):
    """Train a commander with sensing capability ``m`` over frozen controllers.

    ``composition`` is ``"homo"`` or ``"hetero"``. Opponents run the given
    low-level modes, one drawn per aircraft at spawn, with no commander.
    """
    from .config import PpoConfig

    if not isinstance(m, (int, np.integer)) or not 1 <= m <= 5:
        raise InvalidConfigError(f"sensing capability m={m!r} outside 1..5")
    if composition not in ("homo", "hetero"):
        raise InvalidConfigError("composition must be 'homo' or 'hetero'")
    nets = check_frozen(controllers)
    digests = [n.digest() for n in nets]
    ppo = (ppo or PpoConfig(rollout_ticks=200, n_envs=8, minibatch_size=64)).validate()
    seed = ppo.seed if seed is None else seed
    scenario = scenario or ScenarioConfig(n_agents=3, n_opponents=3)
    scenario = ScenarioConfig(scenario.n_agents, scenario.n_opponents,
                              HETEROGENEOUS if composition == "hetero" else HOMOGENEOUS,
                              scenario.map_size, scenario.max_ticks, scenario.dt, scenario.seed)
    bank = ControllerBank(nets)
    commander = build_commander(commander_obs_width(m), np.random.default_rng(np.random.SeedSequence([seed, 20])),
                                tags={"m": int(m), "composition": composition})
    collector = CommanderCollector(scenario, commander, bank, m, ModeTeam(bank, opponent_modes),
                                   ppo.n_envs, seed)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 23]))
    opt = Adam(commander.parameters(), lr=ppo.learning_rate)
    windows_per_update = max(1, ppo.rollout_ticks // OPTION_TICKS)
    steps = 0
    metrics = []
    while steps < ppo.total_env_steps:
        buf = collector.collect(windows_per_update)
        steps += buf.ticks
        buf.compute_advantages(ppo.gamma, ppo.gae_lambda)
        _, stats = ppo_update(commander, batch_from_buffer(buf), ppo, opt, rng)
        n_out = len(buf.outcomes)
        row = {"update": len(metrics), "stage": 0, "env_steps": steps,
               "return_mean": float(np.mean(buf.episode_returns)) if buf.episode_returns else 0.0,
               "episodes": n_out, **stats}
        row["win_rate"] = (sum(o is Outcome.WIN for o in buf.outcomes) / n_out) if n_out else float("nan")
        metrics.append(row)
        if on_update is not None:
            on_update(row)
    if [n.digest() for n in nets] != digests:
        raise InvalidSetupError("low-level parameters changed during commander training")
    checkpoints = []
    if out_dir is not None:
        tag = f"commander_m{m}_{composition}"
        checkpoints.append(save_checkpoint(commander, os.path.join(out_dir, tag + ".ckpt")))
        write_metrics(metrics, os.path.join(out_dir, tag + "_metrics.csv"))
    return TrainResult(commander, checkpoints, metrics)

