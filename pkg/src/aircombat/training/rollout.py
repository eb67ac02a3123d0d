"""Experience collection and generalized advantage estimation."""

from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .. import geometry as geo
from ..agents import low_level_batch
from ..engine.observe import LOW_LEVEL_OBS_WIDTH, ranked_others
from ..engine.options import MODES
from ..engine.rewards import reward_attack, reward_defend, reward_engage
from ..engine.types import AGENT, OPPONENT, LowLevelAction
from ..engine.world import Outcome, spawn_scenario
from ..errors import ShapeError
from ..policy import sample


def compute_gae(rewards, values, dones, gamma, lam, last_value=0.0):
    """Advantages and returns of one transition stream.

    ``dones[t]`` marks that the episode ended after step ``t``; the recursion
    restarts there. ``last_value`` bootstraps a stream cut off mid-episode.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    dones = np.asarray(dones, dtype=np.float64)
    n = len(rewards)
    adv = np.zeros(n)
    gae = 0.0
    for t in range(n - 1, -1, -1):
        next_value = last_value if t == n - 1 else values[t + 1]
        live = 1.0 - dones[t]
        delta = rewards[t] + gamma * next_value * live - values[t]
        gae = delta + gamma * lam * live * gae
        adv[t] = gae
    return adv, adv + values


@dataclass
class RolloutBuffer:
    obs: np.ndarray
    actions: np.ndarray
    log_probs: np.ndarray
    rewards: np.ndarray
    values: np.ndarray
    dones: np.ndarray
    agent_ids: np.ndarray
    streams: np.ndarray
    masks: np.ndarray
    bootstrap: dict
    advantages: np.ndarray = None
    returns: np.ndarray = None
    episode_returns: list = None

    def __len__(self):
        return len(self.rewards)

    def compute_advantages(self, gamma, lam):
        adv = np.zeros(len(self))
        ret = np.zeros(len(self))
        groups = defaultdict(list)
        for i, s in enumerate(self.streams):
            groups[int(s)].append(i)
        for s, idx in groups.items():
            idx = np.asarray(idx)
            a, r = compute_gae(self.rewards[idx], self.values[idx], self.dones[idx], gamma, lam,
                               self.bootstrap.get(s, 0.0))
            adv[idx] = a
            ret[idx] = r
        self.advantages = adv
        self.returns = ret
        return self


def _empty_columns():
    return {k: [] for k in ("obs", "actions", "log_probs", "rewards", "values", "dones",
                            "agent_ids", "streams", "masks")}


def _finish(cols, bootstrap, episode_returns, obs_width, n_heads, mask_width):
    def arr(name, shape_tail=(), dtype=np.float64):
        if cols[name]:
            return np.asarray(cols[name], dtype=dtype)
        return np.zeros((0,) + shape_tail, dtype=dtype)
    return RolloutBuffer(
        obs=arr("obs", (obs_width,)), actions=arr("actions", (n_heads,), np.int64),
        log_probs=arr("log_probs"), rewards=arr("rewards"), values=arr("values"),
        dones=arr("dones"), agent_ids=arr("agent_ids", (), np.int64),
        streams=arr("streams", (), np.int64), masks=arr("masks", (mask_width,), bool),
        bootstrap=bootstrap, episode_returns=episode_returns,
    )


class LowLevelCollector:
    """Persistent lockstep environments for training one low-level mode.

    Every agent-team aircraft acts with the shared mode network (CTDE: one
    parameter set, experience pooled from all agents); opponents act through
    ``opponent_team``. Episodes continue across :meth:`collect` calls.
    """

    def __init__(self, scenario, mode, net, opponent_team, n_envs, seed, reward_timing="terminal",
                 shaping=0.0, gamma=0.99):
        if net.obs_width != LOW_LEVEL_OBS_WIDTH:
            raise ShapeError("policy input width does not match the low-level observation")
        self.scenario = scenario
        self.mode = MODES.index(mode) if isinstance(mode, str) else int(mode)
        self.net = net
        self.opponent_team = opponent_team
        self.n_envs = n_envs
        self.reward_timing = reward_timing
        self.shaping = shaping
        self.gamma = gamma
        self.seed = int(seed)
        self.rng = np.random.default_rng(np.random.SeedSequence([self.seed, 1]))
        self.episodes_started = 0
        self.worlds = [self._new_world() for _ in range(n_envs)]
        self.stream_of = [{} for _ in range(n_envs)]
        self.next_stream = 0
        self.running = [defaultdict(float) for _ in range(n_envs)]
        self.friendly_kill = [set() for _ in range(n_envs)]
        for i in range(n_envs):
            self._open_streams(i)

    def _new_world(self):
        seed = int(np.random.SeedSequence([self.seed, 2, self.episodes_started]).generate_state(1)[0])
        self.episodes_started += 1
        return spawn_scenario(self.scenario.with_seed(seed))

    def _open_streams(self, i):
        self.stream_of[i] = {}
        for aid in self.worlds[i].team_ids(AGENT):
            self.stream_of[i][aid] = self.next_stream
            self.next_stream += 1

    def _terminal_reward(self, world, aid, destroyed, i):
        a = world.get(aid)
        if self.mode == 0:
            if self.reward_timing == "incremental":
                return 0.0
            return reward_attack(a.spec.cannon_capacity, a.cannon_remaining, destroyed)
        if self.mode == 2:
            return reward_defend(destroyed, aid in self.friendly_kill[i])
        return 0.0

    def _potential(self, world, aid):
        """Pursuit potential in [-2, 0]: 0 when on top of and pointed at the nearest opponent."""
        me = world.get(aid)
        ranked = ranked_others(world, me, OPPONENT if me.team == AGENT else AGENT)
        if not ranked or ranked[0][0] <= geo.COINCIDENT_KM:
            return 0.0
        d, opp = ranked[0]
        return -(min(d / world.config.map_size, 1.0) + geo.ata(me.pos, me.heading, opp.pos) / 180.0)

    def _potentials(self, pairs):
        return [self._potential(self.worlds[i], aid) for i, aid in pairs]

    def collect(self, rollout_ticks):
        cols = _empty_columns()
        episode_returns = []
        for _ in range(rollout_ticks):
            pairs = [(i, aid) for i, w in enumerate(self.worlds) for aid in w.living_ids(AGENT)]
            obs, mask = low_level_batch([(self.worlds[i], aid) for i, aid in pairs])
            logits, values = self.net.forward(obs)
            idx, logp = sample(logits, mask, self.rng, self.net.head_spec)
            opp = self.opponent_team.act(self.worlds, OPPONENT, self.rng)
            joint = [dict(o) for o in opp]
            for (i, aid), row in zip(pairs, idx):
                joint[i][aid] = LowLevelAction.from_indices(row)
            rewards = np.zeros(len(pairs))
            dones = np.zeros(len(pairs))
            ended = []
            phi_before = self._potentials(pairs) if self.shaping else None
            ammo_before = [self.worlds[i].get(aid).cannon_remaining for i, aid in pairs]
            for i, w in enumerate(self.worlds):
                ev = w.step(joint[i])
                for shooter, _victim in ev.friendly_fire_hits:
                    if w.get(shooter).team == AGENT:
                        self.friendly_kill[i].add(shooter)
                if w.outcome() is not Outcome.ONGOING:
                    ended.append(i)
            ended_set = set(ended)
            for k, (i, aid) in enumerate(pairs):
                w = self.worlds[i]
                destroyed = not w.get(aid).alive
                over = i in ended_set
                r = 0.0
                if self.mode == 1:
                    r = reward_engage(w, aid)
                elif self.mode == 0 and self.reward_timing == "incremental":
                    a = w.get(aid)
                    r = (ammo_before[k] - a.cannon_remaining) / a.spec.cannon_capacity
                    r += -1.0 if destroyed else 0.0
                if destroyed or over:
                    r += self._terminal_reward(w, aid, destroyed, i)
                    dones[k] = 1.0
                if self.shaping and not (destroyed or over):
                    r += self.shaping * (self._potential(w, aid) - phi_before[k])
                rewards[k] = r
                self.running[i][aid] += r
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
            cols["masks"].extend(mask)
            for i in ended:
                self.worlds[i] = self._new_world()
                self.running[i] = defaultdict(float)
                self.friendly_kill[i] = set()
                self._open_streams(i)
        bootstrap = {}
        pairs = [(i, aid) for i, w in enumerate(self.worlds) for aid in w.living_ids(AGENT)]
        if pairs:
            obs, _ = low_level_batch([(self.worlds[i], aid) for i, aid in pairs])
            _, values = self.net.forward(obs)
            for (i, aid), v in zip(pairs, values):
                bootstrap[self.stream_of[i][aid]] = float(v)
        return _finish(cols, bootstrap, episode_returns, self.net.obs_width, len(self.net.head_spec),
                       sum(self.net.head_spec))


def collect_rollouts(scenario, mode, net, opponent_team, rollout_ticks, n_envs=1, seed=0, **kwargs):
    """One-shot collection of ``rollout_ticks`` lockstep ticks over ``n_envs`` worlds."""
    return LowLevelCollector(scenario, mode, net, opponent_team, n_envs, seed, **kwargs).collect(rollout_ticks)
