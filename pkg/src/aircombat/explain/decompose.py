"""Reward decomposition over the low-level modes.

Every commander window's reward is attributed to the mode that was active
for that aircraft during the window, so the per-mode component returns add
up to the total return. :class:`DecomposedQ` fits one action-value
estimator per component.
"""

import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from ..engine.options import MODES
from ..errors import InsufficientDataError, InvalidActionError, InvalidComponentError, LogIntegrityError

COMPONENTS = MODES


def _windows(logs):
    """Flatten episode logs to ``(episode, window, agent, mode, reward, obs)`` tuples.

    ``logs`` holds runner results (anything with ``.windows``), lists of
    window records, or dicts with the same field names.
    """
    out = []
    for k, ep in enumerate(logs):
        rows = getattr(ep, "windows", ep)
        for w in rows:
            get = w.get if isinstance(w, dict) else (lambda name, default=None, _w=w: getattr(_w, name, default))
            mode = get("mode")
            if mode is None:
                raise LogIntegrityError(f"episode {k}: window {get('window')} of agent {get('agent_id')} has no mode")
            if isinstance(mode, str):
                if mode not in MODES:
                    raise LogIntegrityError(f"episode {k}: unknown mode {mode!r}")
                mode = MODES.index(mode)
            reward = get("reward")
            if reward is None or not math.isfinite(reward):
                raise LogIntegrityError(f"episode {k}: window {get('window')} has no finite reward")
            out.append((get("episode", k), get("window"), get("agent_id"), int(mode), float(reward), get("obs")))
    return out


@dataclass
class RewardComponents:
    """Per-episode component returns; ``per_agent`` keeps the Local view."""

    labels: tuple
    per_episode: dict
    per_agent: dict
    totals: dict

    def total(self):
        return math.fsum(self.totals.values())

    def component_sums(self):
        return np.sum(list(self.per_episode.values()), axis=0) if self.per_episode else np.zeros(len(self.labels))


def decompose_returns(logs, view="global", agent_id=None):
    """Attribute window rewards to the active mode's component.

    ``view="global"`` pools all agents of an episode; ``view="local"`` keeps
    only the windows of ``agent_id``.
    """
    if view not in ("global", "local"):
        raise ValueError("view must be 'global' or 'local'")
    if view == "local" and agent_id is None:
        raise ValueError("the local view needs an agent_id")
    per_episode = defaultdict(lambda: np.zeros(len(COMPONENTS)))
    per_agent = defaultdict(lambda: np.zeros(len(COMPONENTS)))
    rewards = defaultdict(list)
    for episode, _window, aid, mode, reward, _obs in _windows(logs):
        if view == "local" and aid != agent_id:
            continue
        per_episode[episode][mode] += reward
        per_agent[(episode, aid)][mode] += reward
        rewards[episode].append(reward)
    totals = {ep: math.fsum(rs) for ep, rs in rewards.items()}
    return RewardComponents(COMPONENTS, dict(per_episode), dict(per_agent), totals)


@dataclass(frozen=True)
class QConfig:
    gamma: float = 0.99
    ridge: float = 1e-3


@dataclass
class DecomposedQ:
    """One linear-per-action estimator per component.

    ``weights[i, a]`` maps ``[obs, 1]`` to Q of component ``i`` and action
    ``a``. The fit is linear in its targets, so the components always sum to
    the estimator fitted on the total reward.
    """

    labels: tuple
    weights: np.ndarray

    @property
    def n_actions(self):
        return self.weights.shape[1]

    def _features(self, obs):
        obs = np.atleast_2d(np.asarray(obs, dtype=np.float64))
        return np.hstack([obs, np.ones((len(obs), 1))])

    def component_index(self, component):
        if isinstance(component, (int, np.integer)) and 0 <= component < len(self.labels):
            return int(component)
        if component in self.labels:
            return self.labels.index(component)
        raise InvalidComponentError(f"unknown reward component {component!r}")

    def q(self, obs, action, component=None):
        """Q of one component, or the summed estimator when ``component`` is None."""
        if not isinstance(action, (int, np.integer)) or not 0 <= action < self.n_actions:
            raise InvalidActionError(f"action {action!r} outside 0..{self.n_actions - 1}")
        x = self._features(obs)
        if component is None:
            out = sum(x @ self.weights[i, action] for i in range(len(self.labels)))
        else:
            out = x @ self.weights[self.component_index(component), action]
        return out[0] if np.ndim(obs) == 1 else out

    def q_table(self, obs):
        """Array ``(components, actions)`` for one observation."""
        x = self._features(obs)[0]
        return self.weights @ x


def discounted_returns(rewards, dones, gamma):
    out = np.zeros_like(rewards)
    g = np.zeros(rewards.shape[1:])
    for t in range(len(rewards) - 1, -1, -1):
        g = rewards[t] + gamma * g * (1.0 - dones[t])
        out[t] = g
    return out


def component_transitions(logs):
    """Commander transitions ``(obs, action, component rewards, done)`` per agent stream."""
    streams = defaultdict(list)
    for episode, window, aid, mode, reward, obs in _windows(logs):
        if obs is None:
            raise InsufficientDataError("window records carry no observations")
        r = np.zeros(len(COMPONENTS))
        r[mode] = reward
        streams[(episode, aid)].append((window, np.asarray(obs, dtype=np.float64), mode, r))
    out = []
    for key in sorted(streams, key=repr):
        rows = sorted(streams[key], key=lambda t: t[0])
        for j, (_, obs, mode, r) in enumerate(rows):
            out.append((obs, mode, r, float(j == len(rows) - 1)))
    return out


def train_decomposed_q(transitions, components=COMPONENTS, config=None, n_actions=3):
    """Fit one estimator per component by discounted-return regression.

    ``transitions`` is a list of ``(obs, action, component_rewards, done)``
    in stream order (see :func:`component_transitions`).
    """
    config = config or QConfig()
    if not transitions:
        raise InsufficientDataError("no transitions to fit")
    obs = np.stack([t[0] for t in transitions])
    actions = np.asarray([t[1] for t in transitions], dtype=np.int64)
    rewards = np.stack([np.asarray(t[2], dtype=np.float64) for t in transitions])
    dones = np.asarray([t[3] for t in transitions], dtype=np.float64)
    if rewards.shape[1] != len(components):
        raise InvalidComponentError(f"transitions carry {rewards.shape[1]} components, expected {len(components)}")
    targets = discounted_returns(rewards, dones[:, None], config.gamma)
    x = np.hstack([obs, np.ones((len(obs), 1))])
    weights = np.zeros((len(components), n_actions, x.shape[1]))
    reg = config.ridge * np.eye(x.shape[1])
    for a in range(n_actions):
        rows = actions == a
        if not rows.any():
            continue
        xa = x[rows]
        w = np.linalg.solve(xa.T @ xa + reg, xa.T @ targets[rows])
        weights[:, a, :] = w.T
    return DecomposedQ(tuple(components), weights)


def q_delta(dq, s, a1, a2, component):
    """Preference of ``a1`` over ``a2`` in one component: Q_i(s, a1) - Q_i(s, a2)."""
    i = dq.component_index(component)
    return float(dq.q(s, a1, i) - dq.q(s, a2, i))
