"""Lockstep episode runner shared by evaluation, sweeps and the command line."""

from dataclasses import dataclass, field

import numpy as np

from .agents import CommanderTeam, info
from .engine.episode_log import EpisodeLogger
from .engine.rewards import reward_commander
from .engine.types import AGENT, OPPONENT, OPTION_TICKS
from .engine.world import Outcome, spawn_scenario

BATCH = 16


@dataclass
class WindowRecord:
    """Commander decision for one aircraft over one option window."""

    episode: int
    window: int
    agent_id: int
    type_index: int
    mode: int
    reward: float
    obs: np.ndarray = None


@dataclass
class EpisodeResult:
    episode: int
    seed: int
    outcome: Outcome
    ticks: int
    activations: list = field(default_factory=list)
    windows: list = field(default_factory=list)
    log: list = None
    losses: dict = None


def episode_seed(seed, episode):
    return int(np.random.SeedSequence([int(seed), int(episode)]).generate_state(1)[0])


def _close_windows(world, episode, events, team_of, keep_obs):
    state = info(world)
    open_ = state.pop("open_windows", None)
    if not open_:
        return []
    out = []
    for aid, (window, type_index, mode, obs) in sorted(open_.items()):
        r = reward_commander(events, aid, team_of)
        out.append(WindowRecord(episode, window, aid, type_index, mode, r, obs if keep_obs else None))
    return out


def run_episodes(config, agents, opponents, episodes, seed=0, batch=BATCH, log=False,
                 keep_obs=False, policy_seed=None):
    """Play ``episodes`` episodes of ``config`` and return one :class:`EpisodeResult` each.

    Episode ``k`` spawns from ``episode_seed(seed, k)``; with ``log=True`` each
    result carries its JSON-lines log.
    """
    rng = np.random.default_rng(np.random.SeedSequence([int(seed if policy_seed is None else policy_seed), 0x5EED]))
    results = []
    hierarchical = isinstance(agents, CommanderTeam)
    option_ticks = agents.option_ticks if hierarchical else OPTION_TICKS
    for start in range(0, episodes, batch):
        ks = list(range(start, min(episodes, start + batch)))
        worlds = [spawn_scenario(config.with_seed(episode_seed(seed, k))) for k in ks]
        loggers = [EpisodeLogger() if log else None for _ in ks]
        window_events = [[] for _ in ks]
        window_logs = [[] for _ in ks]
        team_of = [{a.id: a.team for a in w.aircraft} for w in worlds]
        active = list(range(len(ks)))
        while active:
            ws = [worlds[i] for i in active]
            if hierarchical:
                for i in active:
                    w = worlds[i]
                    if w.tick % option_ticks == 0 and w.tick > 0:
                        window_logs[i].extend(_close_windows(w, ks[i], window_events[i], team_of[i], keep_obs))
                        window_events[i] = []
                agents.decide(ws, AGENT, rng)
                for i in active:
                    w = worlds[i]
                    if w.tick % option_ticks == 0:
                        opts = info(w)[("options", AGENT)]
                        obs_cache = info(w).get("last_obs", {})
                        info(w)["open_windows"] = {
                            aid: (w.tick // option_ticks, w.get(aid).spec.type_index, opts[aid],
                                  obs_cache.get(aid))
                            for aid in w.living_ids(AGENT)
                        }
            a_acts = agents.act(ws, AGENT, rng)
            o_acts = opponents.act(ws, OPPONENT, rng)
            still = []
            for i, aa, oa in zip(active, a_acts, o_acts):
                w = worlds[i]
                joint = {**aa, **oa}
                switches = info(w).pop("switches", None)
                ev = w.step(joint)
                window_events[i].append(ev)
                if loggers[i] is not None:
                    loggers[i].record(w, joint, ev, switches)
                if w.outcome() is Outcome.ONGOING:
                    still.append(i)
                elif hierarchical:
                    window_logs[i].extend(_close_windows(w, ks[i], window_events[i], team_of[i], keep_obs))
            active = still
        for i, k in enumerate(ks):
            w = worlds[i]
            results.append(EpisodeResult(
                episode=k, seed=episode_seed(seed, k), outcome=w.outcome(), ticks=w.tick,
                activations=list(info(w).get("activations", [])), windows=window_logs[i],
                log=loggers[i].lines if loggers[i] is not None else None,
                losses={t: sum(not a.alive for a in w.aircraft if a.team == t) for t in (AGENT, OPPONENT)},
            ))
    return results


def outcome_fractions(results):
    n = len(results)
    counts = {o: 0 for o in (Outcome.WIN, Outcome.LOSS, Outcome.DRAW)}
    for r in results:
        counts[r.outcome] += 1
    return {"win": counts[Outcome.WIN] / n, "loss": counts[Outcome.LOSS] / n,
            "draw": counts[Outcome.DRAW] / n}
