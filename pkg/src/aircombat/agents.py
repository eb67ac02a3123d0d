"""Controllers and team policies.

A *team policy* chooses low-level actions for every living aircraft of one
team, for a batch of worlds stepped in lockstep. Per-episode state (the
commander's current options, per-aircraft mode assignments) lives in
``world.info``.
"""

import numpy as np

from . import geometry as geo
from .engine.observe import commander_observation, hostile_team, low_level_observation, ranked_others
from .engine.options import MODES, mode_index
from .engine.types import HOLD, LOW_LEVEL_HEADS, OPTION_TICKS, LowLevelAction
from .policy import greedy, low_level_mask, sample

_ROCKET_MASK_COL = sum(LOW_LEVEL_HEADS) - 1


def info(world):
    if not hasattr(world, "info"):
        world.info = {}
    return world.info


def low_level_batch(world_ids):
    """Observations and flat masks for ``[(world, aircraft_id), ...]``."""
    obs = np.stack([low_level_observation(w, aid) for w, aid in world_ids])
    mask = np.ones((len(world_ids), sum(LOW_LEVEL_HEADS)), dtype=bool)
    for i, (w, aid) in enumerate(world_ids):
        if w.get(aid).rockets_remaining <= 0:
            mask[i, _ROCKET_MASK_COL] = False
    return obs, mask


def actions_from_indices(idx):
    return [LowLevelAction.from_indices(row) for row in idx]


class NetController:
    """Single-aircraft callable around a low-level network."""

    def __init__(self, net, greedy=False, rng=None):
        self.net = net
        self.greedy = greedy
        self.rng = np.random.default_rng(0) if rng is None else rng

    def __call__(self, world, aircraft_id):
        obs = low_level_observation(world, aircraft_id)
        mask = low_level_mask(world.get(aircraft_id).rockets_remaining > 0)
        logits, _ = self.net.forward(obs)
        if self.greedy:
            idx = greedy(logits, mask, self.net.head_spec)
        else:
            idx, _ = sample(logits, mask, self.rng, self.net.head_spec)
        return LowLevelAction.from_indices(idx)


class ControllerBank:
    """The three low-level controllers, queried in batches grouped by mode."""

    def __init__(self, nets, greedy=False):
        if isinstance(nets, dict):
            nets = [nets[m] for m in MODES]
        self.nets = list(nets)
        self.greedy = greedy

    def act(self, requests, rng):
        """``requests`` is ``[(world, aircraft_id, mode), ...]``; returns actions in order."""
        out = [None] * len(requests)
        for mode in range(len(MODES)):
            rows = [i for i, r in enumerate(requests) if r[2] == mode]
            if not rows:
                continue
            net = self.nets[mode]
            obs, mask = low_level_batch([(requests[i][0], requests[i][1]) for i in rows])
            logits, _ = net.forward(obs)
            if self.greedy:
                idx = greedy(logits, mask, net.head_spec)
            else:
                idx, _ = sample(logits, mask, rng, net.head_spec)
            for i, a in zip(rows, actions_from_indices(idx)):
                out[i] = a
        return out


class TeamPolicy:
    name = "team"

    def act(self, worlds, team, rng):
        raise NotImplementedError


class IdleTeam(TeamPolicy):
    """Holds course at cruise speed and never fires."""

    name = "idle"

    def act(self, worlds, team, rng):
        return [{aid: HOLD for aid in w.living_ids(team)} for w in worlds]


class RandomTeam(TeamPolicy):
    """Uniformly random manoeuvres and trigger pulls."""

    name = "random"

    def act(self, worlds, team, rng):
        out = []
        for w in worlds:
            acts = {}
            ids = w.living_ids(team)
            draws = rng.integers(0, (13, 9, 2, 2), size=(len(ids), 4))
            for aid, d in zip(ids, draws):
                c_r = int(d[3]) if w.get(aid).rockets_remaining > 0 else 0
                acts[aid] = LowLevelAction(int(d[0]) - 6, int(d[1]), int(d[2]), c_r)
            out.append(acts)
        return out


class ScriptedTeam(TeamPolicy):
    """Wraps ``fn(world, aircraft_id) -> LowLevelAction``."""

    def __init__(self, fn, name="scripted"):
        self.fn = fn
        self.name = name

    def act(self, worlds, team, rng):
        return [{aid: self.fn(w, aid) for aid in w.living_ids(team)} for w in worlds]


def pursuit_action(world, aircraft_id):
    """Turn onto the nearest hostile at full speed; fire when it is in the cone."""
    me = world.get(aircraft_id)
    ranked = ranked_others(world, me, hostile_team(me.team))
    if not ranked or ranked[0][0] <= geo.COINCIDENT_KM:
        return LowLevelAction(0, 8, 0, 0)
    d, target = ranked[0]
    off = geo.relative_bearing(me.pos, me.heading, target.pos)
    h = int(max(-6, min(6, round(off / 15.0))))
    ata = abs(off)
    fire = 1 if d <= me.spec.d_a_max and ata <= me.spec.wez_half_angle_max else 0
    rocket = 1 if me.rockets_remaining > 0 and d <= 2 * me.spec.d_a_max and ata <= 30.0 else 0
    return LowLevelAction(h, 8, fire, rocket)


class PursuitTeam(ScriptedTeam):
    def __init__(self):
        super().__init__(pursuit_action, name="pursuit")


class ModeTeam(TeamPolicy):
    """Every aircraft runs one low-level controller for the whole episode.

    ``assignment`` is a mode name, ``"mixed"`` (uniform over the three modes
    per aircraft), or a sequence of mode names to draw from per aircraft.
    """

    def __init__(self, bank, assignment, name=None):
        self.bank = bank if isinstance(bank, ControllerBank) else ControllerBank(bank)
        if assignment == "mixed":
            assignment = MODES
        if isinstance(assignment, (str, int)):
            self.choices = (mode_index(assignment),)
        else:
            self.choices = tuple(mode_index(m) for m in assignment)
        self.name = name or "modes:" + "+".join(MODES[c] for c in self.choices)

    def _modes(self, w, team, rng):
        key = ("modes", team)
        state = info(w)
        if key not in state:
            ids = w.team_ids(team)
            if len(self.choices) == 1:
                state[key] = {aid: self.choices[0] for aid in ids}
            else:
                picks = rng.integers(0, len(self.choices), size=len(ids))
                state[key] = {aid: self.choices[p] for aid, p in zip(ids, picks)}
        return state[key]

    def act(self, worlds, team, rng):
        requests = []
        for w in worlds:
            modes = self._modes(w, team, rng)
            requests.extend((w, aid, modes[aid]) for aid in w.living_ids(team))
        acts = self.bank.act(requests, rng)
        out = [{} for _ in worlds]
        index = {id(w): i for i, w in enumerate(worlds)}
        for (w, aid, _), a in zip(requests, acts):
            out[index[id(w)]][aid] = a
        return out


def commander_choice(commander, obs, rng=None, greedy_choice=True):
    """Mode indices for a batch of commander observations.

    ``commander`` is a :class:`PolicyNet` or any callable mapping a batch of
    observations to mode indices.
    """
    obs = np.atleast_2d(obs)
    if hasattr(commander, "forward"):
        logits, _ = commander.forward(obs)
        if greedy_choice:
            return greedy(logits, None, commander.head_spec)[:, 0]
        idx, _ = sample(logits, None, rng, commander.head_spec)
        return idx[:, 0]
    return np.asarray(commander(obs), dtype=np.int64).reshape(-1)


class CommanderTeam(TeamPolicy):
    """Hierarchical team: the commander picks a mode per aircraft every ``option_ticks``.

    All aircraft of the team are re-assigned synchronously at window starts.
    Each decision is appended to ``world.info["activations"]`` as
    ``(window, aircraft_id, type_index, mode)``.
    """

    def __init__(self, commander, bank, m, option_ticks=OPTION_TICKS, greedy_commander=False,
                 name="commander"):
        self.commander = commander
        self.bank = bank if isinstance(bank, ControllerBank) else ControllerBank(bank)
        self.m = m
        self.option_ticks = option_ticks
        self.greedy_commander = greedy_commander
        self.name = name

    def decide(self, worlds, team, rng):
        pending = []
        for w in worlds:
            state = info(w)
            if w.tick % self.option_ticks == 0 and state.get(("decided", team)) != w.tick:
                state[("decided", team)] = w.tick
                state["last_obs"] = {}
                for aid in w.living_ids(team):
                    pending.append((w, aid))
        if not pending:
            return
        obs = np.stack([commander_observation(w, aid, self.m) for w, aid in pending])
        modes = commander_choice(self.commander, obs, rng, self.greedy_commander)
        for (w, aid), mode, o in zip(pending, modes, obs):
            state = info(w)
            state["last_obs"][aid] = o
            state.setdefault(("options", team), {})[aid] = int(mode)
            state.setdefault("activations", []).append(
                (w.tick // self.option_ticks, aid, w.get(aid).spec.type_index, int(mode)))
            state.setdefault("switches", {})[aid] = MODES[int(mode)]

    def act(self, worlds, team, rng):
        self.decide(worlds, team, rng)
        requests = []
        for w in worlds:
            opts = info(w)[("options", team)]
            requests.extend((w, aid, opts[aid]) for aid in w.living_ids(team))
        acts = self.bank.act(requests, rng)
        out = [{} for _ in worlds]
        index = {id(w): i for i, w in enumerate(worlds)}
        for (w, aid, _), a in zip(requests, acts):
            out[index[id(w)]][aid] = a
        return out

