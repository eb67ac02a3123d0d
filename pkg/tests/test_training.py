import json

import numpy as np
import pytest

from aircombat.agents import ControllerBank, IdleTeam, ModeTeam, RandomTeam
from aircombat.engine.observe import LOW_LEVEL_OBS_WIDTH
from aircombat.engine.types import ScenarioConfig
from aircombat.errors import DivergenceError, InvalidConfigError, InvalidSetupError
from aircombat.policy import build_controllers, read_checkpoint_header
from aircombat.runner import run_episodes
from aircombat.training import (
    ConvergenceTracker, LeagueState, PpoBatch, PpoConfig, RewardConfig, collect_rollouts, compute_gae,
    evaluate, kill_rate, load_run_config, ppo_loss, ppo_update, run_config_from_dict, to_dict,
    train_commander, train_low_level,
)
from aircombat.training.ppo import Adam, surrogate_objective
from oracles import gae_oracle

TINY = PpoConfig(rollout_ticks=16, n_envs=2, minibatch_size=32, epochs_per_update=2, total_env_steps=64)


@pytest.fixture
def nets():
    return build_controllers(LOW_LEVEL_OBS_WIDTH, rng=np.random.default_rng(0), trunk_sizes=(16, 16),
                             head_sizes=(8,))


# GAE ------------------------------------------------------------------------

def test_gae_matches_quadratic_oracle():
    rng = np.random.default_rng(0)
    for _ in range(100):
        T = int(rng.integers(1, 40))
        r, v = rng.normal(0, 1, T), rng.normal(0, 1, T)
        d = (rng.random(T) < 0.1).astype(float)
        gamma, lam, last = rng.uniform(0.5, 1.0), rng.uniform(0, 1), rng.normal()
        adv, ret = compute_gae(r, v, d, gamma, lam, last)
        assert np.max(np.abs(adv - gae_oracle(r, v, d, gamma, lam, last))) < 1e-10
        assert ret == pytest.approx(adv + v, abs=1e-12)


def test_gae_collapse_cases():
    rng = np.random.default_rng(1)
    r, v = rng.normal(0, 1, 20), rng.normal(0, 1, 20)
    d = np.zeros(20)
    d[9] = 1
    adv, _ = compute_gae(r, v, d, 0.0, 0.9, 5.0)
    assert np.array_equal(adv, r - v)
    adv, _ = compute_gae(r, v, d, 0.9, 0.0, 5.0)
    v_next = np.append(v[1:], 5.0) * (1 - d)
    assert np.array_equal(adv, r + 0.9 * v_next - v)
    # lambda = 1 gives discounted return minus value
    adv, _ = compute_gae(r[:5], v[:5], np.array([0, 0, 0, 0, 1.0]), 0.9, 1.0)
    mc = [sum(0.9 ** (k - t) * r[k] for k in range(t, 5)) for t in range(5)]
    assert adv == pytest.approx(np.array(mc) - v[:5], abs=1e-12)


# PPO ------------------------------------------------------------------------

def _batch(net, rng, n=64, shift=0.0):
    obs = rng.normal(0, 1, (n, net.obs_width))
    logits, _ = net.forward(obs)
    from aircombat.policy import sample
    acts, logp = sample(logits, None, rng, net.head_spec)
    return PpoBatch(obs, acts, logp - shift, rng.normal(0, 1, n), rng.normal(0, 1, n), None)


def test_surrogate_equals_advantage_mean_at_ratio_one(nets):
    rng = np.random.default_rng(2)
    net = nets["attack"]
    b = _batch(net, rng)
    assert surrogate_objective(net, b, 0.2) == pytest.approx(b.advantages.mean(), abs=1e-12)
    loss, _, stats = ppo_loss(net, b, 0.2, 0.0, 0.0)
    assert stats["clip_fraction"] == 0.0 and stats["approx_kl"] == pytest.approx(0, abs=1e-12)
    assert loss == pytest.approx(-b.advantages.mean(), abs=1e-12)


def test_clipped_samples_carry_no_policy_gradient(nets):
    rng = np.random.default_rng(3)
    net = nets["engage"]
    b = _batch(net, rng, shift=1.0)  # ratio e > 1 + clip everywhere
    b.advantages = np.abs(b.advantages)
    _, grads, stats = ppo_loss(net, b, 0.2, 0.0, 0.0)
    assert stats["clip_fraction"] == 1.0
    assert all(np.all(g == 0) for g in grads)


def test_zero_advantage_only_value_and_entropy_move(nets):
    rng = np.random.default_rng(4)
    net = nets["defend"]
    b = _batch(net, rng)
    b.advantages[:] = 0
    _, grads, _ = ppo_loss(net, b, 0.2, 0.0, 0.0)
    assert all(np.all(g == 0) for g in grads)


def test_ppo_update_lowers_loss_and_respects_frozen_trunk(nets):
    rng = np.random.default_rng(5)
    net = nets["attack"]
    b = _batch(net, rng, n=128)
    cfg = PpoConfig(minibatch_size=128, epochs_per_update=5, learning_rate=1e-2)
    before = ppo_loss(net, b, cfg.clip, cfg.value_coef, cfg.entropy_coef, with_grads=False)[0]
    trunk = [p.copy() for p in net.trunk.parameters()]
    net.trunk_frozen = True
    ppo_update(net, b, cfg, Adam(net.parameters(), lr=cfg.learning_rate), rng)
    after = ppo_loss(net, b, cfg.clip, cfg.value_coef, cfg.entropy_coef, with_grads=False)[0]
    assert after < before
    assert all(np.array_equal(a, p) for a, p in zip(trunk, net.trunk.parameters()))
    net.trunk_frozen = False
    ppo_update(net, b, cfg, Adam(net.parameters(), lr=cfg.learning_rate), rng)
    assert not all(np.array_equal(a, p) for a, p in zip(trunk, net.trunk.parameters()))


def test_frozen_net_and_divergence(nets):
    rng = np.random.default_rng(6)
    net = nets["attack"]
    b = _batch(net, rng)
    net.frozen = True
    with pytest.raises(InvalidSetupError):
        ppo_update(net, b, PpoConfig(), Adam(net.parameters()), rng)
    net.frozen = False
    b.returns[0] = np.inf
    with pytest.raises(DivergenceError):
        ppo_update(net, b, PpoConfig(), Adam(net.parameters()), rng)


# rollouts and league ----------------------------------------------------------

def test_rollout_streams_and_rewards(nets):
    scen = ScenarioConfig(2, 2, max_ticks=30)
    buf = collect_rollouts(scen, "engage", nets["engage"], RandomTeam(), 40, n_envs=2, seed=0)
    assert len(buf) == len(buf.obs) == len(buf.streams)
    assert (buf.rewards >= 0).all() and (buf.rewards <= 2).all()
    assert buf.dones.sum() >= 4  # every 30-tick episode closes both agent streams
    buf.compute_advantages(0.99, 0.95)
    for s in np.unique(buf.streams):
        idx = buf.streams == s
        adv, _ = compute_gae(buf.rewards[idx], buf.values[idx], buf.dones[idx], 0.99, 0.95,
                             buf.bootstrap.get(int(s), 0.0))
        assert buf.advantages[idx] == pytest.approx(adv)


def test_incremental_attack_return_matches_terminal_form(nets):
    scen = ScenarioConfig(1, 1, max_ticks=40)
    a = collect_rollouts(scen, "attack", nets["attack"], RandomTeam(), 120, n_envs=2, seed=3,
                         reward_timing="incremental")
    b = collect_rollouts(scen, "attack", nets["attack"], RandomTeam(), 120, n_envs=2, seed=3,
                         reward_timing="terminal")
    assert a.episode_returns == pytest.approx(b.episode_returns, abs=1e-12)
    assert all(-1 <= r <= 1 for r in a.episode_returns)


def test_rollouts_are_seeded(nets):
    scen = ScenarioConfig(1, 1, max_ticks=50)
    a = collect_rollouts(scen, "defend", nets["defend"], RandomTeam(), 60, seed=9)
    b = collect_rollouts(scen, "defend", nets["defend"], RandomTeam(), 60, seed=9)
    assert np.array_equal(a.obs, b.obs) and np.array_equal(a.actions, b.actions)


def test_convergence_tracker():
    t = ConvergenceTracker(window=3, threshold=0.01)
    for v in (1, 2, 3, 4, 5):
        assert not t.push(v)
    assert not t.push(6)  # still improving
    t = ConvergenceTracker(window=2, threshold=0.01)
    assert [t.push(v) for v in (5, 5, 5, 5)] == [False, False, False, True]


def test_league_stage_advance_snapshots(nets):
    league = LeagueState("attack")
    assert isinstance(league.opponent_team(), RandomTeam)
    league.advance(nets["attack"])
    assert league.stage == 1 and league.snapshot.frozen
    assert league.snapshot is not nets["attack"]
    assert isinstance(league.opponent_team(), ModeTeam)


def test_train_low_level_writes_tagged_checkpoints(tmp_path, nets):
    res = train_low_level("attack", ppo=TINY, stages=2, controllers=nets, out_dir=str(tmp_path),
                          scenario=ScenarioConfig(1, 1, max_ticks=40))
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == ["attack.ckpt", "attack_metrics.csv", "attack_stage0.ckpt", "attack_stage1.ckpt"]
    assert read_checkpoint_header(tmp_path / "attack_stage1.ckpt")["tags"] == \
        {"mode": "attack", "stage": 1, "trunk": "trained"}
    assert [r["stage"] for r in res.metrics] == [0, 0, 1, 1]


def test_frozen_trunk_training_leaves_trunk_alone(nets):
    trunk = [p.copy() for p in nets["engage"].trunk.parameters()]
    heads = nets["engage"].pi_out[0].copy()
    train_low_level("engage", ppo=TINY, controllers=nets, freeze_trunk=True,
                    scenario=ScenarioConfig(1, 1, max_ticks=40))
    assert all(np.array_equal(a, b) for a, b in zip(trunk, nets["engage"].trunk.parameters()))
    assert not np.array_equal(heads, nets["engage"].pi_out[0])
    assert nets["engage"].tags["trunk"] == "frozen"
    assert nets["attack"].trunk is nets["engage"].trunk


def test_training_is_deterministic():
    def run():
        c = build_controllers(LOW_LEVEL_OBS_WIDTH, rng=np.random.default_rng(0), trunk_sizes=(16, 16))
        return train_low_level("engage", ppo=TINY, controllers=c, scenario=ScenarioConfig(1, 1)).net.digest()
    assert run() == run()


# commander ------------------------------------------------------------------

def _frozen(nets):
    for n in nets.values():
        n.frozen = True
    return nets


def test_commander_requires_frozen_controllers(nets):
    with pytest.raises(InvalidSetupError):
        train_commander(3, "homo", nets)


@pytest.mark.parametrize("m,comp", [(0, "homo"), (6, "homo"), (3, "mixed")])
def test_commander_rejects_bad_settings(nets, m, comp):
    with pytest.raises(InvalidConfigError):
        train_commander(m, comp, _frozen(nets))


def test_commander_training_keeps_controllers_and_tags(tmp_path, nets):
    _frozen(nets)
    digests = {k: n.digest() for k, n in nets.items()}
    ppo = PpoConfig(rollout_ticks=40, n_envs=2, minibatch_size=16, epochs_per_update=1, total_env_steps=100)
    res = train_commander(2, "hetero", nets, ppo=ppo, out_dir=str(tmp_path),
                          scenario=ScenarioConfig(2, 2, max_ticks=60))
    assert {k: n.digest() for k, n in nets.items()} == digests
    assert res.net.tags == {"m": 2, "composition": "hetero"}
    assert res.net.obs_width == 8 + 10 * 2
    assert (tmp_path / "commander_m2_hetero.ckpt").exists()
    assert all("win_rate" in row for row in res.metrics)


# evaluation -------------------------------------------------------------------

def test_idle_teams_always_draw():
    out = evaluate(IdleTeam(), IdleTeam(), ScenarioConfig(2, 2, max_ticks=60), 10, seed=1)
    assert out["draw"] == 1.0 and out["win"] == out["loss"] == 0.0
    assert out["episodes"] == 10


def test_outcome_fractions_sum_to_one(nets):
    team = ModeTeam(ControllerBank(nets), "mixed")
    out = evaluate(team, RandomTeam(), ScenarioConfig(2, 2, max_ticks=200), 12, seed=2)
    assert out["win"] + out["loss"] + out["draw"] == pytest.approx(1.0)


@pytest.mark.parametrize("episodes", [0, -3, 2.5])
def test_evaluate_rejects_bad_episode_counts(episodes):
    with pytest.raises(InvalidConfigError):
        evaluate(IdleTeam(), IdleTeam(), ScenarioConfig(1, 1), episodes)


def test_kill_rate_counts_episodes_with_opponent_losses():
    res = run_episodes(ScenarioConfig(1, 1, max_ticks=20), IdleTeam(), IdleTeam(), 3)
    assert kill_rate(res) == 0.0
    res[1].losses = {"agent": 0, "opponent": 1}
    assert kill_rate(res) == pytest.approx(1 / 3)


def test_evaluation_is_seeded(nets):
    team = ModeTeam(ControllerBank(nets), "attack")
    a = evaluate(team, RandomTeam(), ScenarioConfig(1, 1, max_ticks=100), 8, seed=5)
    b = evaluate(team, RandomTeam(), ScenarioConfig(1, 1, max_ticks=100), 8, seed=5)
    assert a == b


# config -----------------------------------------------------------------------

def test_config_round_trip_and_strictness(tmp_path):
    cfg = run_config_from_dict({"seed": 3, "ppo": {"gae_lambda": 0.7}, "scenario": {"composition": "hetero"}})
    assert cfg.ppo.gae_lambda == 0.7 and cfg.scenario.composition == "heterogeneous"
    assert run_config_from_dict(json.loads(json.dumps(to_dict(cfg)))) == cfg
    for bad in ({"sed": 1}, {"ppo": {"gamma": "high"}}, {"ppo": {"gamma": 1.0}},
                {"commander": {"m": 6}}, {"rewards": {"attack_timing": "later"}},
                {"scenario": {"composition": "mixed"}}, {"ppo": {"n_envs": 1.5}}):
        with pytest.raises(InvalidConfigError):
            run_config_from_dict(bad)
    with pytest.raises(InvalidConfigError):
        load_run_config(tmp_path / "nope.json")
    (tmp_path / "broken.json").write_text("{")
    with pytest.raises(InvalidConfigError):
        load_run_config(tmp_path / "broken.json")


def test_shipped_configs_load():
    for name in ("defaults", "desk", "determinism"):
        load_run_config(f"configs/{name}.json")


def test_reward_config_per_mode():
    rc = RewardConfig()
    assert rc.for_mode("attack") == {"reward_timing": "incremental", "shaping": 1.0}
    assert rc.for_mode("engage") == {"reward_timing": "incremental", "shaping": 0.0}
