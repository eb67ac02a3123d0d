import math

import numpy as np
import pytest

from aircombat.errors import CheckpointError, InvalidActionError, InvalidMaskError, ShapeError
from aircombat.policy import (
    ActionMask, PolicyNet, build_commander, build_controllers, checkpoint_bytes, greedy,
    head_log_probs, joint_log_prob_entropy, load_checkpoint, log_prob_and_entropy, low_level_mask,
    sample, save_checkpoint, share_trunks,
)
from oracles import ppo_grad_check, random_probe_batch

HEADS = (13, 9, 2, 2)


def roughen(net, rng, scale=0.5):
    """Move a fresh net away from its near-uniform initial policy."""
    net.set_flat_parameters(net.flat_parameters() + rng.normal(0, scale, net.flat_parameters().size))
    return net


@pytest.fixture
def controllers():
    return build_controllers(21, rng=np.random.default_rng(0))


def test_forward_shapes(controllers):
    net = controllers["attack"]
    logits, value = net.forward(np.zeros(21))
    assert logits.shape == (26,) and np.ndim(value) == 0
    logits, value = net.forward(np.zeros((5, 21)))
    assert logits.shape == (5, 26) and value.shape == (5,)
    with pytest.raises(ShapeError):
        net.forward(np.zeros(20))


def test_log_probs_match_softmax_oracle():
    rng = np.random.default_rng(1)
    z = rng.normal(0, 3, (4, 26))
    logps = head_log_probs(z, HEADS)
    start = 0
    for n, lp in zip(HEADS, logps):
        for row in range(4):
            e = [math.exp(v) for v in z[row, start:start + n]]
            ref = [math.log(x / sum(e)) for x in e]
            assert lp[row] == pytest.approx(ref, abs=1e-12)
        start += n


def test_joint_log_prob_is_sum_of_heads():
    rng = np.random.default_rng(2)
    z = rng.normal(0, 1, (3, 26))
    a = np.array([[0, 0, 0, 0], [12, 8, 1, 1], [6, 4, 1, 0]])
    logp, ent, _ = joint_log_prob_entropy(z, a, HEADS)
    lps = head_log_probs(z, HEADS)
    ref = sum(lps[k][np.arange(3), a[:, k]] for k in range(4))
    assert logp == pytest.approx(ref, abs=1e-12)
    ref_ent = -sum((np.exp(lp) * lp).sum(axis=1) for lp in lps)
    assert ent == pytest.approx(ref_ent, abs=1e-12)


def test_masked_rocket_never_sampled(controllers):
    net = roughen(controllers["attack"], np.random.default_rng(3))
    rng = np.random.default_rng(4)
    obs = rng.normal(0, 1, (2000, 21))
    logits, _ = net.forward(obs)
    mask = low_level_mask(False)
    acts, logp = sample(logits, mask, rng, HEADS)
    assert (acts[:, 3] == 0).all()
    assert np.isfinite(logp).all()
    assert (greedy(logits, mask, HEADS)[:, 3] == 0).all()
    with pytest.raises(InvalidActionError):
        joint_log_prob_entropy(logits[:1], [[0, 0, 0, 1]], HEADS, mask)


def test_sampling_frequencies_follow_probabilities():
    rng = np.random.default_rng(5)
    z = np.array([0.0, 1.0, 2.0])
    acts, _ = sample(np.tile(z, (60000, 1)), None, rng)
    freq = np.bincount(acts[:, 0], minlength=3) / 60000
    p = np.exp(z) / np.exp(z).sum()
    assert freq == pytest.approx(p, abs=0.01)


def test_greedy_ties_go_to_lowest_index():
    assert greedy(np.array([1.0, 3.0, 3.0]))[0] == 1


def test_empty_mask_rejected():
    with pytest.raises(InvalidMaskError):
        ActionMask([np.zeros(3, bool)])
    with pytest.raises(InvalidMaskError):
        head_log_probs(np.zeros((1, 3)), (3,), np.zeros(3, bool))


def test_log_prob_and_entropy_single(controllers):
    net = controllers["engage"]
    lp, ent = log_prob_and_entropy(net, np.zeros(21), [6, 4, 0, 0])
    assert lp < 0 and ent > 0
    # near-uniform initial policy
    assert ent == pytest.approx(math.log(13) + math.log(9) + 2 * math.log(2), rel=1e-3)


@pytest.mark.parametrize("role,heads,hidden", [("attack", HEADS, (32, 32)), ("commander", (3,), (64, 64))])
def test_ppo_gradients_match_finite_differences(role, heads, hidden):
    rng = np.random.default_rng(6)
    if role == "commander":
        net = build_commander(38, rng=rng, hidden=hidden)
    else:
        net = build_controllers(21, rng=rng, trunk_sizes=hidden, head_sizes=(16,))[role]
    roughen(net, rng, 0.3)
    for _ in range(10):
        batch = random_probe_batch(net, rng, size=4)
        assert ppo_grad_check(net, batch, rng=rng) < 1e-4


def test_controllers_share_one_trunk(controllers):
    a, e, d = controllers["attack"], controllers["engage"], controllers["defend"]
    assert a.trunk is e.trunk is d.trunk
    w = a.trunk.layers[0][0]
    w[0, 0] += 1.0
    assert e.parameters()[0][0, 0] == w[0, 0]
    assert a.head_layers[0][0] is not e.head_layers[0][0]


def test_checkpoint_round_trip(tmp_path, controllers):
    net = roughen(controllers["defend"], np.random.default_rng(7))
    net.tags = {"mode": "defend", "stage": 0}
    path = save_checkpoint(net, tmp_path / "defend.ckpt")
    back = load_checkpoint(path, expect_role="defend")
    assert back.digest() == net.digest()
    assert back.tags == net.tags and back.head_spec == net.head_spec
    assert checkpoint_bytes(back) == path.read_bytes()
    obs = np.random.default_rng(8).normal(0, 1, (3, 21))
    assert np.array_equal(back.forward(obs)[0], net.forward(obs)[0])


def test_loaded_trunks_are_relinked(tmp_path, controllers):
    paths = [save_checkpoint(n, tmp_path / f"{r}.ckpt") for r, n in controllers.items()]
    nets = share_trunks([load_checkpoint(p) for p in paths])
    assert nets[0].trunk is nets[1].trunk is nets[2].trunk
    other = build_controllers(21, rng=np.random.default_rng(99))["attack"]
    share_trunks(nets + [other])
    assert other.trunk is not nets[0].trunk


def test_checkpoint_errors(tmp_path, controllers):
    path = save_checkpoint(controllers["attack"], tmp_path / "a.ckpt")
    with pytest.raises(CheckpointError):
        load_checkpoint(path, expect_role="commander")
    data = bytearray(path.read_bytes())
    data[-1] ^= 0xFF
    bad = tmp_path / "flipped.ckpt"
    bad.write_bytes(bytes(data))
    with pytest.raises(CheckpointError):
        load_checkpoint(bad)
    (tmp_path / "junk.ckpt").write_bytes(b"hello")
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "junk.ckpt")
    (tmp_path / "short.ckpt").write_bytes(path.read_bytes()[:-8])
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "short.ckpt")
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "missing.ckpt")


def test_unknown_role_and_head_mismatch():
    with pytest.raises(ValueError):
        PolicyNet.build("pilot", 4, (3,))
    net = PolicyNet.build("commander", 4, (3,))
    with pytest.raises(ShapeError):
        PolicyNet("commander", net.trunk, [], net.pi_out, net.v_out, (4,))
