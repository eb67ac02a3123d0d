"""Clipped-surrogate PPO update with hand-derived gradients."""

from dataclasses import dataclass

import numpy as np

from ..errors import DivergenceError, InvalidSetupError
from ..policy import dlogits_from_heads, joint_log_prob_entropy


class Adam:
    def __init__(self, params, lr=3e-4, betas=(0.9, 0.999), eps=1e-5):
        self.params = params
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, grads):
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


@dataclass
class PpoBatch:
    obs: np.ndarray
    actions: np.ndarray
    old_log_probs: np.ndarray
    advantages: np.ndarray
    returns: np.ndarray
    masks: np.ndarray = None

    def take(self, idx):
        return PpoBatch(self.obs[idx], self.actions[idx], self.old_log_probs[idx],
                        self.advantages[idx], self.returns[idx],
                        None if self.masks is None else self.masks[idx])


def ppo_loss(net, batch, clip, value_coef, entropy_coef, with_grads=True):
    """Total loss ``pg + value_coef * vf - entropy_coef * entropy`` and its gradients.

    Returns ``(loss, grads, stats)``; ``grads`` follows ``net.parameters()``.
    """
    logits, values, acts = net.forward(batch.obs, return_cache=True)
    logp, ent, probs = joint_log_prob_entropy(logits, batch.actions, net.head_spec, batch.masks)
    n = len(logp)
    log_ratio = logp - batch.old_log_probs
    ratio = np.exp(log_ratio)
    adv = batch.advantages
    surr1 = ratio * adv
    surr2 = np.clip(ratio, 1.0 - clip, 1.0 + clip) * adv
    unclipped = surr1 <= surr2
    pg_loss = -np.mean(np.minimum(surr1, surr2))
    v_err = values - batch.returns
    v_loss = 0.5 * np.mean(v_err * v_err)
    entropy = np.mean(ent)
    loss = pg_loss + value_coef * v_loss - entropy_coef * entropy
    stats = {
        "loss": float(loss),
        "policy_loss": float(pg_loss),
        "value_loss": float(v_loss),
        "entropy": float(entropy),
        "approx_kl": float(np.mean((ratio - 1.0) - log_ratio)),
        "clip_fraction": float(np.mean(np.abs(ratio - 1.0) > clip)),
    }
    if not with_grads:
        return loss, None, stats
    d_logp = np.where(unclipped, -adv * ratio, 0.0) / n
    d_ent = np.full(n, -entropy_coef / n)
    dlogits = dlogits_from_heads(probs, batch.actions, net.head_spec, d_logp, d_ent)
    dvalue = value_coef * v_err / n
    grads = net.backward(acts, dlogits, dvalue)
    return loss, grads, stats


def surrogate_objective(net, batch, clip):
    """Mean clipped surrogate (to be maximized)."""
    logits, _ = net.forward(batch.obs)
    logp, _, _ = joint_log_prob_entropy(logits, batch.actions, net.head_spec, batch.masks)
    ratio = np.exp(logp - batch.old_log_probs)
    return float(np.mean(np.minimum(ratio * batch.advantages,
                                    np.clip(ratio, 1.0 - clip, 1.0 + clip) * batch.advantages)))


def clip_grad_norm(grads, max_norm):
    if max_norm is None or max_norm <= 0:
        return grads, float(np.sqrt(sum(float((g * g).sum()) for g in grads)))
    norm = float(np.sqrt(sum(float((g * g).sum()) for g in grads)))
    if norm > max_norm:
        scale = max_norm / (norm + 1e-12)
        grads = [g * scale for g in grads]
    return grads, norm


def normalize_advantages(adv):
    adv = np.asarray(adv, dtype=np.float64)
    if len(adv) < 2:
        return adv - adv.mean() if len(adv) else adv
    with np.errstate(over="ignore", invalid="ignore"):
        return (adv - adv.mean()) / (adv.std() + 1e-8)


def batch_from_buffer(buffer, normalize=True):
    if buffer.advantages is None:
        raise InvalidSetupError("compute advantages before the update")
    adv = normalize_advantages(buffer.advantages) if normalize else buffer.advantages
    return PpoBatch(buffer.obs, buffer.actions, buffer.log_probs, adv, buffer.returns, buffer.masks)


def ppo_update(net, batch, config, optimizer, rng):
    """Minibatch epochs over ``batch``; parameters change in place.

    With ``net.trunk_frozen`` set only the mode's own layers move.

    Returns ``(net, stats)`` with stats averaged over minibatches.
    """
    if net.frozen:
        raise InvalidSetupError(f"{net.role} network is frozen")
    n = len(batch.old_log_probs)
    totals = {}
    count = 0
    for _ in range(config.epochs_per_update):
        perm = rng.permutation(n)
        for start in range(0, n, config.minibatch_size):
            mb = batch.take(perm[start:start + config.minibatch_size])
            # overflow is reported below as a divergence, not as numpy warnings
            with np.errstate(over="ignore", invalid="ignore"):
                loss, grads, stats = ppo_loss(net, mb, config.clip, config.value_coef, config.entropy_coef)
            if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads):
                raise DivergenceError(
                    f"non-finite PPO loss for {net.role}: " +
                    ", ".join(f"{k}={v:.4g}" for k, v in stats.items()))
            if net.trunk_frozen:
                grads = [np.zeros_like(g) if j < net.n_trunk_params else g for j, g in enumerate(grads)]
            grads, norm = clip_grad_norm(grads, config.max_grad_norm)
            optimizer.step(grads)
            stats["grad_norm"] = norm
            for k, v in stats.items():
                totals[k] = totals.get(k, 0.0) + v
            count += 1
    return net, {k: v / max(count, 1) for k, v in totals.items()}
