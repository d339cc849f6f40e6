"""Clipped-surrogate policy optimization on collected rollouts."""

from __future__ import annotations

import logging

import numpy as np

from ..nn import ops
from ..nn.adam import Adam, NonFiniteGradientError
from ..nn.tensor import Tensor
from .config import PPOConfig
from .gae import gae, normalize_advantages
from .nets import PolicyNet, ValueNet
from .rollout import RolloutBatch

logger = logging.getLogger(__name__)


def clipped_surrogate(ratio: Tensor, advantages: np.ndarray,
                      clip_eps: float) -> tuple[Tensor, float]:
    """Negated clipped PPO objective and the fraction of clipped ratios.

    loss = -mean(min(ratio * A, clip(ratio, 1-eps, 1+eps) * A))
    """
    raw = ops.mul(ratio, advantages)
    clamped = ops.mul(ops.clip(ratio, 1.0 - clip_eps, 1.0 + clip_eps),
                      advantages)
    loss = ops.neg(ops.mean(ops.minimum(raw, clamped)))
    clip_fraction = float(np.mean(np.abs(ratio.data - 1.0) > clip_eps))
    return loss, clip_fraction


def batch_advantages(batch: RolloutBatch,
                     cfg: PPOConfig) -> tuple[np.ndarray, np.ndarray]:
    """Per-environment GAE over the time axis; returns (advantages, returns)
    shaped like batch.rewards."""
    adv = np.empty_like(batch.rewards)
    ret = np.empty_like(batch.rewards)
    for i in range(batch.n_envs):
        adv[:, i], ret[:, i] = gae(
            batch.rewards[:, i], batch.values[:, i], batch.terminals[:, i],
            cfg.gamma, cfg.gae_lambda, bootstrap=batch.bootstrap[i])
    return adv, ret


def ppo_update(policy: PolicyNet, value_net: ValueNet, batch: RolloutBatch,
               cfg: PPOConfig, policy_opt: Adam, value_opt: Adam,
               rng: np.random.Generator) -> dict:
    """Run epochs of minibatch updates on one batch; returns metrics.

    Advantages are normalized to mean 0, std 1 over the whole batch before
    any update.  A non-finite loss or gradient skips the rest of the
    iteration and halves both learning rates.  The KL estimate is
    mean(ratio - 1 - ln ratio), which is nonnegative by construction.
    """
    advantages, returns = batch_advantages(batch, cfg)
    T, B = batch.rewards.shape
    M = T * B
    flat_adv = normalize_advantages(advantages.reshape(M))
    flat_ret = returns.reshape(M)
    flat_logp = batch.log_probs.reshape(M)
    flat_proprio = batch.proprio.reshape(M, -1)
    flat_clouds = batch.clouds.reshape(M, *batch.clouds.shape[2:])
    flat_priv = batch.privileged.reshape(M, -1)
    flat_actions = batch.actions.reshape(M, -1)

    policy_losses, value_losses, entropies, kls, clip_fracs = [], [], [], [], []
    skipped = False
    for _ in range(cfg.epochs):
        perm = rng.permutation(M)
        for start in range(0, M, cfg.minibatch_size):
            idx = perm[start:start + cfg.minibatch_size]
            logp_new, entropy = policy.evaluate(
                flat_proprio[idx], flat_clouds[idx], flat_actions[idx])
            ratio = ops.exp(ops.sub(logp_new, flat_logp[idx]))
            surrogate, clip_frac = clipped_surrogate(
                ratio, flat_adv[idx], cfg.clip_eps)
            value = value_net.forward(
                flat_proprio[idx], flat_clouds[idx], flat_priv[idx])
            value_loss = ops.mse_loss(value, flat_ret[idx])
            total = ops.add(surrogate, ops.mul(value_loss, cfg.value_coef))
            total = ops.sub(total, ops.mul(entropy, cfg.entropy_coef))
            if not np.isfinite(total.data):
                skipped = True
            else:
                policy.zero_grad()
                value_net.zero_grad()
                total.backward()
                try:
                    policy_opt.step()
                    value_opt.step()
                except NonFiniteGradientError:
                    skipped = True
            if skipped:
                policy_opt.lr *= 0.5
                value_opt.lr *= 0.5
                logger.warning(
                    "non-finite loss or gradient; iteration skipped and "
                    "learning rate halved to %.3g", policy_opt.lr)
                break
            policy.project_log_std()
            with np.errstate(over="ignore"):
                r = ratio.data
                kls.append(float(np.mean(r - 1.0 - np.log(r))))
            policy_losses.append(float(surrogate.data))
            value_losses.append(float(value_loss.data))
            entropies.append(float(entropy.data))
            clip_fracs.append(clip_frac)
        if skipped:
            break

    def _mean(xs):
        return float(np.mean(xs)) if xs else 0.0

    return {
        "policy_loss": _mean(policy_losses),
        "value_loss": _mean(value_losses),
        "entropy": _mean(entropies),
        "kl": _mean(kls),
        "clip_fraction": _mean(clip_fracs),
        "lr": policy_opt.lr,
        "updates": len(policy_losses),
        "skipped": skipped,
    }


def adapt_lr(kl: float, lr: float, cfg: PPOConfig, action_dim: int) -> float:
    """KL-banded learning-rate adaptation.

    Grows the rate by 1.5x when the update barely moved the policy
    (KL < target/2), shrinks it by 1.5x when it moved too far
    (KL > 2*target), and clamps to [lr_min, max_lr(action_dim)].
    """
    if not np.isfinite(kl) or kl < 0.0:
        raise ValueError(f"mean KL must be finite and >= 0, got {kl}")
    if kl < cfg.target_kl / 2.0:
        lr = lr * 1.5
    elif kl > 2.0 * cfg.target_kl:
        lr = lr / 1.5
    return float(min(max(lr, cfg.lr_min), cfg.max_lr(action_dim)))
