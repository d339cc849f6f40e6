"""Demonstration-guided policy optimization.

Retargeted human demonstrations enter the PPO update as extra state-action
pairs carrying a fixed positive advantage, annealed per iteration, so early
training imitates the demos while later training is dominated by the
on-policy objective. The demo term maximizes the same clipped importance
ratio as the surrogate, evaluated on demo actions.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..nn import ops
from ..nn.adam import Adam, NonFiniteGradientError
from ..nn.tensor import no_grad
from ..rl.config import PPOConfig
from ..rl.nets import PolicyNet, ValueNet
from ..rl.ppo import batch_advantages, clipped_surrogate
from ..rl.gae import normalize_advantages
from ..rl.rollout import RolloutBatch
from .retarget import RetargetedTrajectory

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DemoGuidedConfig:
    a_demo: float = 2.0        # fixed advantage assigned to demo actions
    decay: float = 0.995       # per-iteration anneal of the demo advantage
    demo_minibatch: int = 64

    def __post_init__(self):
        if self.a_demo < 0.0:
            raise ValueError(f"a_demo must be >= 0, got {self.a_demo}")
        if not 0.0 < self.decay <= 1.0:
            raise ValueError(f"decay must be in (0, 1], got {self.decay}")

    def weight(self, iteration: int) -> float:
        return self.a_demo * self.decay ** iteration


@dataclass
class DemoSet:
    """Flattened demo state-action pairs in policy input layout."""

    proprio: np.ndarray   # (N, 7 + n_finger_dof) wrist pose plus angles
    clouds: np.ndarray    # (N, P, 3)
    actions: np.ndarray   # (N, 6 + n_finger_dof)

    def __post_init__(self):
        self.proprio = np.asarray(self.proprio, dtype=float)
        self.clouds = np.asarray(self.clouds, dtype=float)
        self.actions = np.asarray(self.actions, dtype=float)
        n = len(self.proprio)
        if n == 0:
            raise ValueError("demo set is empty")
        if len(self.clouds) != n or len(self.actions) != n:
            raise ValueError("proprio, clouds, and actions must align")

    def __len__(self) -> int:
        return len(self.proprio)


def assemble_demo_set(trajectories: list[RetargetedTrajectory],
                      records) -> DemoSet:
    """Pair retargeted joints/actions with the source recording's clouds.

    Sample t holds the joint vector and cloud at frame t with the action
    leading to frame t+1. All records must share one cloud size so the
    samples stack into a single array.
    """
    records = list(records)
    proprio, clouds, actions = [], [], []
    n_points = None
    for traj in trajectories:
        record = records[traj.source_index]
        scene = np.asarray(record.clouds, dtype=float)
        if n_points is None:
            n_points = scene.shape[1]
        elif scene.shape[1] != n_points:
            raise ValueError(
                f"record {traj.source_index} has {scene.shape[1]} cloud "
                f"points where earlier records had {n_points}; "
                "demo sets need a uniform cloud size")
        for t in range(traj.n_frames - 1):
            proprio.append(traj.joints[t].as_vector())
            clouds.append(scene[t])
            actions.append(traj.actions[t])
    if not proprio:
        raise ValueError("no demo transitions: all trajectories were empty")
    return DemoSet(np.stack(proprio), np.stack(clouds), np.stack(actions))


def demo_guided_update(policy: PolicyNet, value_net: ValueNet,
                       batch: RolloutBatch, demos: DemoSet, cfg: PPOConfig,
                       dg_cfg: DemoGuidedConfig, policy_opt: Adam,
                       value_opt: Adam, rng: np.random.Generator, *,
                       iteration: int = 0) -> dict:
    """One PPO update with an annealed demonstration term.

    Identical to the plain update except each minibatch adds
    -mean(min(rho*w, clip(rho)*w)) over sampled demo actions, where rho is
    the importance ratio against the policy at call start and w is the
    annealed demo advantage. At w = 0 the term (and its rng draws) is
    skipped entirely, so the update is bit-identical to the plain one.
    """
    weight = dg_cfg.weight(iteration)
    demo_logp_old = None
    if weight > 0.0:
        with no_grad():
            demo_logp_old, _ = policy.evaluate(demos.proprio, demos.clouds,
                                               demos.actions)
            demo_logp_old = demo_logp_old.data.copy()

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
            if weight > 0.0:
                d_idx = rng.integers(0, len(demos), dg_cfg.demo_minibatch)
                demo_logp, _ = policy.evaluate(
                    demos.proprio[d_idx], demos.clouds[d_idx],
                    demos.actions[d_idx])
                demo_ratio = ops.exp(
                    ops.sub(demo_logp, demo_logp_old[d_idx]))
                demo_loss, _ = clipped_surrogate(
                    demo_ratio, np.full(len(d_idx), weight), cfg.clip_eps)
                total = ops.add(total, demo_loss)
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
        "demo_weight": weight,
    }
