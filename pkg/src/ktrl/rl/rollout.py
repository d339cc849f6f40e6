"""Experience collection against vectorized environments.

Each control step feeds the motion model the robot's current keypoints
(mapped into the shared keypoint order) and scores the transition by how
closely the robot's next keypoints match the model's prediction.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..envs import VectorEnv, clip_action, privileged_obs, task_reward
from ..kinematics import map_keypoints
from ..nn.tensor import no_grad
from .config import PPOConfig
from .nets import (LOG_STD_MAX, LOG_STD_MIN, PolicyNet, ValueNet,
                   gaussian_log_prob)
from .rewards import compose_reward, compute_tracking_reward, step_energy

logger = logging.getLogger(__name__)


class SelfTrackingStub:
    """Prediction source that scores every transition as perfectly tracked.

    Stands in for the motion model when isolating the reward plumbing: the
    collector uses the keypoints the robot actually reached as their own
    targets, making the tracking term identically zero.
    """

    def reset(self, index: int, goal: int | None = None) -> None:
        pass


@dataclass
class RolloutBatch:
    """Fixed-horizon experience from N environments, time-major."""

    proprio: np.ndarray        # (T, B, dp)
    clouds: np.ndarray         # (T, B, P, 3)
    privileged: np.ndarray     # (T, B, nf)
    actions: np.ndarray        # (T, B, da)
    log_probs: np.ndarray      # (T, B)
    values: np.ndarray         # (T, B)
    r_track: np.ndarray        # (T, B)
    r_task: np.ndarray         # (T, B)
    energy: np.ndarray         # (T, B)
    rewards: np.ndarray        # (T, B) composed scalar training reward
    terminals: np.ndarray      # (T, B) episode boundary markers
    bootstrap: np.ndarray      # (B,) V(s_T) at truncation, 0 at terminals
    episode_successes: list[bool] = field(default_factory=list)
    episode_returns: list[float] = field(default_factory=list)
    faults: int = 0

    def __post_init__(self):
        tb = self.rewards.shape
        for name in ("proprio", "clouds", "privileged", "actions",
                     "log_probs", "values", "r_track", "r_task", "energy",
                     "terminals"):
            arr = getattr(self, name)
            if arr.shape[:2] != tb:
                raise ValueError(
                    f"{name} shape {arr.shape} does not align with "
                    f"rewards shape {tb}")
        if self.bootstrap.shape != (tb[1],):
            raise ValueError(
                f"bootstrap shape {self.bootstrap.shape} does not match "
                f"{tb[1]} environments")
        if not np.all(np.isfinite(self.rewards)):
            raise ValueError("rewards contain non-finite values")

    @property
    def n_steps(self) -> int:
        return self.rewards.shape[0]

    @property
    def n_envs(self) -> int:
        return self.rewards.shape[1]


def collect_rollouts(policy: PolicyNet, value_net: ValueNet, venv: VectorEnv,
                     predictor, cfg: PPOConfig, n_steps: int,
                     rng: np.random.Generator, *, obs=None, actor=None,
                     deterministic: bool = False,
                     literal_task_reward: bool = False,
                     task_reward_fn=None):
    """Step the batch for ``n_steps`` and return (RolloutBatch, next obs).

    ``predictor`` is a batched closed-loop prediction source (reset per
    environment with the episode goal, stepped once per control step) or a
    SelfTrackingStub.  ``obs`` carries observations across calls so episodes
    continue between iterations; None resets every environment.  ``actor``
    optionally overrides action selection with ``actor(i, env, state, obs)``
    for scripted diagnostics; log-probs still come from the policy.
    ``task_reward_fn(cfg, prev, state)`` replaces the sparse task reward,
    e.g. with the shaped variant for baseline comparisons.
    """
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    if task_reward_fn is None:
        def task_reward_fn(c, prev, state):
            return task_reward(c, prev, state, literal=literal_task_reward)
    envs = venv.envs
    B = len(envs)
    stub = isinstance(predictor, SelfTrackingStub)
    if obs is None:
        _, obs = venv.reset(rng.spawn(B))
        for i, ob in enumerate(obs):
            predictor.reset(i, goal=ob.goal)
    obs = list(obs)

    env_cfg = venv.cfg
    hand = envs[0].hand
    dp = obs[0].proprio.size
    da = venv.action_size
    nf = len(hand.fingers)
    P = obs[0].cloud.shape[0]

    batch_proprio = np.empty((n_steps, B, dp))
    batch_clouds = np.empty((n_steps, B, P, 3))
    batch_priv = np.empty((n_steps, B, nf))
    batch_actions = np.empty((n_steps, B, da))
    batch_logp = np.empty((n_steps, B))
    batch_values = np.empty((n_steps, B))
    batch_rtrack = np.zeros((n_steps, B))
    batch_rtask = np.empty((n_steps, B))
    batch_energy = np.empty((n_steps, B))
    batch_reward = np.empty((n_steps, B))
    batch_done = np.zeros((n_steps, B), dtype=bool)

    successes: list[bool] = []
    returns: list[float] = []
    running_return = [0.0] * B
    faults = 0
    clipped_ls = np.clip(policy.log_std.data, LOG_STD_MIN, LOG_STD_MAX)

    for t in range(n_steps):
        if not stub:
            mapped = [map_keypoints(hand, ob.keypoints) for ob in obs]
            preds = predictor.step(mapped, [ob.cloud for ob in obs])
        prev_states = [env.state for env in envs]
        actions = []
        for i, env in enumerate(envs):
            ob = obs[i]
            if actor is not None:
                action = np.asarray(actor(i, env, prev_states[i], ob), float)
                with no_grad():
                    mean = policy.mean_action(ob.proprio, ob.cloud).data
                logp = gaussian_log_prob(action, mean, clipped_ls)
            else:
                action, logp = policy.act(ob.proprio, ob.cloud, rng,
                                          deterministic=deterministic)
            batch_proprio[t, i] = ob.proprio
            batch_clouds[t, i] = ob.cloud
            batch_priv[t, i] = privileged_obs(prev_states[i])
            batch_actions[t, i] = action
            batch_logp[t, i] = logp
            batch_values[t, i] = value_net.predict(
                ob.proprio, ob.cloud, batch_priv[t, i])
            actions.append(action)

        new_states, new_obs, flags = venv.step(actions)
        for i, env in enumerate(envs):
            if flags[i].faulted:
                batch_energy[t, i] = 0.0   # rejected action moves nothing
            else:
                dpos, drot, dang = clip_action(env_cfg, hand.n_finger_dof,
                                               actions[i])
                batch_energy[t, i] = step_energy(dpos, drot, dang, env_cfg.dt)
            target = map_keypoints(hand, new_obs[i].keypoints)
            predicted = target if stub else preds[i]
            batch_rtrack[t, i] = compute_tracking_reward(predicted, target)
            batch_rtask[t, i] = task_reward_fn(env_cfg, prev_states[i],
                                               new_states[i])
            batch_reward[t, i] = compose_reward(
                batch_rtrack[t, i], batch_rtask[t, i], batch_energy[t, i],
                cfg)
            running_return[i] += batch_reward[t, i]
            if flags[i].done:
                batch_done[t, i] = True
                successes.append(bool(flags[i].success))
                returns.append(running_return[i])
                running_return[i] = 0.0
                if flags[i].faulted:
                    faults += 1
                    logger.warning(
                        "environment %d faulted at step %d; episode "
                        "terminated", i, t)
                _, fresh = venv.reset_one(i, rng.spawn(1)[0])
                predictor.reset(i, goal=fresh.goal)
                obs[i] = fresh
            else:
                obs[i] = new_obs[i]

    bootstrap = np.zeros(B)
    for i, env in enumerate(envs):
        if not batch_done[-1, i]:
            bootstrap[i] = value_net.predict(
                obs[i].proprio, obs[i].cloud, privileged_obs(env.state))

    batch = RolloutBatch(
        proprio=batch_proprio, clouds=batch_clouds, privileged=batch_priv,
        actions=batch_actions, log_probs=batch_logp, values=batch_values,
        r_track=batch_rtrack, r_task=batch_rtask, energy=batch_energy,
        rewards=batch_reward, terminals=batch_done, bootstrap=bootstrap,
        episode_successes=successes, episode_returns=returns, faults=faults)
    return batch, obs
