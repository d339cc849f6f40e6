"""Policy training loop: collect, update, adapt, stream metrics."""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..envs import ManipulationEnv, VectorEnv, dense_reward, task_reward
from ..nn.adam import Adam
from ..nn.checkpoint import load_checkpoint, save_checkpoint
from ..predictor import MotionPredictor
from ..predictor.closed_loop import BatchedClosedLoopPredictor
from ..seeding import make_rng
from .config import PPOConfig
from .nets import PolicyNet, ValueNet
from .ppo import adapt_lr, ppo_update
from .rollout import SelfTrackingStub, collect_rollouts

REWARD_MODES = ("tracking", "sparse", "dense")

# rng stream tags; predictor training uses 0..3 of its own seed
_POLICY_INIT, _VALUE_INIT, _ROLLOUT, _SHUFFLE, _EVAL = 10, 11, 12, 13, 20


@dataclass
class TrainResult:
    policy: PolicyNet
    value_net: ValueNet
    metrics: list[dict]


@dataclass
class EvalResult:
    successes: list[bool] = field(default_factory=list)
    returns: list[float] = field(default_factory=list)
    steps: list[int] = field(default_factory=list)

    @property
    def success_rate(self) -> float:
        return float(np.mean(self.successes)) if self.successes else 0.0


def _policy_dims(env_cfg) -> tuple[int, int, int]:
    probe = ManipulationEnv(env_cfg)
    hand = probe.hand
    return 7 + hand.n_finger_dof, 6 + hand.n_finger_dof, len(hand.fingers)


def train_policy(env_cfg, ppo_cfg: PPOConfig, *, predictor=None,
                 reward_mode: str = "tracking", seed: int = 0,
                 metrics_path=None, checkpoint_path=None,
                 checkpoint_every: int = 0, literal_task_reward: bool = False,
                 start_iteration: int = 0, initial_lr: float | None = None,
                 policy: PolicyNet | None = None,
                 value_net: ValueNet | None = None,
                 on_iteration=None) -> TrainResult:
    """Train a policy with prediction-tracking reward (or a baseline reward).

    ``reward_mode`` selects the training signal: "tracking" scores motion
    against the closed-loop predictions of ``predictor`` plus the mixed-in
    sparse task reward, "sparse" drops the tracking term, and "dense" swaps
    the sparse task term for the shaped reward.  Metrics are appended to
    ``metrics_path`` as one JSON record per line.  ``start_iteration``,
    ``initial_lr`` and pre-built networks allow resuming from a checkpoint;
    per-iteration rng streams are derived from (seed, iteration) so a full
    rerun with the same config reproduces the metrics exactly.
    """
    if reward_mode not in REWARD_MODES:
        raise ValueError(
            f"unknown reward_mode {reward_mode!r}; choose from {REWARD_MODES}")
    if reward_mode == "tracking" and predictor is None:
        raise ValueError("tracking reward mode needs a motion predictor")

    proprio_dim, action_dim, priv_dim = _policy_dims(env_cfg)
    if policy is None:
        policy = PolicyNet(proprio_dim, action_dim,
                           make_rng(seed, _POLICY_INIT))
    if value_net is None:
        value_net = ValueNet(proprio_dim, priv_dim,
                             make_rng(seed, _VALUE_INIT))

    venv = VectorEnv(env_cfg, ppo_cfg.n_envs)
    if reward_mode == "tracking":
        stream = BatchedClosedLoopPredictor(predictor, [0] * ppo_cfg.n_envs)
    else:
        stream = SelfTrackingStub()
    task_fn = None
    if reward_mode == "dense":
        def task_fn(cfg, prev, state):
            return dense_reward(cfg, prev, state)

    lr = ppo_cfg.lr if initial_lr is None else float(initial_lr)
    policy_opt = Adam(policy.parameters(), lr=lr)
    value_opt = Adam(value_net.parameters(), lr=lr)
    recent = deque(maxlen=ppo_cfg.trailing_episodes)

    metrics_file = None
    if metrics_path is not None:
        mode = "a" if start_iteration > 0 else "w"
        metrics_file = open(Path(metrics_path), mode, encoding="utf-8")

    metrics: list[dict] = []
    obs = None
    try:
        for it in range(start_iteration, ppo_cfg.iterations):
            policy_opt.lr = lr
            value_opt.lr = lr
            batch, obs = collect_rollouts(
                policy, value_net, venv, stream, ppo_cfg, ppo_cfg.horizon,
                make_rng(seed, _ROLLOUT, it), obs=obs,
                literal_task_reward=literal_task_reward,
                task_reward_fn=task_fn)
            update = ppo_update(policy, value_net, batch, ppo_cfg,
                                policy_opt, value_opt,
                                make_rng(seed, _SHUFFLE, it))
            recent.extend(batch.episode_successes)
            record = {
                "iteration": it,
                "success_rate": float(np.mean(recent)) if recent else 0.0,
                "episodes": len(batch.episode_successes),
                "reward": float(batch.rewards.mean()),
                "r_track": float(batch.r_track.mean()),
                "r_task": float(batch.r_task.mean()),
                "energy": float(batch.energy.mean()),
                "kl": update["kl"],
                "lr": float(policy_opt.lr),
                "clip_fraction": update["clip_fraction"],
                "policy_loss": update["policy_loss"],
                "value_loss": update["value_loss"],
                "entropy": update["entropy"],
                "skipped": update["skipped"],
                "faults": batch.faults,
            }
            metrics.append(record)
            if metrics_file is not None:
                metrics_file.write(json.dumps(record) + "\n")
                metrics_file.flush()
            if update["skipped"]:
                lr = policy_opt.lr
            else:
                lr = adapt_lr(update["kl"], lr, ppo_cfg, action_dim)
            if checkpoint_path is not None and (
                    it + 1 == ppo_cfg.iterations
                    or (checkpoint_every and (it + 1) % checkpoint_every == 0)):
                save_policy_checkpoint(checkpoint_path, policy, value_net,
                                       iteration=it + 1, lr=lr)
            if on_iteration is not None:
                on_iteration(it, record, policy, value_net)
    finally:
        if metrics_file is not None:
            metrics_file.close()
    return TrainResult(policy, value_net, metrics)


def evaluate_policy(policy: PolicyNet, env_cfg, n_episodes: int,
                    seed: int = 0, *, deterministic: bool = True) -> EvalResult:
    """Roll out full episodes and record success flags per episode.

    Deterministic mode takes the mean action; otherwise actions are sampled
    from per-episode rng streams derived from the seed.
    """
    if n_episodes < 1:
        raise ValueError(f"n_episodes must be >= 1, got {n_episodes}")
    env = ManipulationEnv(env_cfg)
    result = EvalResult()
    for ep in range(n_episodes):
        state, ob = env.reset(make_rng(seed, _EVAL, ep, 0))
        act_rng = make_rng(seed, _EVAL, ep, 1)
        total = 0.0
        while not state.done:
            action, _ = policy.act(ob.proprio, ob.cloud, act_rng,
                                   deterministic=deterministic)
            prev = state
            state, ob, _ = env.step(action)
            total += task_reward(env_cfg, prev, state)
        result.successes.append(bool(state.success))
        result.returns.append(total)
        result.steps.append(state.step_count)
    return result


def save_policy_checkpoint(path, policy: PolicyNet, value_net: ValueNet, *,
                           iteration: int = 0, lr: float = 0.0) -> None:
    arrays = {f"policy/{k}": v.data for k, v in policy.parameters().items()}
    arrays.update(
        {f"value/{k}": v.data for k, v in value_net.parameters().items()})
    arrays["meta/dims"] = np.array(
        [policy.proprio_dim, policy.action_dim, value_net.privileged_dim],
        dtype=np.int64)
    arrays["meta/progress"] = np.array([float(iteration), float(lr)])
    save_checkpoint(path, arrays)


def load_policy_checkpoint(path) -> tuple[PolicyNet, ValueNet, dict]:
    """Rebuild networks (default widths) from a checkpoint.

    Returns (policy, value_net, meta) where meta holds "iteration" and "lr".
    """
    state = load_checkpoint(path)
    dims = state["meta/dims"]
    proprio_dim, action_dim, priv_dim = (int(x) for x in dims)
    policy = PolicyNet(proprio_dim, action_dim, make_rng(0, 0))
    value_net = ValueNet(proprio_dim, priv_dim, make_rng(0, 0))
    policy.load_state(state, prefix="policy/")
    value_net.load_state(state, prefix="value/")
    progress = state["meta/progress"]
    return policy, value_net, {"iteration": int(progress[0]),
                               "lr": float(progress[1])}
