"""Policy optimization against motion-prediction tracking rewards."""

from .config import PPOConfig
from .gae import gae, normalize_advantages
from .nets import (LOG_STD_MAX, LOG_STD_MIN, PolicyNet, ValueNet,
                   gaussian_log_prob)
from .ppo import adapt_lr, batch_advantages, clipped_surrogate, ppo_update
from .rewards import compose_reward, compute_tracking_reward, step_energy
from .rollout import RolloutBatch, SelfTrackingStub, collect_rollouts
from .trainer import (REWARD_MODES, EvalResult, TrainResult, evaluate_policy,
                      load_policy_checkpoint, save_policy_checkpoint,
                      train_policy)

__all__ = [
    "LOG_STD_MAX",
    "LOG_STD_MIN",
    "PPOConfig",
    "PolicyNet",
    "ValueNet",
    "RolloutBatch",
    "SelfTrackingStub",
    "REWARD_MODES",
    "EvalResult",
    "TrainResult",
    "adapt_lr",
    "batch_advantages",
    "clipped_surrogate",
    "collect_rollouts",
    "compose_reward",
    "compute_tracking_reward",
    "evaluate_policy",
    "gae",
    "gaussian_log_prob",
    "load_policy_checkpoint",
    "normalize_advantages",
    "ppo_update",
    "save_policy_checkpoint",
    "step_energy",
    "train_policy",
]
