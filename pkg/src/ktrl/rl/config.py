"""Hyperparameters for tracking-reward policy optimization."""

from __future__ import annotations

from dataclasses import dataclass, fields


@dataclass(frozen=True)
class PPOConfig:
    """Clipped-surrogate policy optimization settings.

    ``lam`` mixes the sparse task reward into the tracking reward and
    ``beta`` scales the energy penalty; both are fixed across tasks.  The
    KL-adaptive learning rate is clamped to ``[lr_min, max_lr(action_dim)]``
    where the ceiling shrinks inversely with the action dimension, because
    the KL between successive Gaussian updates grows with the number of
    action coordinates.
    """

    clip_eps: float = 0.2
    gamma: float = 0.99
    gae_lambda: float = 0.95
    epochs: int = 4
    minibatch_size: int = 256
    entropy_coef: float = 0.001
    value_coef: float = 0.5
    target_kl: float = 0.01
    lr: float = 3e-4               # initial learning rate
    lr_min: float = 1e-5
    lr_max_scale: float = 6e-3     # max LR = lr_max_scale / action_dim
    lam: float = 10.0              # task reward mix-in
    beta: float = 0.001            # energy penalty
    n_envs: int = 8
    horizon: int = 128             # steps per env per iteration
    iterations: int = 200
    trailing_episodes: int = 100   # window for the reported success rate

    def __post_init__(self):
        if not 0.0 < self.clip_eps < 1.0:
            raise ValueError(f"clip_eps must be in (0, 1), got {self.clip_eps}")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"gamma must be in (0, 1], got {self.gamma}")
        if not 0.0 < self.gae_lambda <= 1.0:
            raise ValueError(
                f"gae_lambda must be in (0, 1], got {self.gae_lambda}")
        for name in ("epochs", "minibatch_size", "n_envs", "horizon",
                     "iterations", "trailing_episodes"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        for name in ("lr", "lr_min", "lr_max_scale", "target_kl"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("entropy_coef", "value_coef", "beta"):
            if getattr(self, name) < 0.0:
                raise ValueError(
                    f"{name} must be non-negative, got {getattr(self, name)}")

    @property
    def steps_per_iteration(self) -> int:
        return self.n_envs * self.horizon

    def max_lr(self, action_dim: int) -> float:
        """Learning-rate ceiling for a hand with ``action_dim`` controls."""
        if action_dim < 1:
            raise ValueError(f"action_dim must be >= 1, got {action_dim}")
        return self.lr_max_scale / action_dim

    @classmethod
    def from_dict(cls, raw: dict) -> "PPOConfig":
        valid = {f.name for f in fields(cls)}
        unknown = set(raw) - valid
        if unknown:
            raise ValueError(
                f"unknown PPOConfig fields {sorted(unknown)}; "
                f"valid fields are {sorted(valid)}")
        return cls(**raw)
