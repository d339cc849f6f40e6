"""Reward terms for prediction-tracking policy training.

The training signal rewards the policy for reaching the keypoint positions
the motion model predicts it will reach next, optionally mixed with the
sparse task reward and an energy penalty.
"""

from __future__ import annotations

import numpy as np

from .config import PPOConfig


def compute_tracking_reward(predicted, actual) -> float:
    """Negative squared Euclidean distance between keypoint sets.

    ``predicted`` is the motion model's next-frame keypoint estimate and
    ``actual`` the keypoints the robot then reached, both (K, 3).
    """
    p = np.asarray(predicted, dtype=float)
    a = np.asarray(actual, dtype=float)
    if p.shape != a.shape:
        raise ValueError(
            f"keypoint sets must match, got shapes {p.shape} and {a.shape}")
    d = p - a
    return -float(np.sum(d * d))


def compose_reward(r_track: float, r_task: float, energy: float,
                   cfg: PPOConfig) -> float:
    """r_track + lam * r_task - beta * energy."""
    return float(r_track + cfg.lam * r_task - cfg.beta * energy)


def step_energy(dpos: np.ndarray, drot: np.ndarray, dang: np.ndarray,
                dt: float) -> float:
    """Absolute sum of joint velocities over one control step.

    Computed from the clipped per-step deltas the environment actually
    applies, so the penalty matches the executed motion rather than the
    raw policy output.
    """
    total = (np.sum(np.abs(dpos)) + np.sum(np.abs(drot))
             + np.sum(np.abs(dang)))
    return float(total / dt)
