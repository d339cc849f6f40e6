"""Generalized advantage estimation."""

from __future__ import annotations

import numpy as np


def gae(rewards, values, terminals, gamma: float, lam: float,
        bootstrap: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Backward-recursive advantages and returns for one rollout stream.

    delta_t = r_t + gamma * V_{t+1} * (1 - done_t) - V_t
    A_t     = delta_t + gamma * lam * (1 - done_t) * A_{t+1}
    returns = A + V

    ``terminals[t]`` marks the last step of an episode; the value beyond it
    is masked out, so a true terminal bootstraps 0.  ``bootstrap`` is
    V(s_{T}) for a stream cut off mid-episode (ignored when the final step
    is terminal).
    """
    r = np.asarray(rewards, dtype=float)
    v = np.asarray(values, dtype=float)
    d = np.asarray(terminals, dtype=bool)
    if not (r.shape == v.shape == d.shape):
        raise ValueError(
            f"rewards, values and terminals must align, got shapes "
            f"{r.shape}, {v.shape}, {d.shape}")
    if r.ndim != 1:
        raise ValueError(f"expected 1-D sequences, got {r.ndim}-D")
    advantages = np.empty_like(r)
    next_value = float(bootstrap)
    acc = 0.0
    for t in range(r.size - 1, -1, -1):
        mask = 0.0 if d[t] else 1.0
        delta = r[t] + gamma * next_value * mask - v[t]
        acc = delta + gamma * lam * mask * acc
        advantages[t] = acc
        next_value = v[t]
    return advantages, advantages + v


def normalize_advantages(advantages: np.ndarray) -> np.ndarray:
    """Shift and scale to mean 0, std 1 over the whole batch."""
    a = np.asarray(advantages, dtype=float)
    return (a - a.mean()) / (a.std() + 1e-8)
