"""Keypoint-distribution matching: reward the policy for fooling a classifier.

A small MLP discriminator scores short windows of consecutive mapped
keypoint frames, trained to tell human demonstrations (label 1) from policy
rollouts (label 0). The policy receives the confident-human score as a
bounded reward, so motions that look like the dataset score high even when
the task reward is silent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..nn import ops
from ..nn.adam import Adam
from ..nn.layers import Mlp, Module
from ..nn.tensor import Tensor, no_grad


@dataclass(frozen=True)
class DiscriminatorConfig:
    window: int = 2            # consecutive keypoint frames per sample
    d_keypoints: int = 6
    hidden: tuple[int, ...] = (64, 64)
    r_max: float = 5.0         # reward clamp
    logit_reg: float = 0.01    # weight on mean squared logit
    learning_rate: float = 1e-3
    batch_size: int = 64
    steps: int = 200

    def __post_init__(self):
        if self.window < 1:
            raise ValueError(f"window must be >= 1, got {self.window}")
        if self.r_max <= 0.0:
            raise ValueError(f"r_max must be positive, got {self.r_max}")
        if self.batch_size < 2 or self.batch_size % 2:
            raise ValueError(
                f"batch_size must be even and >= 2, got {self.batch_size}")

    @property
    def input_width(self) -> int:
        return self.window * 3 * self.d_keypoints


class Discriminator(Module):
    """MLP over a flattened window of keypoint frames; scalar logit out."""

    def __init__(self, cfg: DiscriminatorConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.mlp = Mlp([cfg.input_width, *cfg.hidden, 1], rng, out_scale=0.01)

    def logits(self, windows: np.ndarray) -> Tensor:
        windows = np.asarray(windows, dtype=float)
        if windows.ndim == 1:
            windows = windows[None, :]
        if windows.shape[-1] != self.cfg.input_width:
            raise ValueError(
                f"window width {windows.shape[-1]} != "
                f"{self.cfg.window}*3*{self.cfg.d_keypoints}"
                f" = {self.cfg.input_width}")
        out = self.mlp(windows)
        return ops.reshape(out, out.data.shape[:-1])

    def score(self, window: np.ndarray) -> float:
        """Logit for a single window, outside the autodiff graph."""
        with no_grad():
            return float(self.logits(np.reshape(window, -1)).data[0])


def make_windows(keypoints: np.ndarray, window: int) -> np.ndarray:
    """Flatten a (T, d, 3) keypoint sequence into (T-W+1, W*3*d) windows."""
    frames = np.asarray(keypoints, dtype=float)
    n = frames.shape[0] - window + 1
    if n < 1:
        raise ValueError(
            f"sequence of {frames.shape[0]} frames too short for "
            f"window {window}")
    flat = frames.reshape(frames.shape[0], -1)
    return np.stack([flat[i:i + window].ravel() for i in range(n)])


def adversarial_reward(window: np.ndarray, disc: Discriminator) -> float:
    """-log(1 - sigmoid(logit)), clamped to [0, r_max].

    Equal to softplus(logit): zero when the discriminator is sure the
    window came from the policy, capped once it is confidently human.
    """
    logit = disc.score(window)
    return float(min(np.logaddexp(0.0, logit), disc.cfg.r_max))


def train_discriminator(policy_windows: np.ndarray,
                        dataset_windows: np.ndarray, disc: Discriminator,
                        rng: np.random.Generator,
                        steps: int | None = None) -> dict:
    """Fit the discriminator on balanced half-human half-policy minibatches.

    Minimizes binary cross-entropy (human label 1, policy label 0) plus
    ``logit_reg`` times the mean squared logit, which keeps scores small
    where the two distributions overlap. Returns final loss and whole-set
    accuracy.
    """
    policy_windows = np.asarray(policy_windows, dtype=float)
    dataset_windows = np.asarray(dataset_windows, dtype=float)
    if len(policy_windows) == 0 or len(dataset_windows) == 0:
        raise ValueError("both window sources must be nonempty")
    cfg = disc.cfg
    steps = cfg.steps if steps is None else steps
    half = cfg.batch_size // 2
    labels = np.concatenate([np.ones(half), np.zeros(half)])
    opt = Adam(disc.parameters(), lr=cfg.learning_rate)
    loss_value = float("nan")
    for _ in range(steps):
        real = dataset_windows[rng.integers(0, len(dataset_windows), half)]
        fake = policy_windows[rng.integers(0, len(policy_windows), half)]
        logits = disc.logits(np.concatenate([real, fake]))
        loss = ops.add(
            ops.bce_with_logits(logits, labels),
            ops.mul(ops.mean(ops.mul(logits, logits)), cfg.logit_reg))
        disc.zero_grad()
        loss.backward()
        opt.step()
        loss_value = float(loss.data)

    with no_grad():
        human_logits = disc.logits(dataset_windows).data
        policy_logits = disc.logits(policy_windows).data
    correct = float(np.sum(human_logits > 0.0) + np.sum(policy_logits <= 0.0))
    accuracy = correct / (len(dataset_windows) + len(policy_windows))
    return {"loss": loss_value, "accuracy": accuracy, "steps": steps}
