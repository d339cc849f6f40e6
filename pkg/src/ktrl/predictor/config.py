"""Configuration for the goal-conditioned motion predictor."""

from __future__ import annotations

from dataclasses import dataclass, replace


@dataclass(frozen=True)
class PredictorConfig:
    layers: int = 6
    heads: int = 8
    width: int = 512
    context: int = 16
    d_keypoints: int = 6
    goal_vocab: int = 20
    sigma: float = 0.005            # input keypoint noise, meters
    learning_rate: float = 1e-3
    lr_schedule: str = "cosine"     # "cosine" decays to 0, "constant" holds
    batch_size: int = 16
    steps: int = 2500
    pointnet_hidden: tuple[int, int] = (64, 128)
    points_per_object: int = 100

    def __post_init__(self):
        if self.width % self.heads != 0:
            raise ValueError(
                f"width {self.width} not divisible by heads {self.heads}")
        if self.context < 2:
            raise ValueError(f"context must be >= 2, got {self.context}")
        if self.d_keypoints < 1:
            raise ValueError("d_keypoints must be >= 1")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if self.lr_schedule not in ("cosine", "constant"):
            raise ValueError(f"unknown lr_schedule {self.lr_schedule!r}")


def paper_config(**overrides) -> PredictorConfig:
    return replace(PredictorConfig(), **overrides)


def desk_config(**overrides) -> PredictorConfig:
    """Small preset sized for single-core training runs."""
    base = PredictorConfig(layers=4, width=128, heads=8,
                           pointnet_hidden=(32, 32), steps=2500)
    return replace(base, **overrides)
