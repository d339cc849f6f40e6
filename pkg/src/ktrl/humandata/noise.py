"""Training-time Gaussian augmentation for input keypoints."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class NoiseConfig:
    sigma: float = 0.005      # meters
    seed: int = 0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")


def add_input_noise(window: np.ndarray, sigma: float,
                    rng: np.random.Generator) -> np.ndarray:
    """i.i.d. zero-mean offsets on every coordinate; sigma=0 is the identity.

    Only ever applied to model inputs; prediction targets are read straight
    from the un-noised record.
    """
    window = np.asarray(window, dtype=float)
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return window.copy()
    return window + rng.normal(0.0, sigma, size=window.shape)
