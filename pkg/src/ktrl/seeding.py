"""Deterministic RNG derivation.

Every stochastic component takes an explicit ``numpy.random.Generator``.
Generators are derived from a root seed plus integer tags so that adding a new
consumer never shifts the streams of existing ones.
"""

from __future__ import annotations

import numpy as np


def make_rng(seed: int, *tags: int) -> np.random.Generator:
    """Derive an independent generator from ``seed`` and a tag path."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((int(seed), *map(int, tags)))))
