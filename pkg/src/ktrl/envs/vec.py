"""Vectorized environment batch with sequential-equivalent stepping."""

from __future__ import annotations

import numpy as np

from .config import EnvConfig
from .core import DoneFlags, EnvState, ManipulationEnv, Observation


class VectorEnv:
    """N independent environments stepped in index order.

    Stepping is a plain loop (no shared state, no stacked math), which is
    what makes batch stepping bit-identical to stepping each environment
    on its own.
    """

    def __init__(self, cfg: EnvConfig, n_envs: int):
        if n_envs < 1:
            raise ValueError("n_envs must be >= 1")
        self.cfg = cfg
        self.envs = [ManipulationEnv(cfg) for _ in range(n_envs)]

    def __len__(self) -> int:
        return len(self.envs)

    @property
    def action_size(self) -> int:
        return self.envs[0].action_size

    def reset(self, rngs) -> tuple[list[EnvState], list[Observation]]:
        if len(rngs) != len(self.envs):
            raise ValueError(
                f"need {len(self.envs)} generators, got {len(rngs)}")
        out = [env.reset(rng) for env, rng in zip(self.envs, rngs)]
        return [s for s, _ in out], [o for _, o in out]

    def reset_one(self, index: int,
                  rng: np.random.Generator) -> tuple[EnvState, Observation]:
        return self.envs[index].reset(rng)

    def step(self, actions) -> tuple[list[EnvState], list[Observation],
                                     list[DoneFlags]]:
        if len(actions) != len(self.envs):
            raise ValueError(
                f"need {len(self.envs)} actions, got {len(actions)}")
        states, obs, flags = [], [], []
        for env, action in zip(self.envs, actions):
            s, o, f = env.step(action)
            states.append(s)
            obs.append(o)
            flags.append(f)
        return states, obs, flags
