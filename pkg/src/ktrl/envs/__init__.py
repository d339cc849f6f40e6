"""Manipulation tasks: quasi-static grasping environments and rewards."""

from .config import TASKS, EnvConfig
from .core import (
    DoneFlags,
    EnvState,
    ManipulationEnv,
    Observation,
    clip_action,
    support_height,
)
from .oracle import ScriptedOracle, oracle_success_rate, run_oracle_episode
from .rewards import (
    dense_reward,
    goal_point,
    privileged_obs,
    success_check,
    task_reward,
)
from .trajectory import read_trajectory, step_record, write_trajectory
from .vec import VectorEnv

__all__ = [
    "TASKS",
    "EnvConfig",
    "DoneFlags",
    "EnvState",
    "ManipulationEnv",
    "Observation",
    "clip_action",
    "support_height",
    "ScriptedOracle",
    "oracle_success_rate",
    "run_oracle_episode",
    "dense_reward",
    "goal_point",
    "privileged_obs",
    "success_check",
    "task_reward",
    "read_trajectory",
    "step_record",
    "write_trajectory",
    "VectorEnv",
]
