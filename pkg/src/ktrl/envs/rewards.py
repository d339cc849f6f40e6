"""Task rewards, dense-shaping rewards, success tests, critic features.

All functions are pure in (config, previous state, next state) so logged
reward terms can be recomposed exactly from dumped trajectories.
"""

from __future__ import annotations

import numpy as np

from .config import EnvConfig
from .core import EnvState


def goal_point(cfg: EnvConfig, state: EnvState) -> np.ndarray:
    """Where the target object is supposed to go."""
    if cfg.task == "lift_throw":
        cx, cy = cfg.receptacle_center
        return np.array([cx, cy, -cfg.receptacle_size / 2])
    t = state.target_position
    return np.array([t[0], t[1], cfg.goal_height])


def _goal_distance(cfg: EnvConfig, state: EnvState) -> float:
    if cfg.task == "lift_throw":
        return float(np.linalg.norm(state.target_position
                                    - goal_point(cfg, state)))
    return abs(float(state.target_position[2]) - cfg.goal_height)


def task_reward(cfg: EnvConfig, prev: EnvState, state: EnvState, *,
                literal: bool = False) -> float:
    """Sparse task reward.

    Lift/Throw: progress toward the goal, gated on the object being held
    above the lift threshold. `literal` flips the progress sign to the
    printed form (distance increase) kept for audit. Cabinet: drawer
    extension, boosted past the open limit. A success bonus fires once.
    """
    if prev.done:
        return 0.0
    if cfg.task == "open_cabinet":
        boosted = 1.0 + cfg.cabinet_bonus * (state.drawer_x >= cfg.drawer_limit)
        r = state.drawer_x * boosted
    else:
        progress = _goal_distance(cfg, prev) - _goal_distance(cfg, state)
        if literal:
            progress = -progress
        gate = float(state.target_position[2]) > cfg.lift_threshold
        r = float(gate) * max(progress, 0.0)
    if state.success and not prev.success:
        r += cfg.success_bonus
    return float(r)


def _hand_object_distance(state: EnvState) -> float:
    tips = state.keypoints[1:]
    return float(np.linalg.norm(tips - state.target_position, axis=1).mean())


def dense_reward(cfg: EnvConfig, prev: EnvState, state: EnvState) -> float:
    """Shaped reward: approach + first-lift bonus + gated goal progress +
    success bonus, with weights from the config."""
    if prev.done:
        return 0.0
    r = cfg.w_approach * (_hand_object_distance(prev)
                          - _hand_object_distance(state))
    if state.lifted_ever and not prev.lifted_ever:
        r += cfg.w_lift_bonus
    if state.lifted_ever:
        r += cfg.w_goal_progress * (_goal_distance(cfg, prev)
                                    - _goal_distance(cfg, state))
    if state.success and not prev.success:
        r += cfg.w_success
    return float(r)


def privileged_obs(state: EnvState) -> np.ndarray:
    """Per-fingertip Euclidean distance to the target's center of mass."""
    tips = state.keypoints[1:]
    return np.linalg.norm(tips - state.target_position, axis=1)


def success_check(cfg: EnvConfig, state: EnvState) -> bool:
    """Instantaneous success test against the state's own timers."""
    if cfg.task in ("grasp_lift", "grasp_lift_clutter"):
        return state.hold_steps >= cfg.hold_steps_required
    if cfg.task == "lift_throw":
        t = state.target_position
        cx, cy = cfg.receptacle_center
        r = cfg.receptacle_size / 2
        at_rest = (state.attached != state.target_index
                   and state.object_vz[state.target_index] == 0.0)
        return (at_rest and abs(t[0] - cx) < r and abs(t[1] - cy) < r
                and t[2] < 0.0)
    return state.drawer_x >= cfg.drawer_limit
