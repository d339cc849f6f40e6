"""Scripted policies certifying each task is solvable before any learning.

Reach above the target, curl the fingers until the opposition rule attaches
it, then do the task-specific transport (hold at height, drop in the bin,
or pull the drawer). Actions rely on the environment's own per-step clips,
so the scripts emit raw errors and let the env bound them.
"""

from __future__ import annotations

import numpy as np

from .core import EnvState, ManipulationEnv


class ScriptedOracle:
    hover_clearance = 0.065   # wrist height above the target center, m
    close_rate = 0.08         # rad per step while curling
    carry_height = 0.25       # transport altitude for the throw task, m

    def __init__(self, env: ManipulationEnv):
        self.env = env

    def act(self, state: EnvState) -> np.ndarray:
        task = self.env.cfg.task
        if task == "open_cabinet":
            return self._act_cabinet(state)
        if task == "lift_throw":
            return self._act_throw(state)
        return self._act_lift(state)

    # ------------------------------------------------------------ parts

    def _blank(self) -> np.ndarray:
        return np.zeros(self.env.action_size)

    def _reach_then_close(self, state: EnvState, hover) -> np.ndarray:
        a = self._blank()
        err = hover - state.joints.wrist_pos
        if float(np.linalg.norm(err)) > 1e-3:
            a[:3] = err
        else:
            a[6:] = self.close_rate
        return a

    def _act_lift(self, state: EnvState) -> np.ndarray:
        cfg = self.env.cfg
        if state.attached == state.target_index:
            a = self._blank()
            a[2] = cfg.goal_height - float(state.target_position[2])
            return a
        hover = state.target_position + np.array([0, 0, self.hover_clearance])
        return self._reach_then_close(state, hover)

    def _act_throw(self, state: EnvState) -> np.ndarray:
        cfg = self.env.cfg
        if state.attached != state.target_index:
            if state.lifted_ever:
                return self._blank()      # released: wait for it to land
            hover = state.target_position + np.array(
                [0, 0, self.hover_clearance])
            return self._reach_then_close(state, hover)
        a = self._blank()
        wrist = state.joints.wrist_pos
        if wrist[2] < self.carry_height - 1e-3:
            a[2] = self.carry_height - wrist[2]
            return a
        cx, cy = cfg.receptacle_center
        err = np.array([cx, cy, self.carry_height]) - wrist
        if float(np.linalg.norm(err[:2])) > 1e-3:
            a[:3] = err
            return a
        a[6:] = -self.close_rate          # open until the grasp releases
        return a

    def _act_cabinet(self, state: EnvState) -> np.ndarray:
        cfg = self.env.cfg
        if state.attached == 0:
            a = self._blank()
            a[0] = -(cfg.drawer_limit + 0.01 - state.drawer_x)
            return a
        hover = state.target_position + np.array([0, 0, self.hover_clearance])
        return self._reach_then_close(state, hover)


def run_oracle_episode(env: ManipulationEnv,
                       rng: np.random.Generator) -> EnvState:
    """Reset, run the scripted policy to termination, return the end state."""
    oracle = ScriptedOracle(env)
    state, _ = env.reset(rng)
    while not state.done:
        state, _, _ = env.step(oracle.act(state))
    return state


def oracle_success_rate(env: ManipulationEnv, n_episodes: int,
                        seed: int = 0) -> float:
    """Fraction of seeded resets the scripted policy solves."""
    wins = 0
    for i in range(n_episodes):
        state = run_oracle_episode(env, np.random.default_rng((seed, i)))
        wins += int(state.success)
    return wins / n_episodes
