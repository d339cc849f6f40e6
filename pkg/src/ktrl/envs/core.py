"""Quasi-static manipulation environments with opposition-based grasping.

Objects are rigid catalog shapes resting on a table. There is no contact
simulation: an object attaches to the hand when at least two fingertips
surround it (opposition test) and then follows the wrist rigidly until the
fingers withdraw. Unattached objects fall ballistically onto whatever
support lies under their center (table, receptacle, or floor).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..humandata.objects import (
    ObjectSpec,
    object_catalog,
    place_objects,
    surface_points,
)
from ..kinematics import (
    JointConfig,
    forward_kinematics,
    load_hand_model,
    quat_mul,
    quat_normalize,
    quat_to_mat,
    quat_from_rotvec,
)
from .config import EnvConfig

HAND_START = np.array([-0.42, 0.0, 0.20])
DRAWER_AXIS = np.array([-1.0, 0.0, 0.0])      # opening pulls toward the hand
HANDLE_HOME = np.array([0.15, 0.0, 0.12])
HANDLE_SPEC = ObjectSpec("cylinder", (0.012, 0.12), category=2)
# bar horizontal: cylinder axis rotated from z onto y
HANDLE_QUAT = np.array([np.sqrt(0.5), -np.sqrt(0.5), 0.0, 0.0])


@dataclass(frozen=True)
class EnvState:
    """Complete dynamic state; per-episode constants ride along frozen."""

    joints: JointConfig
    keypoints: np.ndarray            # (n_kp, 3) world, row 0 wrist then tips
    object_positions: np.ndarray     # (n_o, 3) centers
    object_quats: np.ndarray         # (n_o, 4) scalar-first
    object_vz: np.ndarray            # (n_o,) vertical velocity, m/s
    specs: tuple[ObjectSpec, ...]
    target_index: int
    attached: int                    # object index, -1 when free
    rel_pos: np.ndarray | None       # grab offset, wrist frame
    rel_quat: np.ndarray | None
    drawer_x: float
    step_count: int
    hold_steps: int
    lifted_ever: bool
    success: bool
    failure: bool
    timeout: bool
    faulted: bool

    @property
    def done(self) -> bool:
        return self.success or self.failure or self.timeout or self.faulted

    @property
    def target_position(self) -> np.ndarray:
        return self.object_positions[self.target_index]

    @property
    def goal(self) -> int:
        return self.specs[self.target_index].category


@dataclass(frozen=True)
class Observation:
    proprio: np.ndarray              # wrist pos + quat + joint angles
    cloud: np.ndarray                # (100 * n_o, 3)
    goal: int
    keypoints: np.ndarray            # (n_kp, 3)


@dataclass(frozen=True)
class DoneFlags:
    done: bool
    success: bool
    failure: bool
    timeout: bool
    faulted: bool

    @staticmethod
    def of(state: EnvState) -> "DoneFlags":
        return DoneFlags(state.done, state.success, state.failure,
                         state.timeout, state.faulted)


def _norm_clip(v: np.ndarray, limit: float) -> np.ndarray:
    n = float(np.linalg.norm(v))
    if n <= limit or n == 0.0:
        return v
    return v * (limit / n)


def clip_action(cfg: EnvConfig, n_finger_dof: int,
                action: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Split a delta action and clamp each part to its per-step bound."""
    action = np.asarray(action, float)
    if action.shape != (6 + n_finger_dof,):
        raise ValueError(
            f"action must have shape ({6 + n_finger_dof},) for this hand, "
            f"got {action.shape}")
    dpos = _norm_clip(action[:3], cfg.wrist_step)
    drot = _norm_clip(action[3:6], cfg.rot_step)
    dang = np.clip(action[6:], -cfg.finger_step, cfg.finger_step)
    return dpos, drot, dang


def support_height(cfg: EnvConfig, x: float, y: float) -> float:
    """z of whatever surface lies under a point: table, bin floor, or ground."""
    half = cfg.table_extent / 2
    if abs(x) <= half and abs(y) <= half:
        return 0.0
    if cfg.task == "lift_throw":
        cx, cy = cfg.receptacle_center
        r = cfg.receptacle_size / 2
        if abs(x - cx) < r and abs(y - cy) < r:
            return -cfg.receptacle_size
    return cfg.ground_z


def _quat_conj(q: np.ndarray) -> np.ndarray:
    return q * np.array([1.0, -1.0, -1.0, -1.0])


class ManipulationEnv:
    """One task instance; reset(rng) then step(action) at the control rate."""

    def __init__(self, cfg: EnvConfig):
        self.cfg = cfg
        self.hand = load_hand_model(cfg.hand)
        self._state: EnvState | None = None
        self._body_points: list[np.ndarray] = []

    @property
    def state(self) -> EnvState:
        if self._state is None:
            raise RuntimeError("reset() must be called before stepping")
        return self._state

    @property
    def action_size(self) -> int:
        return 6 + self.hand.n_finger_dof

    # ------------------------------------------------------------ reset

    def reset(self, rng: np.random.Generator) -> tuple[EnvState, Observation]:
        cfg = self.cfg
        if cfg.task == "open_cabinet":
            specs = (HANDLE_SPEC,)
            positions = np.array([HANDLE_HOME])
            quats = np.array([HANDLE_QUAT])
            target = 0
        else:
            catalog = object_catalog()
            cats = rng.choice(len(catalog), size=cfg.n_objects, replace=False)
            specs = tuple(catalog[int(c)] for c in cats)
            placed = place_objects(specs, rng, extent=cfg.table_extent)
            positions = np.asarray(placed)
            quats = np.empty((cfg.n_objects, 4))
            for i in range(cfg.n_objects):
                yaw = rng.uniform(0, 2 * np.pi)
                quats[i] = [np.cos(yaw / 2), 0.0, 0.0, np.sin(yaw / 2)]
            target = int(rng.integers(cfg.n_objects))
        self._body_points = [
            surface_points(spec, cfg.points_per_object, rng) for spec in specs
        ]
        joints = JointConfig.rest(self.hand, wrist_pos=HAND_START)
        self._state = EnvState(
            joints=joints,
            keypoints=forward_kinematics(self.hand, joints),
            object_positions=positions,
            object_quats=quats,
            object_vz=np.zeros(len(specs)),
            specs=specs,
            target_index=target,
            attached=-1,
            rel_pos=None,
            rel_quat=None,
            drawer_x=0.0,
            step_count=0,
            hold_steps=0,
            lifted_ever=False,
            success=False,
            failure=False,
            timeout=False,
            faulted=False,
        )
        return self._state, self.observe(self._state)

    # ------------------------------------------------------------- step

    def step(self, action) -> tuple[EnvState, Observation, DoneFlags]:
        cfg = self.cfg
        s = self.state
        if s.done:
            return s, self.observe(s), DoneFlags.of(s)
        action = np.asarray(action, float)
        if not np.all(np.isfinite(action)):
            s = replace(s, faulted=True)
            self._state = s
            return s, self.observe(s), DoneFlags.of(s)
        dpos, drot, dang = clip_action(cfg, self.hand.n_finger_dof, action)

        wrist_pos = s.joints.wrist_pos + dpos
        wrist_quat = quat_normalize(
            quat_mul(quat_from_rotvec(drot), s.joints.wrist_quat))
        angles = self.hand.clamp_angles(s.joints.angles + dang)
        joints = JointConfig(wrist_pos, wrist_quat, angles)
        keypoints = forward_kinematics(self.hand, joints)

        positions = s.object_positions.copy()
        quats = s.object_quats.copy()
        vz = s.object_vz.copy()
        drawer_x = s.drawer_x

        if cfg.task == "open_cabinet":
            if s.attached == 0:
                drawer_x = float(np.clip(
                    drawer_x + dpos @ DRAWER_AXIS, 0.0, cfg.drawer_travel))
            positions[0] = HANDLE_HOME + DRAWER_AXIS * drawer_x
        elif s.attached >= 0:
            rot = quat_to_mat(wrist_quat)
            positions[s.attached] = wrist_pos + rot @ s.rel_pos
            quats[s.attached] = quat_normalize(
                quat_mul(wrist_quat, s.rel_quat))
            vz[s.attached] = 0.0

        # ballistic fall of free objects onto their local support
        for i, spec in enumerate(s.specs):
            if i == s.attached or cfg.task == "open_cabinet":
                continue
            rest = support_height(cfg, positions[i, 0], positions[i, 1]) \
                + spec.resting_height
            if positions[i, 2] > rest:
                vz[i] += cfg.gravity * cfg.dt
                positions[i, 2] -= vz[i] * cfg.dt
            if positions[i, 2] <= rest:
                positions[i, 2] = rest
                vz[i] = 0.0

        attached, rel_pos, rel_quat = self._attach_check(
            s, keypoints, wrist_pos, wrist_quat, positions, quats)

        step_count = s.step_count + 1
        hold_steps, lifted_ever = s.hold_steps, s.lifted_ever
        success = failure = False
        tpos = positions[s.target_index]
        if cfg.task in ("grasp_lift", "grasp_lift_clutter"):
            lifted_ever = lifted_ever or tpos[2] > cfg.lift_threshold
            in_band = abs(tpos[2] - cfg.goal_height) <= cfg.goal_band
            hold_steps = hold_steps + 1 if in_band else 0
            success = hold_steps >= cfg.hold_steps_required
            failure = self._resting_on_ground(cfg, s.specs[s.target_index],
                                              tpos, vz[s.target_index],
                                              attached == s.target_index)
        elif cfg.task == "lift_throw":
            lifted_ever = lifted_ever or tpos[2] > cfg.lift_threshold
            at_rest = attached != s.target_index and vz[s.target_index] == 0.0
            cx, cy = cfg.receptacle_center
            r = cfg.receptacle_size / 2
            inside = (abs(tpos[0] - cx) < r and abs(tpos[1] - cy) < r
                      and tpos[2] < 0.0)
            success = at_rest and inside
            failure = self._resting_on_ground(cfg, s.specs[s.target_index],
                                              tpos, vz[s.target_index],
                                              attached == s.target_index)
        else:
            success = drawer_x >= cfg.drawer_limit
        timeout = not success and not failure and step_count >= cfg.max_steps

        self._state = EnvState(
            joints=joints,
            keypoints=keypoints,
            object_positions=positions,
            object_quats=quats,
            object_vz=vz,
            specs=s.specs,
            target_index=s.target_index,
            attached=attached,
            rel_pos=rel_pos,
            rel_quat=rel_quat,
            drawer_x=drawer_x,
            step_count=step_count,
            hold_steps=hold_steps,
            lifted_ever=lifted_ever,
            success=success,
            failure=failure,
            timeout=timeout,
            faulted=False,
        )
        return self._state, self.observe(self._state), DoneFlags.of(self._state)

    def _resting_on_ground(self, cfg, spec, pos, vz, attached) -> bool:
        if attached or vz != 0.0:
            return False
        support = support_height(cfg, pos[0], pos[1])
        return support == cfg.ground_z and pos[2] <= support \
            + spec.resting_height

    # ------------------------------------------------------ grasp rule

    def _attach_check(self, s: EnvState, keypoints, wrist_pos, wrist_quat,
                      positions, quats):
        """Opposition-based attach/detach; returns the new attachment."""
        cfg = self.cfg
        tips = keypoints[1:]
        if s.attached >= 0:
            spec = s.specs[s.attached]
            center = positions[s.attached]
            release = spec.bounding_radius + cfg.contact_margin \
                + cfg.release_margin
            dists = np.linalg.norm(tips - center, axis=1)
            if np.all(dists > release):
                return -1, None, None
            return s.attached, s.rel_pos, s.rel_quat

        best = (-1, np.inf)
        for i, spec in enumerate(s.specs):
            center = positions[i]
            contact = spec.bounding_radius + cfg.contact_margin
            disp = tips - center
            dists = np.linalg.norm(disp, axis=1)
            close = np.flatnonzero(dists <= contact)
            if len(close) < 2:
                continue
            # opposition: some pair of near fingertips straddles the center
            opposed = any(
                disp[a] @ disp[b] < 0.0
                for ai, a in enumerate(close) for b in close[ai + 1:])
            if opposed and dists[close].min() < best[1]:
                best = (i, dists[close].min())
        idx = best[0]
        if idx < 0:
            return -1, None, None
        if self.cfg.task == "open_cabinet":
            # the handle rides the drawer, not the wrist: no grab frame
            return idx, None, None
        rot = quat_to_mat(wrist_quat)
        rel_pos = rot.T @ (positions[idx] - wrist_pos)
        rel_quat = quat_normalize(
            quat_mul(_quat_conj(wrist_quat), quats[idx]))
        return idx, rel_pos, rel_quat

    # ----------------------------------------------------- observation

    def observe(self, state: EnvState) -> Observation:
        clouds = [
            body @ quat_to_mat(q).T + pos
            for body, q, pos in zip(self._body_points, state.object_quats,
                                    state.object_positions)
        ]
        return Observation(
            proprio=state.joints.as_vector(),
            cloud=np.concatenate(clouds),
            goal=state.goal,
            keypoints=state.keypoints.copy(),
        )
