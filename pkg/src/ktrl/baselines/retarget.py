"""Kinematic retargeting: human keypoint frames to robot joint trajectories.

Damped least-squares IK run sequentially over a trajectory so each frame
warm-starts from the previous frame's solution; the step damping keeps every
update small, which together with warm-starting yields temporally smooth
joint tracks. Retargeted trajectories serialize to a sibling binary format
("KTRLRETG") holding joints, derived actions, and per-frame residuals.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..envs import EnvConfig, clip_action
from ..kinematics import (HandModel, JointConfig, forward_kinematics,
                          keypoint_jacobian, quat_from_rotvec, quat_mul,
                          quat_normalize)

logger = logging.getLogger(__name__)

RETG_MAGIC = b"KTRLRETG"
RETG_VERSION = 1


class RetargetError(RuntimeError):
    pass


@dataclass(frozen=True)
class RetargetResult:
    """Single-frame IK outcome."""

    q: JointConfig
    residual: float       # max keypoint error, meters
    flagged: bool         # best residual stayed above flag_tol: unusable
    iterations: int


@dataclass
class RetargetedTrajectory:
    """Robot-side rendering of one human demonstration."""

    joints: list[JointConfig]
    actions: np.ndarray        # (T-1, 6 + n_finger_dof) clipped deltas
    residuals: np.ndarray      # (T,) meters
    flags: np.ndarray          # (T,) bool
    source_index: int
    goal: int

    def __post_init__(self):
        if len(self.joints) != len(self.residuals):
            raise ValueError("joints and residuals disagree on frame count")
        if len(self.actions) != max(len(self.joints) - 1, 0):
            raise ValueError("actions must be successive joint differences")
        if not np.all(np.isfinite(self.residuals)):
            raise ValueError("non-finite IK residuals")

    @property
    def n_frames(self) -> int:
        return len(self.joints)


def _targets_for(model: HandModel,
                 human_keypoints: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Corresponded robot keypoint indices and their human-frame targets."""
    kp = np.asarray(human_keypoints, dtype=float)
    rows = np.array(sorted(model.correspondence), dtype=int)
    targets = np.stack([kp[model.correspondence[int(i)]] for i in rows])
    return rows, targets


def _residual(model: HandModel, q: JointConfig, rows: np.ndarray,
              targets: np.ndarray) -> tuple[np.ndarray, float, float]:
    """Error matrix, least-squares cost, and max keypoint distance."""
    err = targets - forward_kinematics(model, q)[rows]
    flat = err.ravel()
    return err, float(flat @ flat), float(np.max(np.linalg.norm(err, axis=1)))


def _apply(model: HandModel, q: JointConfig, delta: np.ndarray) -> JointConfig:
    quat = quat_normalize(quat_mul(quat_from_rotvec(delta[3:6]), q.wrist_quat))
    return JointConfig(q.wrist_pos + delta[:3], quat,
                       model.clamp_angles(q.angles + delta[6:]))


def _motion_from(model: HandModel, q: JointConfig,
                 q_ref: JointConfig) -> np.ndarray:
    """Displacement of q from q_ref in Jacobian motion coordinates."""
    rel = quat_mul(q.wrist_quat,
                   q_ref.wrist_quat * np.array([1.0, -1.0, -1.0, -1.0]))
    if rel[0] < 0.0:   # both quaternion signs encode the same rotation
        rel = -rel
    angle = 2.0 * np.arccos(min(1.0, float(rel[0])))
    axis = rel[1:]
    norm = np.linalg.norm(axis)
    rotvec = np.zeros(3) if norm < 1e-12 else axis / norm * angle
    return np.concatenate([q.wrist_pos - q_ref.wrist_pos, rotvec,
                           q.angles - q_ref.angles])


def retarget_frame(human_keypoints: np.ndarray, model: HandModel,
                   q_prev: JointConfig, *, mu: float = 1e-3,
                   max_iters: int = 50, tol: float = 1e-3,
                   flag_tol: float = 0.02,
                   lock_wrist: bool = False) -> RetargetResult:
    """Solve joints whose keypoints match one human frame.

    Iterative damped least squares: each step solves
    min ||J d - e||^2 + mu*||d||^2 about the current iterate, starting from
    ``q_prev``, with backtracking step halving so only cost-decreasing steps
    are accepted. The search ends when the max keypoint error drops below
    ``tol``, after ``max_iters`` iterations, or after three consecutive
    rejected steps (divergence); the best iterate seen is returned either
    way. Frames whose best residual stays above ``flag_tol`` are flagged as
    unusable: a mismatched embodiment leaves a small irreducible residual on
    some poses, which is expected, while a flagged frame means the target
    was effectively out of reach. With ``lock_wrist`` the wrist pose is held
    at ``q_prev`` and only finger joints move.
    """
    rows, targets = _targets_for(model, human_keypoints)
    jac_rows = (3 * rows[:, None] + np.arange(3)).ravel()
    q = q_prev
    err, cost, res = _residual(model, q, rows, targets)
    best_q, best_res = q, res
    growth = 0
    iterations = 0
    for iterations in range(1, max_iters + 1):
        if best_res < tol:
            break
        jac = keypoint_jacobian(model, q)[jac_rows]
        if lock_wrist:
            jac = jac.copy()
            jac[:, :6] = 0.0
        lhs = jac.T @ jac + mu * np.eye(jac.shape[1])
        delta = np.linalg.solve(lhs, jac.T @ err.ravel())
        accepted = False
        for _ in range(6):
            cand = _apply(model, q, delta)
            cand_err, cand_cost, cand_res = _residual(model, cand, rows,
                                                      targets)
            if cand_cost < cost:
                q, err, cost, res = cand, cand_err, cand_cost, cand_res
                accepted = True
                break
            delta = delta * 0.5
        if accepted:
            growth = 0
            if res < best_res:
                best_q, best_res = q, res
        else:
            growth += 1
            if growth >= 3:
                break
    return RetargetResult(best_q, best_res, best_res >= flag_tol, iterations)


def _frame_action(model: HandModel, env_cfg: EnvConfig, q: JointConfig,
                  q_next: JointConfig) -> np.ndarray:
    raw = _motion_from(model, q_next, q)
    dpos, drot, dang = clip_action(env_cfg, model.n_finger_dof, raw)
    return np.concatenate([dpos, drot, dang])


def retarget_dataset(records, model: HandModel,
                     env_cfg: EnvConfig | None = None, *, mu: float = 1e-3,
                     tol: float = 1e-3, flag_tol: float = 0.02,
                     max_flagged: float = 0.10,
                     start: JointConfig | None = None):
    """Retarget every record sequentially; returns (trajectories, stats).

    Each frame warm-starts from the previous solution; the first frame
    starts at mid-range flexion with the wrist on the human wrist keypoint,
    which avoids the poor local minima a fully opened start falls into.
    Actions are the successive joint differences clipped to the
    environment's per-step bounds. Records with more than ``max_flagged``
    flagged frames or fewer than two frames are dropped; the drop rate is
    logged and reported in stats.
    """
    records = list(records)
    if not records:
        raise RetargetError("empty dataset: nothing to retarget")
    env_cfg = env_cfg or EnvConfig(task="grasp_lift", hand=model.name)
    limits = np.asarray(model.limits, dtype=float)
    mid_angles = limits.mean(axis=1)
    kept: list[RetargetedTrajectory] = []
    dropped_short = dropped_flagged = 0
    residual_sum, residual_frames = 0.0, 0
    for src, record in enumerate(records):
        frames = np.asarray(record.keypoints, dtype=float)
        if len(frames) < 2:
            dropped_short += 1
            continue
        if start is None:
            q = JointConfig(frames[0, 0].copy(),
                            np.array([1.0, 0.0, 0.0, 0.0]), mid_angles)
        else:
            q = start
        joints, residuals, flags = [], [], []
        for frame in frames:
            result = retarget_frame(frame, model, q, mu=mu, tol=tol,
                                    flag_tol=flag_tol)
            q = result.q
            joints.append(q)
            residuals.append(result.residual)
            flags.append(result.flagged)
        flags = np.asarray(flags)
        if flags.mean() > max_flagged:
            dropped_flagged += 1
            continue
        actions = np.stack([
            _frame_action(model, env_cfg, a, b)
            for a, b in zip(joints[:-1], joints[1:])])
        kept.append(RetargetedTrajectory(
            joints=joints, actions=actions,
            residuals=np.asarray(residuals), flags=flags,
            source_index=src, goal=record.goal))
        residual_sum += float(np.sum(residuals))
        residual_frames += len(residuals)
    if not kept:
        raise RetargetError(
            f"all {len(records)} records dropped "
            f"({dropped_flagged} over the flag budget, {dropped_short} too "
            f"short); nothing retargeted")
    stats = {
        "kept": len(kept),
        "dropped_flagged": dropped_flagged,
        "dropped_short": dropped_short,
        "drop_rate": (dropped_flagged + dropped_short) / len(records),
        "mean_residual": residual_sum / residual_frames,
    }
    logger.info("retargeted %d/%d records (drop rate %.1f%%, mean residual "
                "%.2e m)", stats["kept"], len(records),
                100 * stats["drop_rate"], stats["mean_residual"])
    return kept, stats


def write_retargeted(path, trajectories) -> None:
    """KTRLRETG: magic | version | count | length-prefixed records."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    trajectories = list(trajectories)
    with open(path, "wb") as f:
        f.write(RETG_MAGIC)
        f.write(struct.pack("<II", RETG_VERSION, len(trajectories)))
        for traj in trajectories:
            joints = np.stack([q.as_vector() for q in traj.joints])
            payload = struct.pack(
                "<IIIII", traj.source_index, traj.goal, traj.n_frames,
                joints.shape[1], traj.actions.shape[1] if traj.n_frames > 1
                else 0)
            payload += joints.astype("<f8").tobytes()
            payload += traj.actions.astype("<f8").tobytes()
            payload += traj.residuals.astype("<f8").tobytes()
            payload += traj.flags.astype("u1").tobytes()
            f.write(struct.pack("<I", len(payload)))
            f.write(payload)


def read_retargeted(path, model: HandModel) -> list[RetargetedTrajectory]:
    path = Path(path)
    out = []
    with open(path, "rb") as f:
        magic = f.read(len(RETG_MAGIC))
        if magic != RETG_MAGIC:
            raise RetargetError(
                f"bad magic {magic!r} (expected {RETG_MAGIC!r})")
        version, count = struct.unpack("<II", f.read(8))
        if version != RETG_VERSION:
            raise RetargetError(f"unsupported KTRLRETG version {version}")
        for i in range(count):
            (length,) = struct.unpack("<I", f.read(4))
            payload = f.read(length)
            if len(payload) != length:
                raise RetargetError(f"truncated record {i}")
            head = struct.calcsize("<IIIII")
            src, goal, t, qdim, adim = struct.unpack("<IIIII", payload[:head])
            off = head
            joints_flat = np.frombuffer(payload[off:off + 8 * t * qdim],
                                        "<f8").reshape(t, qdim)
            off += 8 * t * qdim
            n_act = max(t - 1, 0)
            actions = np.frombuffer(payload[off:off + 8 * n_act * adim],
                                    "<f8").reshape(n_act, adim).copy()
            off += 8 * n_act * adim
            residuals = np.frombuffer(payload[off:off + 8 * t], "<f8").copy()
            off += 8 * t
            flags = np.frombuffer(payload[off:off + t], "u1").astype(bool)
            n_ang = qdim - 7
            joints = [JointConfig(row[:3], row[3:7], row[7:7 + n_ang])
                      for row in joints_flat]
            out.append(RetargetedTrajectory(
                joints=joints, actions=actions, residuals=residuals,
                flags=flags, source_index=int(src), goal=int(goal)))
    return out
