"""Forward kinematics, keypoint Jacobians, and the human-order mapping."""

from __future__ import annotations

import numpy as np

from .hand import HUMAN_KEYPOINT_COUNT, HandModel, JointConfig
from .rotations import axis_angle_mat, quat_to_mat


def _check_dims(model: HandModel, q: JointConfig):
    if q.angles.shape != (model.n_finger_dof,):
        raise ValueError(
            f"{model.name} expects {model.n_finger_dof} joint angles, "
            f"got {q.angles.shape}")


def _chain_frames(finger, wrist_rot, wrist_pos, angles):
    """World-frame (rotation, origin, axis) triple per joint, then the tip."""
    rot = wrist_rot
    pos = wrist_pos + wrist_rot @ finger.base_offset
    frames = []
    for joint, angle in zip(finger.joints, angles):
        pos = pos + rot @ joint.offset
        axis_world = rot @ joint.axis
        rot = rot @ axis_angle_mat(joint.axis, angle)
        frames.append((rot, pos, axis_world))
    tip = pos + rot @ finger.tip_offset
    return frames, tip


def forward_kinematics(model: HandModel, q: JointConfig) -> np.ndarray:
    """Keypoint positions, meters, world frame: (n_keypoints, 3).

    Row 0 is the wrist keypoint; row i is the tip of finger i-1.
    """
    _check_dims(model, q)
    wrist_rot = quat_to_mat(q.wrist_quat)
    out = np.empty((model.n_keypoints, 3))
    out[0] = q.wrist_pos + wrist_rot @ model.wrist_keypoint_offset
    start = 0
    for i, finger in enumerate(model.fingers):
        n = len(finger.joints)
        _, tip = _chain_frames(finger, wrist_rot, q.wrist_pos,
                               q.angles[start:start + n])
        out[i + 1] = tip
        start += n
    return out


def keypoint_jacobian(model: HandModel, q: JointConfig) -> np.ndarray:
    """d(keypoints)/d(motion), shape (3*n_keypoints, 6 + n_finger_dof).

    Motion coordinates: wrist linear velocity (world), wrist angular velocity
    (world), then finger joint velocities in chain order. Revolute columns are
    axis x (point - joint origin); translation columns are identity; rotation
    columns are e_i x (point - wrist).
    """
    _check_dims(model, q)
    wrist_rot = quat_to_mat(q.wrist_quat)
    n_kp = model.n_keypoints
    jac = np.zeros((3 * n_kp, model.n_dof))
    kps = forward_kinematics(model, q)

    for k in range(n_kp):
        rows = slice(3 * k, 3 * k + 3)
        jac[rows, 0:3] = np.eye(3)
        r = kps[k] - q.wrist_pos
        # columns of the cross-product matrix e_i x r
        jac[rows, 3:6] = np.array([
            [0.0, r[2], -r[1]],
            [-r[2], 0.0, r[0]],
            [r[1], -r[0], 0.0],
        ])

    col = 6
    for i, finger in enumerate(model.fingers):
        n = len(finger.joints)
        frames, tip = _chain_frames(
            finger, wrist_rot, q.wrist_pos, q.angles[col - 6:col - 6 + n])
        rows = slice(3 * (i + 1), 3 * (i + 1) + 3)
        for j, (_, origin, axis_world) in enumerate(frames):
            jac[rows, col + j] = np.cross(axis_world, tip - origin)
        col += n
    return jac


def map_keypoints(model: HandModel, robot_keypoints: np.ndarray) -> np.ndarray:
    """Reorder robot keypoints into the fixed human keypoint order."""
    return apply_correspondence(model.correspondence, model.fills,
                                robot_keypoints, HUMAN_KEYPOINT_COUNT)


def apply_correspondence(correspondence: dict[int, int], fills: dict[int, int],
                         keypoints: np.ndarray, n_out: int) -> np.ndarray:
    keypoints = np.asarray(keypoints, float)
    out = np.empty((n_out, keypoints.shape[1]))
    for robot_idx, human_idx in correspondence.items():
        out[human_idx] = keypoints[robot_idx]
    for human_idx, robot_idx in fills.items():
        out[human_idx] = keypoints[robot_idx]
    return out


def fingertip_positions(model: HandModel, q: JointConfig) -> np.ndarray:
    return forward_kinematics(model, q)[1:]
