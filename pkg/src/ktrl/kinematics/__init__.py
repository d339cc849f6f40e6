"""Hand models, forward kinematics, keypoint Jacobians and correspondence."""

from .fk import (
    apply_correspondence,
    fingertip_positions,
    forward_kinematics,
    keypoint_jacobian,
    map_keypoints,
)
from .hand import (
    HUMAN_KEYPOINT_COUNT,
    Finger,
    HandModel,
    HandModelError,
    Joint,
    JointConfig,
    available_models,
    load_hand_model,
)
from .rotations import (
    axis_angle_mat,
    quat_from_rotvec,
    quat_mul,
    quat_normalize,
    quat_to_mat,
)

__all__ = [
    "HUMAN_KEYPOINT_COUNT",
    "Finger",
    "HandModel",
    "HandModelError",
    "Joint",
    "JointConfig",
    "apply_correspondence",
    "available_models",
    "axis_angle_mat",
    "fingertip_positions",
    "forward_kinematics",
    "keypoint_jacobian",
    "load_hand_model",
    "map_keypoints",
    "quat_from_rotvec",
    "quat_mul",
    "quat_normalize",
    "quat_to_mat",
]
