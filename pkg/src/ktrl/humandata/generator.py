"""Scripted human grasp trajectories: approach, pre-shape, close, lift, hold.

The hand is a 5-finger kinematic model driven in joint space. The close phase
solves per-finger stop angles with a feedback iteration (flex until the tip
sits within a contact offset of the target surface), so the script adapts to
every catalog object. All emitted phases follow minimum-jerk profiles, giving
the smooth velocity ramps human motion capture shows.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..kinematics import JointConfig, forward_kinematics, load_hand_model
from .dataset import TrajectoryRecord
from .objects import ObjectSpec, object_catalog, place_objects, sample_object_pointcloud, surface_distance


@dataclass(frozen=True, eq=False)
class SceneObject:
    spec: ObjectSpec
    position: np.ndarray          # (3,) center, world frame
    quat: np.ndarray              # (4,) scalar-first orientation


@dataclass
class GeneratorConfig:
    frame_rate: float = 30.0
    approach_frames: int = 32
    preshape_frames: int = 8
    close_max_frames: int = 30
    lift_frames: int = 24
    hold_frames: int = 24
    lift_height: float = 0.28     # wrist rise during lift, m
    hover_clearance: float = 0.065  # wrist height above target center, m
    grasp_x_shift: float = -0.012   # wrist x offset from target center, m
    contact_offset: float = 0.005   # close stops at surface +- this, m
    close_step: float = 0.055       # rad per flexion joint per close frame
    preshape_angle: float = -0.12   # spread pose flexion, rad
    start_pos: tuple[float, float, float] = (-0.42, 0.0, 0.20)
    start_jitter: float = 0.01
    timing_jitter: float = 0.1
    reach_limit: float = 0.55    # beyond the table diagonal -> rejected
    points_per_object: int = 100


def minimum_jerk(s: float) -> float:
    """Smooth 0->1 profile with zero boundary velocity/acceleration."""
    return s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)


def sample_scene(rng: np.random.Generator, n_objects: int = 1,
                 categories=None) -> list[SceneObject]:
    """Random non-overlapping resting objects drawn from the catalog."""
    catalog = object_catalog()
    if categories is None:
        cats = rng.choice(len(catalog), size=n_objects, replace=False)
    else:
        cats = list(categories)
    specs = [catalog[int(c)] for c in cats]
    positions = place_objects(specs, rng)
    scene = []
    for spec, pos in zip(specs, positions):
        yaw = rng.uniform(0, 2 * np.pi)
        quat = np.array([np.cos(yaw / 2), 0.0, 0.0, np.sin(yaw / 2)])
        scene.append(SceneObject(spec, pos, quat))
    return scene


def _jittered(frames: int, rng, jitter: float) -> int:
    return max(2, int(round(frames * rng.uniform(1 - jitter, 1 + jitter))))


class _Episode:
    """Accumulates frames while objects move with scripted hand motion."""

    def __init__(self, hand, scene, rng, n_points):
        self.hand = hand
        self.scene = list(scene)
        self.positions = [obj.position.astype(float).copy() for obj in scene]
        # one body-frame surface sample per object, re-posed every frame
        self.body_clouds = [
            sample_object_pointcloud(obj.spec, np.zeros(3), obj.quat, rng,
                                     n_points)
            for obj in scene
        ]
        self.keypoints: list[np.ndarray] = []
        self.clouds: list[np.ndarray] = []

    def emit(self, q: JointConfig):
        self.keypoints.append(forward_kinematics(self.hand, q))
        self.clouds.append(np.concatenate(
            [cloud + pos for cloud, pos in zip(self.body_clouds, self.positions)]))


def generate_grasp_trajectory(scene, target_category: int,
                              rng: np.random.Generator,
                              cfg: GeneratorConfig | None = None,
                              hand=None) -> TrajectoryRecord:
    cfg = cfg or GeneratorConfig()
    hand = hand or load_hand_model("human")
    targets = [obj for obj in scene if obj.spec.category == target_category]
    if not targets:
        raise ValueError(f"target category {target_category} not in scene")
    target = targets[0]
    if (np.hypot(target.position[0], target.position[1]) > cfg.reach_limit
            or target.position[2] > 0.25):
        raise ValueError(
            f"target pose {target.position} outside the reachable workspace")

    ep = _Episode(hand, scene, rng, cfg.points_per_object)
    target_idx = next(i for i, obj in enumerate(scene) if obj is target)

    start = np.asarray(cfg.start_pos) + rng.uniform(
        -cfg.start_jitter, cfg.start_jitter, 3)
    hover = target.position + np.array(
        [cfg.grasp_x_shift, 0.0, cfg.hover_clearance])
    quat = np.array([1.0, 0.0, 0.0, 0.0])
    angles = np.zeros(hand.n_finger_dof)

    # approach: straight minimum-jerk wrist path to the hover pose
    n = _jittered(cfg.approach_frames, rng, cfg.timing_jitter)
    for i in range(n):
        s = minimum_jerk((i + 1) / n)
        ep.emit(JointConfig(start + s * (hover - start), quat, angles))

    # pre-shape: spread fingertips to the open posture
    n = _jittered(cfg.preshape_frames, rng, cfg.timing_jitter)
    open_pose = hand.clamp_angles(np.full_like(angles, cfg.preshape_angle))
    for i in range(n):
        s = minimum_jerk((i + 1) / n)
        ep.emit(JointConfig(hover, quat, (1 - s) * angles + s * open_pose))
    angles = open_pose.copy()

    # close: flex each finger until its tip reaches the target surface.
    # The stop angles are solved first with a per-joint feedback iteration;
    # the emitted motion then sweeps to them along one minimum-jerk profile
    # so fingers decelerate into contact instead of halting abruptly.
    finger_slices = []
    off = 0
    for finger in hand.fingers:
        finger_slices.append(slice(off, off + len(finger.joints)))
        off += len(finger.joints)
    center = ep.positions[target_idx]
    stop = angles.copy()
    n_steps = 0
    for _ in range(cfg.close_max_frames):
        q = JointConfig(hover, quat, stop)
        tips = forward_kinematics(hand, q)[1:]
        done = True
        for sl, tip, finger in zip(finger_slices, tips, hand.fingers):
            dist = surface_distance(target.spec, center, target.quat, tip)
            inside = np.linalg.norm(tip - center) < target.spec.inscribed_radius
            if dist > cfg.contact_offset and not inside:
                step = np.zeros(len(stop))
                # flexion joints only; abduction axes stay at the preshape
                for j, joint in enumerate(finger.joints):
                    if abs(joint.axis[2]) < 0.5:
                        step[sl.start + j] = cfg.close_step
                stop = hand.clamp_angles(stop + step)
                done = False
        n_steps += 1
        if done:
            break
    pre_close = angles.copy()
    for i in range(n_steps):
        s = minimum_jerk((i + 1) / n_steps)
        angles = (1 - s) * pre_close + s * stop
        ep.emit(JointConfig(hover, quat, angles))
    angles = stop.copy()

    # lift: raise the wrist; the grasped object follows rigidly
    n = _jittered(cfg.lift_frames, rng, cfg.timing_jitter)
    grab_offset = ep.positions[target_idx] - hover
    for i in range(n):
        s = minimum_jerk((i + 1) / n)
        wrist = hover + np.array([0.0, 0.0, s * cfg.lift_height])
        ep.positions[target_idx] = wrist + grab_offset
        ep.emit(JointConfig(wrist, quat, angles))

    # hold: keep everything still at height
    n = _jittered(cfg.hold_frames, rng, cfg.timing_jitter)
    wrist = hover + np.array([0.0, 0.0, cfg.lift_height])
    for _ in range(n):
        ep.emit(JointConfig(wrist, quat, angles))

    return TrajectoryRecord(
        goal=int(target_category),
        keypoints=np.asarray(ep.keypoints, dtype=np.float32),
        clouds=np.asarray(ep.clouds, dtype=np.float32),
        frame_rate=float(cfg.frame_rate),
    )


def generate_dataset(n_records: int, rng: np.random.Generator,
                     cfg: GeneratorConfig | None = None,
                     n_objects_choices=(1,), hand=None) -> list[TrajectoryRecord]:
    """n independent scenes; the grasp target is a random scene object."""
    cfg = cfg or GeneratorConfig()
    hand = hand or load_hand_model("human")
    records = []
    for _ in range(n_records):
        n_obj = int(rng.choice(np.asarray(n_objects_choices)))
        scene = sample_scene(rng, n_obj)
        target = scene[int(rng.integers(len(scene)))].spec.category
        records.append(
            generate_grasp_trajectory(scene, target, rng, cfg, hand))
    return records
