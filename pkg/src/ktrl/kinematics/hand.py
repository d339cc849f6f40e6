"""Hand models: floating-wrist serial-chain fingers with fingertip keypoints.

A model is a wrist base frame plus a list of fingers. Each finger is a chain
of revolute joints (axis + translation offset from the previous joint frame)
ending in a fingertip keypoint expressed in the last joint frame. Keypoint 0
is the wrist; keypoint i (i >= 1) is the tip of finger i-1.

The correspondence table relates robot keypoint indices to the fixed human
keypoint order [wrist, thumb, index, middle, ring, little]. Hands with fewer
than five fingers list fill entries assigning each uncovered human slot to an
existing robot keypoint.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .rotations import quat_normalize

HUMAN_KEYPOINT_COUNT = 6
MODEL_FORMAT_VERSION = 1
MODEL_DIR = Path(__file__).parent / "models"


class HandModelError(ValueError):
    pass


@dataclass(frozen=True)
class Joint:
    axis: np.ndarray          # unit vector in the parent joint frame
    offset: np.ndarray        # translation from the parent joint frame, m
    limits: tuple[float, float]


@dataclass(frozen=True)
class Finger:
    name: str
    base_offset: np.ndarray   # wrist frame -> first joint, m
    joints: tuple[Joint, ...]
    tip_offset: np.ndarray    # fingertip in the last joint frame, m


@dataclass(frozen=True)
class HandModel:
    name: str
    fingers: tuple[Finger, ...]
    correspondence: dict[int, int]      # robot keypoint -> human slot
    fills: dict[int, int]               # human slot -> robot keypoint
    wrist_keypoint_offset: np.ndarray = field(
        default_factory=lambda: np.zeros(3))

    @property
    def n_keypoints(self) -> int:
        return 1 + len(self.fingers)

    @property
    def n_finger_dof(self) -> int:
        return sum(len(f.joints) for f in self.fingers)

    @property
    def n_dof(self) -> int:
        """Finger joints plus the six floating-wrist degrees of freedom."""
        return self.n_finger_dof + 6

    @property
    def limits(self) -> np.ndarray:
        """(n_finger_dof, 2) stacked joint limits in chain order."""
        rows = [j.limits for f in self.fingers for j in f.joints]
        return np.array(rows)

    def clamp_angles(self, angles: np.ndarray) -> np.ndarray:
        lim = self.limits
        return np.clip(angles, lim[:, 0], lim[:, 1])

    def validate(self):
        if self.n_keypoints < 5:
            raise HandModelError(
                f"{self.name}: need >= 5 keypoints, got {self.n_keypoints}")
        for f in self.fingers:
            for j in f.joints:
                if not j.limits[0] < j.limits[1]:
                    raise HandModelError(
                        f"{self.name}/{f.name}: limits {j.limits} not increasing")
                if abs(np.linalg.norm(j.axis) - 1.0) > 1e-9:
                    raise HandModelError(f"{self.name}/{f.name}: non-unit axis")
        targets = list(self.correspondence.values())
        if len(set(targets)) != len(targets):
            raise HandModelError(f"{self.name}: correspondence not injective")
        covered = set(targets) | set(self.fills)
        expected = set(range(HUMAN_KEYPOINT_COUNT))
        if covered != expected:
            raise HandModelError(
                f"{self.name}: correspondence incomplete, human slots covered "
                f"{sorted(covered)} of {sorted(expected)}")
        if set(self.fills) & set(targets):
            raise HandModelError(f"{self.name}: fill overlaps correspondence")
        for r in list(self.correspondence) + list(self.fills.values()):
            if not 0 <= r < self.n_keypoints:
                raise HandModelError(
                    f"{self.name}: robot keypoint index {r} out of range")


@dataclass(frozen=True)
class JointConfig:
    """Floating wrist pose plus finger joint angles."""

    wrist_pos: np.ndarray     # (3,) meters, world frame
    wrist_quat: np.ndarray    # (4,) scalar-first unit quaternion
    angles: np.ndarray        # (n_finger_dof,) radians, chain order

    def __post_init__(self):
        object.__setattr__(self, "wrist_pos", np.asarray(self.wrist_pos, float))
        object.__setattr__(self, "wrist_quat", np.asarray(self.wrist_quat, float))
        object.__setattr__(self, "angles", np.asarray(self.angles, float))
        if abs(np.linalg.norm(self.wrist_quat) - 1.0) > 1e-9:
            raise ValueError("wrist quaternion must have unit norm")

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.wrist_pos, self.wrist_quat, self.angles])

    @staticmethod
    def from_vector(vec: np.ndarray) -> "JointConfig":
        vec = np.asarray(vec, float)
        return JointConfig(vec[:3], quat_normalize(vec[3:7]), vec[7:])

    @staticmethod
    def rest(model: HandModel, wrist_pos=(0.0, 0.0, 0.0)) -> "JointConfig":
        return JointConfig(np.asarray(wrist_pos, float),
                           np.array([1.0, 0.0, 0.0, 0.0]),
                           np.zeros(model.n_finger_dof))


def _parse_finger(entry: dict) -> Finger:
    joints = tuple(
        Joint(axis=np.asarray(j["axis"], float) / np.linalg.norm(j["axis"]),
              offset=np.asarray(j["offset"], float),
              limits=(float(j["limits"][0]), float(j["limits"][1])))
        for j in entry["joints"])
    return Finger(name=str(entry["name"]),
                  base_offset=np.asarray(entry["base_offset"], float),
                  joints=joints,
                  tip_offset=np.asarray(entry["tip_offset"], float))


def load_hand_model(source) -> HandModel:
    """Load a model from a mapping, a YAML path, or a bundled model name."""
    if isinstance(source, dict):
        doc = source
    else:
        path = Path(source)
        if not path.exists() and not path.suffix:
            path = MODEL_DIR / f"{source}.yaml"
        with open(path) as f:
            doc = yaml.safe_load(f)
    version = doc.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise HandModelError(
            f"unsupported hand model format version {version!r}")
    model = HandModel(
        name=str(doc["name"]),
        fingers=tuple(_parse_finger(e) for e in doc["fingers"]),
        correspondence={int(k): int(v)
                        for k, v in doc["correspondence"].items()},
        fills={int(k): int(v) for k, v in doc.get("fills", {}).items()},
        wrist_keypoint_offset=np.asarray(
            doc.get("wrist_keypoint_offset", [0.0, 0.0, 0.0]), float),
    )
    model.validate()
    return model


def available_models() -> list[str]:
    return sorted(p.stem for p in MODEL_DIR.glob("*.yaml"))
