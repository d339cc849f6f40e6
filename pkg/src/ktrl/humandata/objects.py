"""Object shapes: surface sampling, distances, and table placement."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..kinematics.rotations import quat_to_mat

N_CATEGORIES = 20


class PlacementError(RuntimeError):
    pass


@dataclass(frozen=True)
class ObjectSpec:
    """A rigid object: box (full extents), cylinder (radius, height), or
    sphere (radius). Dimensions in meters."""

    shape: str
    dimensions: tuple[float, ...]
    category: int

    def __post_init__(self):
        if self.shape not in ("box", "cylinder", "sphere"):
            raise ValueError(f"unknown shape {self.shape!r}")
        n_expected = {"box": 3, "cylinder": 2, "sphere": 1}[self.shape]
        if len(self.dimensions) != n_expected:
            raise ValueError(
                f"{self.shape} needs {n_expected} dimensions, got "
                f"{self.dimensions}")
        if min(self.dimensions) <= 0:
            raise ValueError(f"dimensions must be positive: {self.dimensions}")
        if not 0 <= self.category < N_CATEGORIES:
            raise ValueError(f"category {self.category} outside vocabulary")

    @property
    def bounding_radius(self) -> float:
        if self.shape == "sphere":
            return self.dimensions[0]
        if self.shape == "cylinder":
            r, h = self.dimensions
            return float(np.hypot(r, h / 2))
        return float(np.linalg.norm(self.dimensions) / 2)

    @property
    def inscribed_radius(self) -> float:
        if self.shape == "sphere":
            return self.dimensions[0]
        if self.shape == "cylinder":
            r, h = self.dimensions
            return min(r, h / 2)
        return min(self.dimensions) / 2

    @property
    def resting_height(self) -> float:
        """Center height when resting on a flat support."""
        if self.shape == "sphere":
            return self.dimensions[0]
        if self.shape == "cylinder":
            return self.dimensions[1] / 2
        return self.dimensions[2] / 2


def object_catalog() -> dict[int, ObjectSpec]:
    """Twenty graspable desk-scale objects, one per category id."""
    catalog = {}
    for cat in range(N_CATEGORIES):
        kind = ("sphere", "box", "cylinder")[cat % 3]
        step = cat // 3
        if kind == "sphere":
            spec = ObjectSpec("sphere", (0.026 + 0.0015 * step,), cat)
        elif kind == "box":
            spec = ObjectSpec(
                "box", (0.048 + 0.002 * step, 0.040, 0.038 + 0.001 * step), cat)
        else:
            spec = ObjectSpec(
                "cylinder", (0.021 + 0.001 * step, 0.056 + 0.002 * step), cat)
        catalog[cat] = spec
    return catalog


def surface_points(spec: ObjectSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """n points uniform on the surface, body frame."""
    if spec.shape == "sphere":
        (r,) = spec.dimensions
        v = rng.standard_normal((n, 3))
        return r * v / np.linalg.norm(v, axis=1, keepdims=True)

    if spec.shape == "box":
        dx, dy, dz = spec.dimensions
        areas = np.array([dy * dz, dy * dz, dx * dz, dx * dz, dx * dy, dx * dy])
        faces = rng.choice(6, size=n, p=areas / areas.sum())
        u = rng.uniform(-0.5, 0.5, (n, 2))
        pts = np.empty((n, 3))
        half = np.array([dx, dy, dz]) / 2
        for i, f in enumerate(faces):
            axis = f // 2
            sign = 1.0 if f % 2 == 0 else -1.0
            others = [a for a in range(3) if a != axis]
            pts[i, axis] = sign * half[axis]
            pts[i, others[0]] = u[i, 0] * spec.dimensions[others[0]]
            pts[i, others[1]] = u[i, 1] * spec.dimensions[others[1]]
        return pts

    r, h = spec.dimensions
    lateral = 2 * np.pi * r * h
    caps = 2 * np.pi * r * r
    pts = np.empty((n, 3))
    on_side = rng.random(n) < lateral / (lateral + caps)
    phi = rng.uniform(0, 2 * np.pi, n)
    for i in range(n):
        if on_side[i]:
            pts[i] = [r * np.cos(phi[i]), r * np.sin(phi[i]),
                      rng.uniform(-h / 2, h / 2)]
        else:
            rad = r * np.sqrt(rng.random())
            top = 1.0 if rng.random() < 0.5 else -1.0
            pts[i] = [rad * np.cos(phi[i]), rad * np.sin(phi[i]), top * h / 2]
    return pts


def sample_object_pointcloud(spec: ObjectSpec, position, quat,
                             rng: np.random.Generator, n: int = 100) -> np.ndarray:
    """n surface points transformed to the world frame."""
    pts = surface_points(spec, n, rng)
    return pts @ quat_to_mat(np.asarray(quat, float)).T + np.asarray(position, float)


def surface_distance(spec: ObjectSpec, position, quat, point) -> float:
    """Absolute distance from a world point to the object surface."""
    local = quat_to_mat(np.asarray(quat, float)).T @ (np.asarray(point, float)
                                                      - np.asarray(position, float))
    if spec.shape == "sphere":
        return abs(float(np.linalg.norm(local)) - spec.dimensions[0])
    if spec.shape == "box":
        q = np.abs(local) - np.asarray(spec.dimensions) / 2
        outside = np.linalg.norm(np.maximum(q, 0.0))
        inside = min(q.max(), 0.0)
        return abs(float(outside + inside))
    r, h = spec.dimensions
    q = np.array([np.hypot(local[0], local[1]) - r, abs(local[2]) - h / 2])
    outside = np.linalg.norm(np.maximum(q, 0.0))
    inside = min(q.max(), 0.0)
    return abs(float(outside + inside))


def place_objects(specs, rng: np.random.Generator, *, extent: float = 1.0,
                  margin: float = 0.15, gap: float = 0.02,
                  max_attempts: int = 100) -> list[np.ndarray]:
    """Rejection-sample non-overlapping resting positions on the table.

    The table is an extent x extent square centered at the origin with its
    surface at z=0; objects rest at their natural center height.
    """
    half = extent / 2 - margin
    placed: list[np.ndarray] = []
    for idx, spec in enumerate(specs):
        for attempt in range(max_attempts):
            xy = rng.uniform(-half, half, 2)
            pos = np.array([xy[0], xy[1], spec.resting_height])
            ok = all(
                np.linalg.norm(pos[:2] - other[:2])
                > spec.bounding_radius + other_spec.bounding_radius + gap
                for other, other_spec in zip(placed, specs))
            if ok:
                placed.append(pos)
                break
        else:
            raise PlacementError(
                f"could not place object {idx} ({spec.shape}, category "
                f"{spec.category}) after {max_attempts} attempts")
    return placed
