"""Synthetic human grasp data: objects, scripted trajectories, file format."""

from .dataset import (
    DatasetError,
    TrajectoryRecord,
    iter_dataset,
    read_dataset,
    write_dataset,
)
from .generator import (
    GeneratorConfig,
    SceneObject,
    generate_dataset,
    generate_grasp_trajectory,
    minimum_jerk,
    sample_scene,
)
from .noise import NoiseConfig, add_input_noise
from .objects import (
    N_CATEGORIES,
    ObjectSpec,
    PlacementError,
    object_catalog,
    place_objects,
    sample_object_pointcloud,
    surface_distance,
    surface_points,
)

__all__ = [
    "DatasetError",
    "GeneratorConfig",
    "N_CATEGORIES",
    "NoiseConfig",
    "ObjectSpec",
    "PlacementError",
    "SceneObject",
    "TrajectoryRecord",
    "add_input_noise",
    "generate_dataset",
    "generate_grasp_trajectory",
    "iter_dataset",
    "minimum_jerk",
    "object_catalog",
    "place_objects",
    "read_dataset",
    "sample_object_pointcloud",
    "sample_scene",
    "surface_distance",
    "surface_points",
    "write_dataset",
]
