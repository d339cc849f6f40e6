"""Environment configuration for the four manipulation tasks."""

from __future__ import annotations

from dataclasses import dataclass, fields

TASKS = ("grasp_lift", "grasp_lift_clutter", "lift_throw", "open_cabinet")


@dataclass(frozen=True)
class EnvConfig:
    task: str = "grasp_lift"
    hand: str = "simplified"
    table_extent: float = 1.0        # square table side, m, surface at z=0
    control_rate: float = 30.0       # Hz
    episode_seconds: float = 30.0
    lift_threshold: float = 0.1      # sparse-reward gate height, m
    goal_height: float = 0.3         # lift target height, m
    goal_band: float = 0.05          # |obj_z - goal_height| tolerance, m
    hold_seconds: float | None = None  # None -> task default (5.0 / 2.5)
    receptacle_center: tuple[float, float] = (0.6, 0.0)
    receptacle_size: float = 0.2     # cube bin, rim level with the table
    drawer_limit: float = 0.10       # open distance counted as success, m
    drawer_travel: float = 0.18      # prismatic range, m
    cabinet_bonus: float = 10.0      # reward multiplier past drawer_limit
    success_bonus: float = 10.0
    gamma: float = 0.99
    # actuation bounds per control step
    wrist_step: float = 0.02         # max wrist translation norm, m
    rot_step: float = 0.1            # max wrist rotation-vector norm, rad
    finger_step: float = 0.1         # max per-joint angle change, rad
    # quasi-static grasp rule
    contact_margin: float = 0.01     # attach: within bounding radius + this
    release_margin: float = 0.02     # detach: contact distance + this
    # dense reward weights
    w_approach: float = 1.0
    w_lift_bonus: float = 2.0
    w_goal_progress: float = 1.0
    w_success: float = 10.0
    points_per_object: int = 100
    gravity: float = 9.81
    ground_z: float = -0.4           # floor around the table

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(
                f"unknown task {self.task!r}; expected one of {TASKS}")
        for name in ("table_extent", "control_rate", "episode_seconds",
                     "wrist_step", "rot_step", "finger_step",
                     "receptacle_size", "drawer_travel", "gravity"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.gamma <= 1:
            raise ValueError(f"gamma must be in (0, 1], got {self.gamma}")
        if self.hold_seconds is not None and self.hold_seconds <= 0:
            raise ValueError("hold_seconds must be positive")
        if self.lift_threshold < 0 or self.goal_band <= 0:
            raise ValueError("lift_threshold must be >= 0 and goal_band > 0")
        if self.points_per_object < 1:
            raise ValueError("points_per_object must be >= 1")
        if self.drawer_limit > self.drawer_travel:
            raise ValueError("drawer_limit cannot exceed drawer_travel")

    @property
    def n_objects(self) -> int:
        return 3 if self.task == "grasp_lift_clutter" else 1

    @property
    def max_steps(self) -> int:
        return int(round(self.episode_seconds * self.control_rate))

    @property
    def dt(self) -> float:
        return 1.0 / self.control_rate

    @property
    def hold_steps_required(self) -> int:
        hold = self.hold_seconds
        if hold is None:
            hold = 2.5 if self.task == "grasp_lift_clutter" else 5.0
        return int(round(hold * self.control_rate))

    @classmethod
    def from_dict(cls, data: dict) -> "EnvConfig":
        valid = {f.name for f in fields(cls)}
        unknown = set(data) - valid
        if unknown:
            raise ValueError(
                f"unknown environment config fields {sorted(unknown)}; "
                f"valid fields are {sorted(valid)}")
        if "receptacle_center" in data:
            data = {**data,
                    "receptacle_center": tuple(data["receptacle_center"])}
        return cls(**data)
