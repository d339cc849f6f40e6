"""Line-delimited trajectory logs for external plotting and exact replay.

One JSON object per line: step index, proprioceptive vector, object poses,
the reward split by term, and the tracked keypoint prediction when one
exists. Floats survive the JSON round trip exactly (repr-based), so replays
reconstruct trajectories bit for bit.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .core import EnvState


def step_record(step: int, state: EnvState, rewards: dict[str, float],
                prediction: np.ndarray | None = None) -> dict:
    rec = {
        "step": int(step),
        "proprio": state.joints.as_vector().tolist(),
        "object_positions": state.object_positions.tolist(),
        "object_quats": state.object_quats.tolist(),
        "drawer_x": float(state.drawer_x),
        "attached": int(state.attached),
        "rewards": {k: float(v) for k, v in rewards.items()},
        "done": bool(state.done),
        "success": bool(state.success),
    }
    if prediction is not None:
        rec["prediction"] = np.asarray(prediction).tolist()
    return rec


def write_trajectory(path, records) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as f:
        for rec in records:
            f.write(json.dumps(rec) + "\n")


def read_trajectory(path) -> list[dict]:
    path = Path(path)
    with path.open("r", encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]
