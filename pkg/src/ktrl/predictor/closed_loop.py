"""Rolling-window inference for control loops and drift evaluation."""

from __future__ import annotations

import logging

import numpy as np

from ..humandata.dataset import TrajectoryRecord
from .model import MotionPredictor

logger = logging.getLogger(__name__)


class ClosedLoopPredictor:
    """Per-environment window over the most recent frames, capped at L.

    The shared model is read-only here; each instance owns only its window,
    so instances can run side by side across vectorized environments.
    """

    def __init__(self, model: MotionPredictor, goal: int):
        self.model = model
        self.goal = int(goal)
        self._tokens: list[np.ndarray] = []
        self._last_prediction: np.ndarray | None = None

    def reset(self, goal: int | None = None) -> None:
        if goal is not None:
            self.goal = int(goal)
        self._tokens.clear()
        self._last_prediction = None

    @property
    def window_length(self) -> int:
        return len(self._tokens)

    def step(self, keypoints, cloud) -> np.ndarray:
        """Append one observed frame and emit the next-frame prediction.

        None for either input marks the frame as missing: the window is not
        advanced and the previous prediction is replayed with a warning.
        Each frame is tokenized once on arrival and the token cached, so a
        step costs one frame encoding plus one transformer pass.
        """
        if keypoints is None or cloud is None:
            if self._last_prediction is None:
                raise ValueError(
                    "missing observation before any prediction was made")
            logger.warning(
                "missing observation frame; reusing previous prediction")
            return self._last_prediction.copy()
        self._tokens.append(self.model.frame_token(keypoints, cloud))
        if len(self._tokens) > self.model.cfg.context:
            del self._tokens[0]
        pred = self.model.predict_from_tokens(np.stack(self._tokens),
                                              self.goal)
        self._last_prediction = pred
        return pred.copy()


class BatchedClosedLoopPredictor:
    """Convenience wrapper stepping one predictor per environment.

    Inference runs per environment rather than as one stacked matmul: BLAS
    GEMM kernels pick different reduction blockings for different batch row
    counts, so a stacked forward would not be bit-identical to stepping each
    environment alone. Keeping the loop makes the equality exact.
    """

    def __init__(self, model: MotionPredictor, goals) -> None:
        self.predictors = [ClosedLoopPredictor(model, g) for g in goals]

    def __len__(self) -> int:
        return len(self.predictors)

    def reset(self, index: int, goal: int | None = None) -> None:
        self.predictors[index].reset(goal)

    def step(self, keypoints, clouds) -> np.ndarray:
        """keypoints: (B, d, 3) or list with None for missing frames."""
        preds = [p.step(k, c)
                 for p, k, c in zip(self.predictors, keypoints, clouds)]
        return np.stack(preds)


def closed_loop_drift(model: MotionPredictor, record: TrajectoryRecord,
                      start: int, horizon: int) -> float:
    """Mean keypoint error after feeding predictions back as inputs.

    Seeds a full context window from the record, then for `horizon` steps
    replaces the keypoint input with the model's previous output while still
    reading the recorded clouds. Returns the mean over steps of the mean
    per-keypoint Euclidean distance to the recorded frames.
    """
    L = model.cfg.context
    if start < 0 or start + L + horizon > record.n_frames:
        raise ValueError(
            f"window [{start}, {start + L + horizon}) exceeds record length "
            f"{record.n_frames}")
    loop = ClosedLoopPredictor(model, record.goal)
    kps = record.keypoints.astype(float)
    clouds = record.clouds.astype(float)
    pred = None
    for t in range(start, start + L):
        pred = loop.step(kps[t], clouds[t])
    errors = np.empty(horizon)
    for i in range(horizon):
        t = start + L + i
        errors[i] = float(
            np.linalg.norm(pred - kps[t], axis=-1).mean())
        pred = loop.step(pred, clouds[t])
    return float(errors.mean())


def mean_drift(model: MotionPredictor, records, horizon: int = 30,
               rollouts_per_record: int = 1,
               rng: np.random.Generator | None = None) -> float:
    """Average closed-loop drift across records at a fixed horizon."""
    if rng is None:
        rng = np.random.default_rng(0)
    L = model.cfg.context
    values = []
    for rec in records:
        top = rec.n_frames - L - horizon
        if top < 0:
            continue
        for _ in range(rollouts_per_record):
            start = int(rng.integers(top + 1))
            values.append(closed_loop_drift(model, rec, start, horizon))
    if not values:
        raise ValueError("no record long enough for the requested horizon")
    return float(np.mean(values))
