"""Teacher-forced training: noisy input windows, clean next-frame targets."""

from __future__ import annotations

import numpy as np

from ..humandata.dataset import TrajectoryRecord
from ..humandata.noise import add_input_noise
from ..nn import Adam, Tensor, no_grad, ops
from ..seeding import make_rng
from .config import PredictorConfig
from .model import MotionPredictor, one_hot


class PredictorTrainingError(RuntimeError):
    pass


def partition_by_cloud_size(records) -> dict[int, list[int]]:
    """Batches must share a cloud size; group record indices by point count."""
    parts: dict[int, list[int]] = {}
    for i, rec in enumerate(records):
        parts.setdefault(rec.clouds.shape[1], []).append(i)
    return parts


def sample_window_batch(records, parts: dict[int, list[int]], batch: int,
                        context: int, rng: np.random.Generator):
    """(record index, start frame) pairs drawn from one cloud-size group."""
    sizes = sorted(parts)
    weights = np.array([len(parts[s]) for s in sizes], dtype=float)
    group = sizes[int(rng.choice(len(sizes), p=weights / weights.sum()))]
    idx = parts[group]
    pairs = []
    for _ in range(batch):
        rec_idx = idx[int(rng.integers(len(idx)))]
        max_start = records[rec_idx].n_frames - context - 1
        pairs.append((rec_idx, int(rng.integers(max_start + 1))))
    return pairs


def assemble_batch(records, pairs, context: int, sigma: float,
                   noise_rng: np.random.Generator):
    """Stack windows; noise goes on the inputs, targets stay clean."""
    kps_in, targets, clouds, goals = [], [], [], []
    for rec_idx, start in pairs:
        rec = records[rec_idx]
        window = rec.keypoints[start:start + context].astype(float)
        nxt = rec.keypoints[start + 1:start + context + 1].astype(float)
        kps_in.append(add_input_noise(window, sigma, noise_rng))
        targets.append(nxt)
        clouds.append(rec.clouds[start:start + context].astype(float))
        goals.append(rec.goal)
    b = len(pairs)
    kps_in = np.asarray(kps_in).reshape(b, context, -1)
    targets = np.asarray(targets).reshape(b, context, -1)
    return kps_in, targets, np.asarray(clouds), np.asarray(goals)


def train_predictor(records: list[TrajectoryRecord], cfg: PredictorConfig,
                    seed: int, on_step=None):
    """Returns (model, info) where info carries the per-step loss curve."""
    if not records:
        raise PredictorTrainingError("empty dataset")
    for i, rec in enumerate(records):
        if rec.n_frames < cfg.context + 1:
            raise PredictorTrainingError(
                f"record {i} has {rec.n_frames} frames; need >= "
                f"{cfg.context + 1}")

    model = MotionPredictor(cfg, make_rng(seed, 0))
    sample_rng = make_rng(seed, 1)
    noise_rng = make_rng(seed, 2)
    opt = Adam(model.parameters(), lr=cfg.learning_rate)
    parts = partition_by_cloud_size(records)

    curve = np.empty(cfg.steps)
    for step in range(cfg.steps):
        if cfg.lr_schedule == "cosine":
            opt.lr = cfg.learning_rate * 0.5 * (
                1.0 + np.cos(np.pi * step / cfg.steps))
        pairs = sample_window_batch(records, parts, cfg.batch_size,
                                    cfg.context, sample_rng)
        kps_in, targets, clouds, goals = assemble_batch(
            records, pairs, cfg.context, cfg.sigma, noise_rng)
        pred = model.forward_all(Tensor(kps_in), Tensor(clouds),
                                 Tensor(one_hot(goals, cfg.goal_vocab)))
        loss = ops.mse_loss(pred, targets)
        value = loss.item()
        if not np.isfinite(value):
            raise PredictorTrainingError(
                f"non-finite training loss {value} at step {step}")
        model.zero_grad()
        loss.backward()
        opt.step()
        curve[step] = value
        if on_step is not None:
            on_step(step, value)
    return model, {"loss_curve": curve, "final_loss": float(curve[-1])}


def eval_teacher_forced_mse(model: MotionPredictor, records, seed: int,
                            n_windows: int = 256) -> float:
    """Clean-input single-step MSE over randomly sampled windows."""
    cfg = model.cfg
    rng = make_rng(seed, 3)
    parts = partition_by_cloud_size(records)
    total, count = 0.0, 0
    remaining = n_windows
    while remaining > 0:
        batch = min(remaining, 32)
        pairs = sample_window_batch(records, parts, batch, cfg.context, rng)
        kps_in, targets, clouds, goals = assemble_batch(
            records, pairs, cfg.context, 0.0, rng)
        with no_grad():
            pred = model.forward_all(Tensor(kps_in), Tensor(clouds),
                                     Tensor(one_hot(goals, cfg.goal_vocab)))
        total += float(np.sum((pred.data - targets) ** 2))
        count += targets.size
        remaining -= batch
    return total / count
