"""Goal-conditioned causal transformer over keypoint + point-cloud tokens.

Per-frame token = keypoint affine + PointNet cloud encoding + learned
left-aligned position embedding + goal embedding. The output head reads the
final position only, giving the next-frame keypoint prediction.
"""

from __future__ import annotations

import numpy as np

from ..nn import Tensor, no_grad, ops
from ..nn.layers import Affine, LayerNorm, Module, PointNetEncoder, TransformerBlock
from .config import PredictorConfig


def one_hot(goal, vocab: int) -> np.ndarray:
    goal = np.asarray(goal, dtype=int)
    out = np.zeros((*goal.shape, vocab))
    np.put_along_axis(out.reshape(-1, vocab), goal.reshape(-1, 1), 1.0, axis=1)
    return out


class MotionPredictor(Module):
    def __init__(self, cfg: PredictorConfig, rng: np.random.Generator):
        self.cfg = cfg
        d3 = 3 * cfg.d_keypoints
        self.goal_table = Tensor(
            rng.normal(0.0, 0.02, (cfg.goal_vocab, cfg.width)),
            requires_grad=True)
        self.pos = Tensor(
            rng.normal(0.0, 0.02, (cfg.context, cfg.width)),
            requires_grad=True)
        self.tokenizer = Affine(d3, cfg.width, rng)
        self.cloud_encoder = PointNetEncoder(cfg.width, rng,
                                             hidden=cfg.pointnet_hidden)
        self.blocks = [
            TransformerBlock(cfg.width, cfg.heads, cfg.context, rng)
            for _ in range(cfg.layers)
        ]
        self.ln_f = LayerNorm(cfg.width)
        self.head = Affine(cfg.width, d3, rng, scale=0.1)

    # ------------------------------------------------------------ core

    def encode_cloud(self, points) -> Tensor:
        """Embed a cloud of 100*n_o points (permutation-invariant)."""
        pts = points.data if isinstance(points, Tensor) else np.asarray(points)
        n = pts.shape[-2]
        if n == 0 or n % self.cfg.points_per_object != 0:
            raise ValueError(
                f"cloud must hold a positive multiple of "
                f"{self.cfg.points_per_object} points, got {n}")
        return self.cloud_encoder(points)

    def forward_all(self, kps, clouds, goal_onehot) -> Tensor:
        """Predictions at every window position.

        kps: (..., T, 3d) keypoints flattened per frame; clouds:
        (..., T, P, 3); goal_onehot: (..., vocab). Returns (..., T, 3d) where
        position t is the next-frame prediction given frames 0..t.
        """
        kd = kps.data if isinstance(kps, Tensor) else np.asarray(kps)
        t = kd.shape[-2]
        if t == 0:
            raise ValueError("empty history window")
        if t > self.cfg.context:
            raise ValueError(
                f"window of {t} frames exceeds context {self.cfg.context}")
        kp_tok = self.tokenizer(kps)
        cl_tok = self.encode_cloud(clouds)
        pos = self.pos if t == self.cfg.context else ops.slice_time(
            self.pos, 0, t)
        goal_tok = ops.matmul(goal_onehot, self.goal_table)
        g = ops.reshape(goal_tok, (*goal_tok.shape[:-1], 1, goal_tok.shape[-1]))
        x = ops.add(ops.add(kp_tok, cl_tok), ops.add(pos, g))
        for block in self.blocks:
            x = block(x)
        return self.head(self.ln_f(x))

    # ------------------------------------------------------- inference

    def frame_token(self, keypoints, cloud) -> np.ndarray:
        """Width-dim token for one observed frame (keypoints + cloud).

        Inference tokenizes frame by frame so control loops can cache the
        token of each incoming frame instead of re-encoding the window.
        """
        kp = np.asarray(keypoints, float).reshape(3 * self.cfg.d_keypoints)
        with no_grad():
            tok = ops.add(self.tokenizer(Tensor(kp)),
                          self.encode_cloud(Tensor(np.asarray(cloud, float))))
        return tok.data

    def predict_from_tokens(self, tokens: np.ndarray, goal: int) -> np.ndarray:
        """Next-frame keypoints (d, 3) from stacked per-frame tokens."""
        t = tokens.shape[0]
        if t == 0:
            raise ValueError("empty history window")
        if t > self.cfg.context:
            raise ValueError(
                f"window of {t} frames exceeds context {self.cfg.context}")
        with no_grad():
            pos = self.pos if t == self.cfg.context else ops.slice_time(
                self.pos, 0, t)
            goal_tok = ops.matmul(Tensor(one_hot(goal, self.cfg.goal_vocab)),
                                  self.goal_table)
            x = ops.add(Tensor(tokens), ops.add(pos, goal_tok))
            for block in self.blocks:
                x = block(x)
            out = self.head(self.ln_f(x))
        return out.data[-1].reshape(self.cfg.d_keypoints, 3).copy()

    def predict_next(self, keypoints: np.ndarray, clouds: np.ndarray,
                     goal: int) -> np.ndarray:
        """Next-frame keypoints (d, 3) from a window of up to L frames."""
        clouds = np.asarray(clouds, float)
        kps = np.asarray(keypoints, float).reshape(clouds.shape[0], -1)
        tokens = np.stack([self.frame_token(k, c)
                           for k, c in zip(kps, clouds)])
        return self.predict_from_tokens(tokens, goal)
