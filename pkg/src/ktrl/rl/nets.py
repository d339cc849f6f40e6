"""Actor and critic networks over point clouds and proprioception."""

from __future__ import annotations

import numpy as np

from ..nn import ops
from ..nn.layers import Affine, Mlp, Module, PointNetEncoder
from ..nn.tensor import Tensor, no_grad

LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0

_LOG_2PI = float(np.log(2.0 * np.pi))


def gaussian_log_prob(action: np.ndarray, mean: np.ndarray,
                      log_std: np.ndarray) -> float:
    """Diagonal Gaussian log density, plain numpy."""
    a = np.asarray(action, float)
    m = np.asarray(mean, float)
    ls = np.asarray(log_std, float)
    z = (a - m) * np.exp(-ls)
    return float(-0.5 * np.sum(z * z) - np.sum(ls) - 0.5 * a.size * _LOG_2PI)


class PolicyNet(Module):
    """Gaussian policy: point-cloud encoder + proprio pathway + MLP trunk.

    The action mean comes from a four-layer trunk of width ``hidden``; the
    log standard deviation is a free per-coordinate parameter independent
    of the observation, clamped to [LOG_STD_MIN, LOG_STD_MAX].
    """

    def __init__(self, proprio_dim: int, action_dim: int,
                 rng: np.random.Generator, *, cloud_width: int = 64,
                 pointnet_hidden: tuple[int, int] = (32, 32),
                 hidden: int = 128, init_log_std: float = -0.5):
        if proprio_dim < 1 or action_dim < 1:
            raise ValueError("proprio_dim and action_dim must be >= 1")
        self.proprio_dim = proprio_dim
        self.action_dim = action_dim
        self.encoder = PointNetEncoder(cloud_width, rng, hidden=pointnet_hidden)
        self.proprio_fc = Affine(proprio_dim, cloud_width, rng)
        # 4 affine layers: in -> hidden -> hidden -> hidden -> action_dim
        self.trunk = Mlp([2 * cloud_width, hidden, hidden, hidden, action_dim],
                         rng, out_scale=0.01)
        self.log_std = Tensor(np.full(action_dim, float(init_log_std)),
                              requires_grad=True)

    def clamped_log_std(self) -> Tensor:
        return ops.clip(self.log_std, LOG_STD_MIN, LOG_STD_MAX)

    def project_log_std(self) -> None:
        """Pull the raw parameter back into the clamp band in place."""
        np.clip(self.log_std.data, LOG_STD_MIN, LOG_STD_MAX,
                out=self.log_std.data)

    def mean_action(self, proprio, cloud) -> Tensor:
        feats = ops.concat(
            [self.encoder(cloud), ops.relu(self.proprio_fc(proprio))], axis=-1)
        return self.trunk(feats)

    def act(self, proprio, cloud, rng: np.random.Generator, *,
            deterministic: bool = False) -> tuple[np.ndarray, float]:
        """Sample one action; returns (action, log-prob of that action)."""
        with no_grad():
            mean = self.mean_action(proprio, cloud).data
        log_std = np.clip(self.log_std.data, LOG_STD_MIN, LOG_STD_MAX)
        if deterministic:
            action = mean.copy()
        else:
            noise = rng.standard_normal(self.action_dim)
            action = mean + np.exp(log_std) * noise
        return action, gaussian_log_prob(action, mean, log_std)

    def evaluate(self, proprio, clouds, actions) -> tuple[Tensor, Tensor]:
        """Log-probs of given actions and the policy entropy, with gradients.

        ``actions`` is (B, action_dim); returns ((B,), scalar).
        """
        mean = self.mean_action(proprio, clouds)
        ls = self.clamped_log_std()
        inv_std = ops.exp(ops.neg(ls))
        z = ops.mul(ops.sub(actions, mean), inv_std)
        quad = ops.sum_(ops.mul(z, z), axis=-1)
        const = 0.5 * self.action_dim * _LOG_2PI
        logp = ops.neg(ops.add(ops.add(ops.mul(quad, 0.5), ops.sum_(ls)),
                               const))
        entropy = ops.add(ops.sum_(ls),
                          0.5 * self.action_dim * (1.0 + _LOG_2PI))
        return logp, entropy


class ValueNet(Module):
    """State-value critic with privileged fingertip-to-target distances.

    Same encoder family as the policy, but the proprio pathway additionally
    consumes features the actor never sees.
    """

    def __init__(self, proprio_dim: int, privileged_dim: int,
                 rng: np.random.Generator, *, cloud_width: int = 64,
                 pointnet_hidden: tuple[int, int] = (32, 32),
                 hidden: int = 128):
        if proprio_dim < 1 or privileged_dim < 1:
            raise ValueError("proprio_dim and privileged_dim must be >= 1")
        self.proprio_dim = proprio_dim
        self.privileged_dim = privileged_dim
        self.encoder = PointNetEncoder(cloud_width, rng, hidden=pointnet_hidden)
        self.proprio_fc = Affine(proprio_dim + privileged_dim, cloud_width, rng)
        self.trunk = Mlp([2 * cloud_width, hidden, hidden, hidden, 1], rng)

    def forward(self, proprio, clouds, privileged) -> Tensor:
        pp = ops.concat([_as_tensor(proprio), _as_tensor(privileged)], axis=-1)
        feats = ops.concat(
            [self.encoder(clouds), ops.relu(self.proprio_fc(pp))], axis=-1)
        out = self.trunk(feats)
        new_shape = out.data.shape[:-1]
        return ops.reshape(out, new_shape)

    def predict(self, proprio, cloud, privileged) -> float:
        with no_grad():
            return float(self.forward(proprio, cloud, privileged).data)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, float))
