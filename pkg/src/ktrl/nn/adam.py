"""Bias-corrected Adam over named parameter dicts."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor


class NonFiniteGradientError(RuntimeError):
    """Raised when a step sees a NaN/inf gradient; parameters are untouched."""


class Adam:
    def __init__(self, params: dict[str, Tensor], lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = dict(params)
        self.lr = float(lr)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = {k: np.zeros_like(p.data) for k, p in self.params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in self.params.items()}
        # scratch buffers so step() allocates nothing
        self._s1 = {k: np.empty_like(p.data) for k, p in self.params.items()}
        self._s2 = {k: np.empty_like(p.data) for k, p in self.params.items()}

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def step(self):
        """Apply one update; rejects the whole step on any non-finite gradient."""
        grads = {}
        for k, p in self.params.items():
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            if not np.all(np.isfinite(g)):
                raise NonFiniteGradientError(f"non-finite gradient in parameter {k!r}")
            grads[k] = g
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for k, p in self.params.items():
            g = grads[k]
            m, v, s1, s2 = self.m[k], self.v[k], self._s1[k], self._s2[k]
            np.multiply(m, self.beta1, out=m)
            np.multiply(g, 1.0 - self.beta1, out=s1)
            np.add(m, s1, out=m)
            np.multiply(v, self.beta2, out=v)
            np.multiply(g, g, out=s1)
            np.multiply(s1, 1.0 - self.beta2, out=s1)
            np.add(v, s1, out=v)
            np.divide(v, c2, out=s1)           # vhat
            np.sqrt(s1, out=s1)
            np.add(s1, self.eps, out=s1)
            np.divide(m, c1, out=s2)           # mhat
            np.multiply(s2, self.lr, out=s2)
            np.divide(s2, s1, out=s2)
            np.subtract(p.data, s2, out=p.data)

    def state_dict(self) -> dict:
        return {
            "t": self.t,
            "lr": self.lr,
            "m": {k: v.copy() for k, v in self.m.items()},
            "v": {k: v.copy() for k, v in self.v.items()},
        }

    def load_state_dict(self, state: dict):
        self.t = int(state["t"])
        self.lr = float(state["lr"])
        for k in self.m:
            self.m[k] = np.asarray(state["m"][k]).copy()
            self.v[k] = np.asarray(state["v"][k]).copy()
