"""Per-group Adam optimizer over named numpy parameter arrays."""

from __future__ import annotations

import numpy as np


class Adam:
    def __init__(self, params: dict[str, np.ndarray],
                 learning_rates: dict[str, float],
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        missing = set(params) - set(learning_rates)
        if missing:
            raise ValueError(f"no learning rate for groups: {sorted(missing)}")
        self.params = params
        self.learning_rates = dict(learning_rates)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m = {k: np.zeros_like(v, dtype=np.float64) for k, v in params.items()}
        self._v = {k: np.zeros_like(v, dtype=np.float64) for k, v in params.items()}

    def step(self, grads: dict[str, np.ndarray],
             lr_scale: dict[str, float] | None = None):
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for name, g in grads.items():
            p = self.params[name]
            if g.shape != p.shape:
                raise ValueError(f"{name}: grad shape {g.shape} != param {p.shape}")
            m = self._m[name]
            v = self._v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            lr = self.learning_rates[name]
            if lr_scale and name in lr_scale:
                lr *= lr_scale[name]
            p -= (lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)).astype(p.dtype)
