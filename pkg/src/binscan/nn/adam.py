from __future__ import annotations

import numba
import numpy as np

from ..errors import ShapeMismatch


@numba.njit(cache=True)
def _adam_kernel(w, g, m, v, beta1, beta2, step_size, inv_sqrt_bc2, eps):
    # one fused pass; the 4.7M-entry fc matrix makes numpy temporaries costly
    for i in range(w.size):
        gi = g[i]
        mi = beta1 * m[i] + (1.0 - beta1) * gi
        vi = beta2 * v[i] + (1.0 - beta2) * (gi * gi)
        m[i] = mi
        v[i] = vi
        w[i] -= step_size * (mi / (np.sqrt(vi) * inv_sqrt_bc2 + eps))


class Adam:
    """Adam with bias correction, updating parameter arrays in place.

    w -= lr * (m / (1 - beta1**t)) / (sqrt(v / (1 - beta2**t)) + eps)
    """

    def __init__(self, lr: float = 1e-4, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        if lr <= 0:
            raise ValueError("learning rate must be positive")
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        for name, w in params.items():
            if grads[name].shape != w.shape:
                raise ShapeMismatch(f"gradient for {name} has shape {grads[name].shape}, expected {w.shape}")
            if not (w.flags.c_contiguous and w.dtype == np.float64):
                raise ValueError(f"parameter {name} must be a contiguous float64 array")
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        step_size = self.lr / bc1
        inv_sqrt_bc2 = 1.0 / np.sqrt(bc2)
        for name, w in params.items():
            if name not in self.m:
                self.m[name] = np.zeros_like(w)
                self.v[name] = np.zeros_like(w)
            g = np.ascontiguousarray(grads[name], dtype=np.float64)
            _adam_kernel(
                w.reshape(-1), g.reshape(-1), self.m[name].reshape(-1), self.v[name].reshape(-1),
                self.beta1, self.beta2, step_size, inv_sqrt_bc2, self.eps,
            )
