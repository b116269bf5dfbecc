"""Adam with bias correction, tracked per parameter tensor.

Each tensor keeps its own step count, so parameters that receive no gradient
in a batch (the other datasets' calibrators) are left bitwise untouched
instead of drifting on stale moments.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError, DimensionError
from .layers import DualBuffer


def adam_step(
    param: np.ndarray,
    grad: np.ndarray,
    m: np.ndarray,
    v: np.ndarray,
    t: int,
    lr: float,
    betas: tuple[float, float] = (0.9, 0.999),
    eps: float = 1e-8,
) -> None:
    """One in-place bias-corrected update; t is the 1-based step count."""
    if t < 1:
        raise ConfigError(f"adam_step: t must be >= 1, got {t}")
    if not (param.shape == grad.shape == m.shape == v.shape):
        raise DimensionError(
            f"adam_step: shapes differ (param {param.shape}, grad {grad.shape})"
        )
    b1, b2 = betas
    m *= b1
    m += (1.0 - b1) * grad
    v *= b2
    v += (1.0 - b2) * grad * grad
    m_hat = m / (1.0 - b1**t)
    v_hat = v / (1.0 - b2**t)
    param -= lr * m_hat / (np.sqrt(v_hat) + eps)


class Adam:
    """Optimizer over DualBuffers; step() consumes and clears their grads."""

    def __init__(
        self,
        params: list[DualBuffer],
        lr: float,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
    ):
        if lr <= 0:
            raise ConfigError(f"learning rate must be > 0, got {lr}")
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self._state: dict[int, tuple[DualBuffer, np.ndarray, np.ndarray, list[int]]] = {}
        for p in params:
            self._state[id(p)] = (p, np.zeros_like(p.value), np.zeros_like(p.value), [0])

    def step(self, active: list[DualBuffer] | None = None) -> None:
        buffers = active if active is not None else [s[0] for s in self._state.values()]
        for p in buffers:
            if id(p) not in self._state:
                raise ConfigError(f"buffer {p.name!r} is not managed by this optimizer")
            _, m, v, t = self._state[id(p)]
            t[0] += 1
            adam_step(p.value, p.grad, m, v, t[0], self.lr, self.betas, self.eps)
            p.zero_grad()
