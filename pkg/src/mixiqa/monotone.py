"""Per-dataset monotone calibrator: a stack of positively-constrained dense layers.

Each layer stores an unconstrained matrix ``theta`` and exposes the effective
weight ``softplus(theta) + EPS_W``, which is >= EPS_W > 0 for every value of
theta. A composition of layers with strictly positive weights and a strictly
increasing activation (ELU) is strictly increasing end to end, so the map
from the shared quality scale to a dataset's score scale can never reorder
inputs, whatever the optimizer does to theta.

Positivity is a reparameterization, not a projection: there is no clipping
step to interact with optimizer updates, the invariant holds identically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError, NumericError
from .layers import DualBuffer, elu, elu_backward

EPS_W = 1e-6

SUPPORTED_DEPTHS = (3, 5, 7)

# Hidden widths per supported depth. The scalar-to-scalar task needs little
# width; these stay narrow enough that ELU saturation at the ends of the
# input range cannot flatten output gaps below float64 resolution.
DEFAULT_WIDTHS = {
    1: [1, 1],
    3: [1, 16, 16, 1],
    5: [1, 8, 16, 16, 8, 1],
    7: [1, 8, 8, 8, 8, 8, 8, 1],
}

_INIT_THETA_STD = 0.3  # mean softplus(theta) stays ~softplus(0) = 0.693


def softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, np.asarray(x, dtype=np.float64))


def softplus_inverse(y: np.ndarray) -> np.ndarray:
    """Inverse of softplus for y > 0, stable for large y."""
    y = np.asarray(y, dtype=np.float64)
    if np.any(y <= 0):
        raise NumericError("softplus_inverse: argument must be positive")
    small = y < 20.0
    out = np.empty_like(y)
    out[small] = np.log(np.expm1(y[small]))
    out[~small] = y[~small] + np.log1p(-np.exp(-y[~small]))
    return out


def sigmoid(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass
class CfclLayer:
    """Constrained dense layer: effective weight = softplus(theta) + EPS_W."""

    theta: DualBuffer
    bias: DualBuffer

    @property
    def weight(self) -> np.ndarray:
        return softplus(self.theta.value) + EPS_W


def default_widths(depth: int) -> list[int]:
    if depth not in DEFAULT_WIDTHS:
        raise ConfigError(f"no default widths for depth {depth}; pass widths explicitly")
    return list(DEFAULT_WIDTHS[depth])


class MonotonicTransformer:
    """Strictly increasing scalar map built from CfclLayers with ELUs between.

    No activation follows the final layer, so the output range is unbounded
    and can cover the whole rescaled score interval.
    """

    def __init__(self, layers: list[CfclLayer], alpha: float = 1.0):
        if not layers:
            raise ConfigError("transformer needs at least one layer")
        if not alpha > 0:
            raise ConfigError(f"ELU alpha must be > 0, got {alpha}")
        if layers[0].theta.shape[0] != 1 or layers[-1].theta.shape[1] != 1:
            raise ConfigError("first layer must have d_in=1 and last layer d_out=1")
        self.layers = layers
        self.alpha = alpha

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def widths(self) -> list[int]:
        return [self.layers[0].theta.shape[0]] + [l.theta.shape[1] for l in self.layers]

    def parameters(self) -> list[DualBuffer]:
        out = []
        for layer in self.layers:
            out.append(layer.theta)
            out.append(layer.bias)
        return out

    # -- forward ------------------------------------------------------------

    def forward(self, qp: np.ndarray) -> np.ndarray:
        """Map a vector of shared-scale qualities elementwise through the stack."""
        out, _ = self.forward_cached(qp)
        return out

    def forward_cached(self, qp: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        qp = np.asarray(qp, dtype=np.float64)
        if not np.all(np.isfinite(qp)):
            raise NumericError("transformer forward: non-finite input")
        a = qp.reshape(-1, 1)
        cache: list[np.ndarray] = []  # [a0, z1, a1, z2, a2, ..., zK]
        cache.append(a)
        for i, layer in enumerate(self.layers):
            z = a @ layer.weight + layer.bias.value
            cache.append(z)
            if i < len(self.layers) - 1:
                a = elu(z, self.alpha)
                cache.append(a)
            else:
                a = z
        out = a.reshape(qp.shape) if qp.ndim < 2 else a
        return out, cache

    def __call__(self, qp: np.ndarray) -> np.ndarray:
        return self.forward(qp)

    # -- gradients ----------------------------------------------------------

    def grad_input(self, qp: np.ndarray) -> np.ndarray:
        """d output / d input at each point; strictly positive by construction."""
        qp = np.asarray(qp, dtype=np.float64)
        _, cache = self.forward_cached(qp)
        n = cache[0].shape[0]
        g = np.ones((n, 1))
        for i in range(len(self.layers) - 1, -1, -1):
            g = g @ self.layers[i].weight.T
            if i > 0:
                z_prev = cache[2 * i - 1]
                g = g * np.where(z_prev > 0, 1.0, self.alpha * np.exp(np.minimum(z_prev, 0.0)))
        return g.reshape(qp.shape) if qp.ndim < 2 else g

    def backward(self, cache: list[np.ndarray], upstream: np.ndarray) -> np.ndarray:
        """Accumulate parameter gradients into the DualBuffers; return dL/dinput.

        The softplus reparameterization contributes a sigmoid(theta) factor
        between the effective-weight gradient and dL/dtheta.
        """
        g = np.asarray(upstream, dtype=np.float64).reshape(-1, 1)
        if g.shape[0] != cache[0].shape[0]:
            raise DimensionError(
                f"transformer backward: upstream rows {g.shape[0]} != batch {cache[0].shape[0]}"
            )
        for i in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[i]
            a_prev = cache[2 * i]
            layer.bias.grad += g.sum(axis=0, keepdims=True)
            grad_w = a_prev.T @ g
            layer.theta.grad += grad_w * sigmoid(layer.theta.value)
            g = g @ layer.weight.T
            if i > 0:
                z_prev = cache[2 * i - 1]
                g = elu_backward(z_prev, g, self.alpha)
        return g


def transformer_init(
    depth: int = 5,
    widths: list[int] | None = None,
    seed: int = 0,
    alpha: float = 1.0,
    allow_any_depth: bool = False,
) -> MonotonicTransformer:
    """Build a transformer with seeded zero-mean theta and zero biases.

    Depth is restricted to the ablation grid {3, 5, 7} unless
    ``allow_any_depth`` is set. Initial effective weights average roughly
    softplus(0) = 0.693.
    """
    if depth not in SUPPORTED_DEPTHS and not allow_any_depth:
        raise ConfigError(
            f"depth {depth} is outside the supported grid {SUPPORTED_DEPTHS}; "
            f"pass allow_any_depth=True to override"
        )
    if depth < 1:
        raise ConfigError(f"depth must be >= 1, got {depth}")
    if widths is None:
        widths = default_widths(depth)
    if len(widths) != depth + 1:
        raise ConfigError(f"widths {widths} inconsistent with depth {depth} (need {depth + 1})")
    if widths[0] != 1 or widths[-1] != 1:
        raise ConfigError(f"widths {widths} must start and end at 1")
    if any(w < 1 for w in widths):
        raise ConfigError(f"widths {widths} must all be >= 1")

    rng = np.random.default_rng(seed)
    layers = []
    for i in range(depth):
        theta = rng.normal(0.0, _INIT_THETA_STD, size=(widths[i], widths[i + 1]))
        layers.append(
            CfclLayer(
                theta=DualBuffer.of(theta, name=f"layer{i}.theta"),
                bias=DualBuffer.of(np.zeros((1, widths[i + 1])), name=f"layer{i}.bias"),
            )
        )
    return MonotonicTransformer(layers, alpha=alpha)


def min_effective_weight(t: MonotonicTransformer) -> float:
    return min(float(layer.weight.min()) for layer in t.layers)
