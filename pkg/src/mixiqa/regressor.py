"""Dataset-shared quality regressor: bilinear pooling + a small MLP head.

A (c, l) feature map is pooled into its (c, c) Gram matrix, flattened, and
regressed to a single scalar by three dense layers with ReLU after the first
two. One head serves every dataset; the per-dataset calibrators never enter
this path, so test-time prediction depends on the head alone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError
from .layers import (
    DualBuffer,
    as_matrix,
    bilinear_pool,
    bilinear_pool_backward,
    linear_backward,
    linear_forward,
    relu,
    relu_backward,
)

_SQRT_THRESH = 1e-12  # keeps the signed-sqrt derivative finite at 0


@dataclass
class RegressorHead:
    """Three dense layers (ReLU after the first two, scalar output)."""

    channels: int
    fc1_w: DualBuffer
    fc1_b: DualBuffer
    fc2_w: DualBuffer
    fc2_b: DualBuffer
    fc3_w: DualBuffer
    fc3_b: DualBuffer
    normalize_pooled: bool = False

    def parameters(self) -> list[DualBuffer]:
        return [self.fc1_w, self.fc1_b, self.fc2_w, self.fc2_b, self.fc3_w, self.fc3_b]

    @property
    def flat_dim(self) -> int:
        return self.channels * self.channels


def head_init(
    channels: int,
    h1: int = 128,
    h2: int = 64,
    seed: int = 0,
    normalize_pooled: bool = False,
) -> RegressorHead:
    """Symmetric uniform init in +/- sqrt(6 / (fan_in + fan_out)), zero biases."""
    if channels < 1 or h1 < 1 or h2 < 1:
        raise ConfigError(f"head dims must be >= 1, got channels={channels}, h1={h1}, h2={h2}")
    rng = np.random.default_rng(seed)
    d = channels * channels

    def xavier(fan_in: int, fan_out: int, name: str) -> DualBuffer:
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        return DualBuffer.of(rng.uniform(-bound, bound, size=(fan_in, fan_out)), name=name)

    def zeros(width: int, name: str) -> DualBuffer:
        return DualBuffer.of(np.zeros((1, width)), name=name)

    return RegressorHead(
        channels=channels,
        fc1_w=xavier(d, h1, "fc1.w"),
        fc1_b=zeros(h1, "fc1.b"),
        fc2_w=xavier(h1, h2, "fc2.w"),
        fc2_b=zeros(h2, "fc2.b"),
        fc3_w=xavier(h2, 1, "fc3.w"),
        fc3_b=zeros(1, "fc3.b"),
        normalize_pooled=normalize_pooled,
    )


# ---------------------------------------------------------------------------
# pooling + flatten (with the optional normalization, off by default)
# ---------------------------------------------------------------------------

def pool_and_flatten(f: np.ndarray, normalize: bool = False) -> np.ndarray:
    """Bilinear-pool a (c, l) map and flatten row-major to (c*c,).

    With ``normalize`` the flattened vector gets a signed square root and L2
    normalization; the plain Gram flatten is the default.
    """
    pooled = bilinear_pool(f)
    flat = pooled.reshape(-1)
    if normalize:
        flat = np.sign(flat) * np.sqrt(np.abs(flat) + _SQRT_THRESH)
        flat = flat / np.linalg.norm(flat)
    return flat


def pool_and_flatten_backward(
    f: np.ndarray, upstream_flat: np.ndarray, normalize: bool = False
) -> np.ndarray:
    """Gradient of pool_and_flatten with respect to the raw feature map."""
    f = as_matrix(f, "F")
    c = f.shape[0]
    g = np.asarray(upstream_flat, dtype=np.float64).reshape(-1)
    if g.size != c * c:
        raise DimensionError(f"pooled upstream has {g.size} entries, expected {c * c}")
    if normalize:
        pooled = bilinear_pool(f).reshape(-1)
        s = np.sign(pooled) * np.sqrt(np.abs(pooled) + _SQRT_THRESH)
        norm = np.linalg.norm(s)
        # through the L2 normalization: g_s = (g - (g . s_hat) s_hat) / norm
        s_hat = s / norm
        g_s = (g - np.dot(g, s_hat) * s_hat) / norm
        # through the signed sqrt: d s / d pooled = 1 / (2 sqrt(|pooled| + eps))
        g = g_s * 0.5 / np.sqrt(np.abs(pooled) + _SQRT_THRESH)
    return bilinear_pool_backward(f, g.reshape(c, c))


# ---------------------------------------------------------------------------
# head forward/backward over a batch of flattened pooled features
# ---------------------------------------------------------------------------

def head_forward(head: RegressorHead, x: np.ndarray) -> tuple[np.ndarray, dict]:
    """Regress a batch of flattened pooled features (n, c*c) to qualities (n,)."""
    x = as_matrix(x, "pooled features")
    if x.shape[1] != head.flat_dim:
        raise DimensionError(
            f"head expects {head.flat_dim} pooled features (c={head.channels}), got {x.shape[1]}"
        )
    z1 = linear_forward(x, head.fc1_w.value, head.fc1_b.value)
    a1 = relu(z1)
    z2 = linear_forward(a1, head.fc2_w.value, head.fc2_b.value)
    a2 = relu(z2)
    qp = linear_forward(a2, head.fc3_w.value, head.fc3_b.value)
    cache = {"x": x, "z1": z1, "a1": a1, "z2": z2, "a2": a2}
    return qp[:, 0], cache


def head_backward(head: RegressorHead, cache: dict, upstream: np.ndarray) -> np.ndarray:
    """Accumulate parameter gradients from dL/dqp; return dL/dx (n, c*c)."""
    g = np.asarray(upstream, dtype=np.float64).reshape(-1, 1)
    ga2, gw3, gb3 = linear_backward(cache["a2"], head.fc3_w.value, g)
    head.fc3_w.grad += gw3
    head.fc3_b.grad += gb3
    gz2 = relu_backward(cache["z2"], ga2)
    ga1, gw2, gb2 = linear_backward(cache["a1"], head.fc2_w.value, gz2)
    head.fc2_w.grad += gw2
    head.fc2_b.grad += gb2
    gz1 = relu_backward(cache["z1"], ga1)
    gx, gw1, gb1 = linear_backward(cache["x"], head.fc1_w.value, gz1)
    head.fc1_w.grad += gw1
    head.fc1_b.grad += gb1
    return gx


def regressor_forward(head: RegressorHead, f: np.ndarray) -> float:
    """Pool a raw (c, l) feature map and regress it to one quality scalar."""
    f = as_matrix(f, "F")
    if f.shape[0] != head.channels:
        raise DimensionError(
            f"feature map has {f.shape[0]} channels, head is configured for {head.channels}"
        )
    flat = pool_and_flatten(f, head.normalize_pooled)
    qp, _ = head_forward(head, flat.reshape(1, -1))
    return float(qp[0])


def regressor_forward_batch(head: RegressorHead, features: list[np.ndarray]) -> np.ndarray:
    """Per-sample regression of a batch of raw feature maps."""
    flats = np.stack([pool_and_flatten(as_matrix(f, "F"), head.normalize_pooled) for f in features])
    if flats.shape[1] != head.flat_dim:
        raise DimensionError(
            f"feature maps have {flats.shape[1]} pooled entries, head expects {head.flat_dim}"
        )
    qp, _ = head_forward(head, flats)
    return qp
