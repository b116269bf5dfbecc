"""Dense-layer math with hand-derived backward passes.

Everything here is float64 and purely functional: a forward function computes
the value, the matching ``*_backward`` function turns an upstream gradient
into gradients for each input. The analytic formulas are checked against
central finite differences (see :func:`finite_diff_check`), which is the
oracle the rest of the package leans on.

No tape, no graph: the model only ever needs this fixed set of layers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, DimensionError, NumericError


def as_matrix(x, name: str = "matrix") -> np.ndarray:
    """Coerce to a 2-D float64 C-ordered array, validating the shape."""
    a = np.asarray(x, dtype=np.float64, order="C")
    if a.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {a.shape}")
    return a


def require_finite(a: np.ndarray, name: str = "matrix") -> np.ndarray:
    if not np.all(np.isfinite(a)):
        raise NumericError(f"{name} contains non-finite entries")
    return a


@dataclass
class DualBuffer:
    """A parameter matrix paired with its gradient accumulator."""

    value: np.ndarray
    grad: np.ndarray
    name: str = ""

    @classmethod
    def of(cls, value, name: str = "") -> "DualBuffer":
        v = as_matrix(value, name or "value")
        return cls(value=v, grad=np.zeros_like(v), name=name)

    def zero_grad(self) -> None:
        self.grad[...] = 0.0

    @property
    def shape(self) -> tuple[int, int]:
        return self.value.shape  # type: ignore[return-value]


# ---------------------------------------------------------------------------
# linear layer: out = x @ w + b
# ---------------------------------------------------------------------------

def linear_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    x = as_matrix(x, "x")
    w = as_matrix(w, "w")
    b = as_matrix(b, "b")
    if x.shape[1] != w.shape[0]:
        raise DimensionError(f"linear_forward: x {x.shape} does not conform with w {w.shape}")
    if b.shape != (1, w.shape[1]):
        raise DimensionError(f"linear_forward: b {b.shape} must be (1, {w.shape[1]})")
    return x @ w + b


def linear_backward(
    x: np.ndarray, w: np.ndarray, upstream: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of ``x @ w + b`` given dL/dout.

    Returns (grad_x, grad_w, grad_b); grad_b sums the upstream over the
    batch axis.
    """
    x = as_matrix(x, "x")
    w = as_matrix(w, "w")
    g = as_matrix(upstream, "upstream")
    if g.shape != (x.shape[0], w.shape[1]):
        raise DimensionError(
            f"linear_backward: upstream {g.shape} does not conform with x {x.shape} @ w {w.shape}"
        )
    grad_x = g @ w.T
    grad_w = x.T @ g
    grad_b = g.sum(axis=0, keepdims=True)
    return grad_x, grad_w, grad_b


# ---------------------------------------------------------------------------
# activations
# ---------------------------------------------------------------------------

def elu(x: np.ndarray, alpha: float = 1.0) -> np.ndarray:
    """Exponential linear unit: x for x > 0, alpha*(exp(x)-1) otherwise.

    Strictly increasing for any alpha > 0; continuous at 0, and C1 there
    when alpha == 1.
    """
    if not alpha > 0:
        raise ConfigError(f"elu: alpha must be > 0, got {alpha}")
    x = np.asarray(x, dtype=np.float64)
    return np.where(x > 0, x, alpha * np.expm1(np.minimum(x, 0.0)))


def elu_backward(x: np.ndarray, upstream: np.ndarray, alpha: float = 1.0) -> np.ndarray:
    if not alpha > 0:
        raise ConfigError(f"elu_backward: alpha must be > 0, got {alpha}")
    x = np.asarray(x, dtype=np.float64)
    g = np.asarray(upstream, dtype=np.float64)
    if g.shape != x.shape:
        raise DimensionError(f"elu_backward: upstream {g.shape} does not match x {x.shape}")
    deriv = np.where(x > 0, 1.0, alpha * np.exp(np.minimum(x, 0.0)))
    return g * deriv


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(np.asarray(x, dtype=np.float64), 0.0)


def relu_backward(x: np.ndarray, upstream: np.ndarray) -> np.ndarray:
    # subgradient at exactly 0 is defined as 0
    x = np.asarray(x, dtype=np.float64)
    g = np.asarray(upstream, dtype=np.float64)
    if g.shape != x.shape:
        raise DimensionError(f"relu_backward: upstream {g.shape} does not match x {x.shape}")
    return g * (x > 0)


# ---------------------------------------------------------------------------
# bilinear pooling: F -> F @ F.T  (channel-by-channel interactions)
# ---------------------------------------------------------------------------

def bilinear_pool(f: np.ndarray) -> np.ndarray:
    """Second-order pooling of a (c, l) feature map into a (c, c) Gram matrix.

    The output is symmetrized explicitly so that symmetry holds bitwise, and
    it is positive semidefinite by construction.
    """
    f = as_matrix(f, "F")
    out = f @ f.T
    return 0.5 * (out + out.T)


def bilinear_pool_backward(f: np.ndarray, upstream: np.ndarray) -> np.ndarray:
    f = as_matrix(f, "F")
    g = as_matrix(upstream, "upstream")
    c = f.shape[0]
    if g.shape != (c, c):
        raise DimensionError(f"bilinear_pool_backward: upstream {g.shape} must be ({c}, {c})")
    # d(F F^T)/dF contracted with G is (G + G^T) F; the explicit 0.5
    # symmetrization in the forward pass leaves this unchanged.
    return (g + g.T) @ f


# ---------------------------------------------------------------------------
# finite-difference gradient verification
# ---------------------------------------------------------------------------

@dataclass
class GradCheckReport:
    """Outcome of comparing analytic gradients against central differences."""

    max_rel_err: float
    tolerance: float
    n_entries: int
    worst_param: int = -1
    worst_index: tuple = field(default_factory=tuple)

    @property
    def passed(self) -> bool:
        return self.max_rel_err <= self.tolerance


def finite_diff_check(
    f: Callable[[Sequence[np.ndarray]], float],
    params: Sequence[np.ndarray],
    analytic: Sequence[np.ndarray],
    step: float = 1e-5,
    tolerance: float = 1e-4,
    denom_floor: float = 1e-3,
) -> GradCheckReport:
    """Compare analytic gradients with central finite differences.

    ``f`` maps the parameter list to a scalar; ``analytic`` holds dL/dp for
    each parameter, evaluated at ``params``. Every entry is perturbed by
    +/- ``step`` and the relative error |a - n| / max(|a|, |n|, denom_floor)
    is recorded. The floor keeps round-off noise on near-zero entries from
    masquerading as disagreement while still flagging absolute deviations
    above tolerance * denom_floor.

    A zero-parameter model yields an empty, passing report.
    """
    if not step > 0:
        raise ConfigError(f"finite_diff_check: step must be > 0, got {step}")
    if len(params) != len(analytic):
        raise DimensionError(
            f"finite_diff_check: {len(params)} params but {len(analytic)} analytic gradients"
        )
    work = [np.array(p, dtype=np.float64) for p in params]
    base = float(f(work))
    if not np.isfinite(base):
        raise NumericError("finite_diff_check: objective is non-finite at the base point")

    max_rel = 0.0
    worst_param = -1
    worst_index: tuple = ()
    n_entries = 0
    for pi, (p, a) in enumerate(zip(work, analytic)):
        a = np.asarray(a, dtype=np.float64)
        if a.shape != p.shape:
            raise DimensionError(
                f"finite_diff_check: gradient shape {a.shape} does not match param {p.shape}"
            )
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = p[idx]
            p[idx] = orig + step
            hi = float(f(work))
            p[idx] = orig - step
            lo = float(f(work))
            p[idx] = orig
            if not (np.isfinite(hi) and np.isfinite(lo)):
                raise NumericError(
                    f"finite_diff_check: non-finite evaluation perturbing param {pi}{idx}"
                )
            numeric = (hi - lo) / (2.0 * step)
            an = float(a[idx])
            rel = abs(an - numeric) / max(abs(an), abs(numeric), denom_floor)
            n_entries += 1
            if rel > max_rel:
                max_rel = rel
                worst_param = pi
                worst_index = idx
    return GradCheckReport(
        max_rel_err=max_rel,
        tolerance=tolerance,
        n_entries=n_entries,
        worst_param=worst_param,
        worst_index=worst_index,
    )
