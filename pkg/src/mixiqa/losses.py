"""Training losses over a single-dataset batch.

Two terms, combined with a weight ``lam``:

* smooth L1 between calibrated predictions and rescaled scores, mean over
  the batch: 0.5 d^2 for |d| < 1, |d| - 0.5 otherwise;
* a norm-in-norm term that standardizes both vectors by their batch mean
  and population standard deviation and penalizes half the squared gap
  between the z-scores. Standardization makes it invariant to positive
  affine maps of the predictions, so it trains shape and rank rather than
  absolute scale.

Gradients are fully analytic. The norm-in-norm gradient differentiates
through the batch statistics (no stop-gradient), which the finite-difference
oracle verifies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

SIGMA_FLOOR = 1e-8  # constant batches must not produce NaN


def _check_pair(qr, qm, min_n: int) -> tuple[np.ndarray, np.ndarray]:
    qr = np.asarray(qr, dtype=np.float64).reshape(-1)
    qm = np.asarray(qm, dtype=np.float64).reshape(-1)
    if qr.shape != qm.shape:
        raise ConfigError(f"score vectors differ in length: {qr.size} vs {qm.size}")
    if qr.size < min_n:
        raise ConfigError(f"batch of {qr.size} is too small (need >= {min_n})")
    return qr, qm


def batch_moments(x) -> tuple[float, float]:
    """Batch mean and population (divide-by-n) standard deviation."""
    x = np.asarray(x, dtype=np.float64)
    return float(x.mean()), float(x.std())


def smooth_l1(qr, qm) -> float:
    qr, qm = _check_pair(qr, qm, min_n=1)
    d = qr - qm
    ad = np.abs(d)
    per = np.where(ad < 1.0, 0.5 * d * d, ad - 0.5)
    return float(per.mean())


def smooth_l1_grad(qr, qm) -> np.ndarray:
    qr, qm = _check_pair(qr, qm, min_n=1)
    d = qr - qm
    return np.clip(d, -1.0, 1.0) / qr.size


def nin_loss(qr, qm) -> float:
    qr, qm = _check_pair(qr, qm, min_n=2)
    mu_r, sigma_r = batch_moments(qr)
    mu_m, sigma_m = batch_moments(qm)
    z_r = (qr - mu_r) / max(sigma_r, SIGMA_FLOOR)
    z_m = (qm - mu_m) / max(sigma_m, SIGMA_FLOOR)
    return float((0.5 * (z_r - z_m) ** 2).mean())


def nin_grad(qr, qm) -> np.ndarray:
    """dL/dqr including the dependence of mu_r and sigma_r on qr.

    With e = z_r - z_m and population sigma, the j-th component is
    (e_j - mean(e) - z_rj * mean(e * z_r)) / (n * sigma_r). When the sigma
    floor is active the statistic is a constant and only the first term
    survives.
    """
    qr, qm = _check_pair(qr, qm, min_n=2)
    n = qr.size
    mu_r, sigma_r = batch_moments(qr)
    mu_m, sigma_m = batch_moments(qm)
    s_r = max(sigma_r, SIGMA_FLOOR)
    z_r = (qr - mu_r) / s_r
    z_m = (qm - mu_m) / max(sigma_m, SIGMA_FLOOR)
    e = z_r - z_m
    if sigma_r > SIGMA_FLOOR:
        return (e - e.mean() - z_r * np.mean(e * z_r)) / (n * s_r)
    return (e - e.mean()) / (n * s_r)


@dataclass
class LossParts:
    total: float
    smooth_l1: float
    nin: float


def combined_loss(qr, qm, lam: float) -> LossParts:
    """smooth_l1 + lam * nin; lam >= 0."""
    if lam < 0:
        raise ConfigError(f"loss weight lambda must be >= 0, got {lam}")
    sl = smooth_l1(qr, qm)
    nn = nin_loss(qr, qm) if np.atleast_1d(np.asarray(qr)).size >= 2 else 0.0
    return LossParts(total=sl + lam * nn, smooth_l1=sl, nin=nn)


def combined_grad(qr, qm, lam: float) -> np.ndarray:
    if lam < 0:
        raise ConfigError(f"loss weight lambda must be >= 0, got {lam}")
    g = smooth_l1_grad(qr, qm)
    if lam > 0:
        g = g + lam * nin_grad(qr, qm)
    return g
