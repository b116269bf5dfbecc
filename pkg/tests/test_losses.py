import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mixiqa.errors import ConfigError
from mixiqa.layers import finite_diff_check
from mixiqa.losses import (
    batch_moments,
    combined_grad,
    combined_loss,
    nin_grad,
    nin_loss,
    smooth_l1,
    smooth_l1_grad,
)


# -- smooth L1 ----------------------------------------------------------------

def test_smooth_l1_identities():
    assert smooth_l1([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert smooth_l1([2.0], [0.0]) == 1.5       # |2| - 1/2
    assert smooth_l1([0.5], [0.0]) == 0.125     # 0.5 * 0.25


def test_smooth_l1_c1_at_transition():
    # value continuous and derivative -> 1 from both sides of |d| = 1
    eps = 1e-9
    below = smooth_l1([1.0 - eps], [0.0])
    above = smooth_l1([1.0 + eps], [0.0])
    assert abs(below - above) < 1e-8
    g_below = smooth_l1_grad([1.0 - 1e-6], [0.0])[0]
    g_above = smooth_l1_grad([1.0 + 1e-6], [0.0])[0]
    assert g_below == pytest.approx(1.0, abs=1e-5)
    assert g_above == pytest.approx(1.0, abs=1e-5)


def test_smooth_l1_rejects_empty():
    with pytest.raises(ConfigError):
        smooth_l1([], [])


def test_smooth_l1_rejects_length_mismatch():
    with pytest.raises(ConfigError):
        smooth_l1([1.0], [1.0, 2.0])


# -- norm-in-norm -------------------------------------------------------------

def test_nin_affine_alignment_is_zero():
    qr = np.array([1.0, 2.0, 3.0, 7.0])
    assert nin_loss(qr, 4.0 * qr + 2.0) < 1e-12


def test_nin_reversed_triplet():
    # population std sqrt(2/3); z-diffs are -+2.4495; mean of {3, 0, 3} = 2
    assert nin_loss([1.0, 2.0, 3.0], [30.0, 20.0, 10.0]) == pytest.approx(2.0, rel=1e-12)


def test_nin_constant_target_guard():
    value = nin_loss([1.0, 2.0, 3.0], [5.0, 5.0, 5.0])
    assert np.isfinite(value)


def test_nin_rejects_single_sample():
    with pytest.raises(ConfigError):
        nin_loss([1.0], [1.0])


def test_population_moments():
    mu, sigma = batch_moments([1.0, 2.0, 3.0])
    assert mu == 2.0
    assert sigma == pytest.approx(np.sqrt(2.0 / 3.0))


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.floats(-50, 50), min_size=3, max_size=12),
    st.floats(0.01, 100.0),
    st.floats(-100, 100),
)
def test_nin_affine_invariance(values, a, b):
    qr = np.array(values)
    if qr.std() < 1e-6:
        qr = qr + np.arange(qr.size)  # keep the batch non-degenerate
    qm = np.linspace(0, 10, qr.size)
    assert abs(nin_loss(a * qr + b, qm) - nin_loss(qr, qm)) < 1e-9


def test_losses_nonnegative_and_zero_conditions():
    rng = np.random.default_rng(0)
    for _ in range(50):
        qr = rng.uniform(-5, 15, 8)
        qm = rng.uniform(0, 10, 8)
        assert smooth_l1(qr, qm) >= 0.0
        assert nin_loss(qr, qm) >= 0.0
    # zero iff elementwise equal (smooth L1) / z-scores equal (NiN)
    qm = rng.uniform(0, 10, 8)
    assert smooth_l1(qm, qm) == 0.0
    assert nin_loss(2.0 * qm + 1.0, qm) < 1e-12


def test_gradient_zero_at_minimum():
    qm = np.array([2.0, 4.0, 6.0, 8.0])
    assert np.all(np.abs(smooth_l1_grad(qm, qm)) < 1e-9)
    assert np.all(np.abs(nin_grad(qm * 3.0 + 1.0, qm)) < 1e-9)
    assert np.all(np.abs(combined_grad(qm, qm, 1.0)) < 1e-9)


# -- combined -----------------------------------------------------------------

def test_combined_lambda_zero_equals_smooth_l1():
    rng = np.random.default_rng(1)
    qr = rng.uniform(-3, 13, 8)
    qm = rng.uniform(0, 10, 8)
    parts = combined_loss(qr, qm, 0.0)
    assert parts.total == smooth_l1(qr, qm)
    assert np.array_equal(combined_grad(qr, qm, 0.0), smooth_l1_grad(qr, qm))


def test_combined_reversed_triplet_composition():
    qr = [1.0, 2.0, 3.0]
    qm = [30.0, 20.0, 10.0]
    parts = combined_loss(qr, qm, 1.0)
    assert parts.nin == pytest.approx(2.0, rel=1e-12)
    assert parts.total == pytest.approx(smooth_l1(qr, qm) + 2.0, rel=1e-12)


def test_combined_rejects_negative_lambda():
    with pytest.raises(ConfigError):
        combined_loss([1.0, 2.0], [1.0, 2.0], -0.5)
    with pytest.raises(ConfigError):
        combined_grad([1.0, 2.0], [1.0, 2.0], -0.5)


def test_combined_gradient_matches_finite_differences():
    rng = np.random.default_rng(2)
    for trial in range(20):
        n = int(rng.integers(3, 10))
        qr = rng.uniform(-3, 13, n)
        qm = rng.uniform(0, 10, n)
        # keep samples off the smooth-L1 kink so central differences are clean
        qr = np.where(np.abs(np.abs(qr - qm) - 1.0) < 1e-3, qr + 0.01, qr)
        lam = float(rng.uniform(0, 2))
        rep = finite_diff_check(
            lambda ps: combined_loss(ps[0], qm, lam).total,
            [qr],
            [combined_grad(qr, qm, lam)],
            step=1e-5,
        )
        assert rep.max_rel_err < 1e-4


def test_nin_gradient_differentiates_through_batch_statistics():
    # a stop-gradient implementation would miss the mean/std terms and fail
    rng = np.random.default_rng(3)
    qr = rng.uniform(0, 10, 6)
    qm = rng.uniform(0, 10, 6)
    rep = finite_diff_check(
        lambda ps: nin_loss(ps[0], qm), [qr], [nin_grad(qr, qm)], step=1e-5
    )
    assert rep.max_rel_err < 1e-6
    stop_gradient = (
        ((qr - qr.mean()) / max(qr.std(), 1e-8) - (qm - qm.mean()) / max(qm.std(), 1e-8))
        / (qr.size * max(qr.std(), 1e-8))
    )
    assert np.max(np.abs(stop_gradient - nin_grad(qr, qm))) > 1e-3
