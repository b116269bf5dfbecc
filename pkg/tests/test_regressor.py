import numpy as np
import pytest

from mixiqa.errors import DimensionError
from mixiqa.layers import finite_diff_check
from mixiqa.regressor import (
    head_backward,
    head_forward,
    head_init,
    pool_and_flatten,
    pool_and_flatten_backward,
    regressor_forward,
    regressor_forward_batch,
)


def test_zero_features_zero_biases_give_zero():
    head = head_init(channels=3, h1=8, h2=4, seed=0)
    assert regressor_forward(head, np.zeros((3, 5))) == 0.0


def test_pooled_flatten_trace():
    flat = pool_and_flatten(np.array([[1.0, 2.0], [3.0, 4.0]]))
    assert np.array_equal(flat, [5.0, 11.0, 11.0, 25.0])


def test_head_structure():
    head = head_init(channels=4, h1=16, h2=8, seed=1)
    assert head.fc1_w.shape == (16, 16)  # c*c -> h1
    assert head.fc2_w.shape == (16, 8)
    assert head.fc3_w.shape == (8, 1)
    for b in (head.fc1_b, head.fc2_b, head.fc3_b):
        assert not b.value.any()


def test_head_init_bounds():
    head = head_init(channels=8, h1=128, h2=64, seed=2)
    bound = np.sqrt(6.0 / (64 + 128))
    assert np.all(np.abs(head.fc1_w.value) <= bound)
    assert head.fc1_w.value.std() > 0


def test_batch_outputs_finite_and_order_independent():
    rng = np.random.default_rng(3)
    head = head_init(channels=4, h1=16, h2=8, seed=3)
    features = [rng.normal(size=(4, 6)) for _ in range(5)]
    out = regressor_forward_batch(head, features)
    assert out.shape == (5,)
    assert np.all(np.isfinite(out))
    # per-sample map: order only permutes outputs (up to BLAS accumulation noise)
    perm = [3, 1, 4, 0, 2]
    out_perm = regressor_forward_batch(head, [features[i] for i in perm])
    assert np.allclose(out[perm], out_perm, rtol=0, atol=1e-12)


def test_channel_mismatch_names_configuration():
    head = head_init(channels=4, h1=8, h2=4, seed=4)
    with pytest.raises(DimensionError, match="channels"):
        regressor_forward(head, np.zeros((3, 6)))


def test_pooled_input_symmetry():
    # the head consumes a symmetric matrix; transposing it changes nothing
    rng = np.random.default_rng(5)
    head = head_init(channels=3, h1=8, h2=4, seed=5)
    f = rng.normal(size=(3, 7))
    pooled = f @ f.T
    a, _ = head_forward(head, pooled.reshape(1, -1))
    b, _ = head_forward(head, pooled.T.reshape(1, -1))
    assert a[0] == b[0]


def test_backward_zero_upstream():
    head = head_init(channels=3, h1=8, h2=4, seed=6)
    x = np.random.default_rng(6).normal(size=(4, 9))
    _, cache = head_forward(head, x)
    head_backward(head, cache, np.zeros(4))
    for p in head.parameters():
        assert not p.grad.any()


def test_backward_matches_finite_differences():
    rng = np.random.default_rng(7)
    head = head_init(channels=2, h1=6, h2=4, seed=7)
    features = [rng.uniform(-1.5, 1.5, (2, 4)) for _ in range(3)]
    direction = rng.uniform(-1, 1, 3)
    buffers = head.parameters()

    def loss_at(params):
        for buf, p in zip(buffers, params):
            buf.value[...] = p
        qp = regressor_forward_batch(head, features)
        return float(np.dot(qp, direction))

    values = [b.value.copy() for b in buffers]
    for b in buffers:
        b.zero_grad()
    flats = np.stack([pool_and_flatten(f) for f in features])
    _, cache = head_forward(head, flats)
    head_backward(head, cache, direction)
    analytic = [b.grad.copy() for b in buffers]
    rep = finite_diff_check(loss_at, values, analytic)
    assert rep.max_rel_err < 1e-4


def test_gradient_through_pooling_matches_finite_differences():
    rng = np.random.default_rng(8)
    f = rng.uniform(-1.5, 1.5, (3, 5))
    r = rng.uniform(-1, 1, 9)
    grad_f = pool_and_flatten_backward(f, r)
    rep = finite_diff_check(
        lambda ps: float(np.dot(pool_and_flatten(ps[0]), r)), [f], [grad_f]
    )
    assert rep.max_rel_err < 1e-6


def test_gradient_through_normalized_pooling():
    rng = np.random.default_rng(9)
    f = rng.uniform(0.5, 1.5, (3, 5))  # entries away from the signed-sqrt kink
    r = rng.uniform(-1, 1, 9)
    grad_f = pool_and_flatten_backward(f, r, normalize=True)
    rep = finite_diff_check(
        lambda ps: float(np.dot(pool_and_flatten(ps[0], normalize=True), r)), [f], [grad_f]
    )
    assert rep.max_rel_err < 1e-4


def test_summed_gradients_batch_order_invariant():
    rng = np.random.default_rng(10)
    head = head_init(channels=2, h1=6, h2=4, seed=10)
    flats = rng.normal(size=(5, 4))
    upstream = rng.normal(size=5)

    def grads_for(order):
        for p in head.parameters():
            p.zero_grad()
        _, cache = head_forward(head, flats[order])
        head_backward(head, cache, upstream[order])
        return [p.grad.copy() for p in head.parameters()]

    a = grads_for(np.arange(5))
    b = grads_for(np.array([4, 2, 0, 3, 1]))
    for ga, gb in zip(a, b):
        assert np.allclose(ga, gb, atol=1e-12)
