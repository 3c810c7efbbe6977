"""Finite-difference checks for every autodiff operation.

Every op that carries a gradient is probed with central differences across
many randomized instances. Relative error is measured in max-norm against
whichever of the analytic / numeric gradients is larger, with the tolerance
criterion tighter than first-order FD noise for well-scaled float64 inputs.
"""

import numpy as np
import pytest

from pcrender import autodiff as ad

from oracles import check_gradients

SEEDS = range(20)


@pytest.mark.parametrize("seed", SEEDS)
def test_grad_arithmetic(seed):
    check_gradients(lambda a, b: a * b + a / (b * b + 3.0) - b, [(5, 4), (5, 4)], seed)


@pytest.mark.parametrize("seed", SEEDS)
def test_grad_broadcast_add_mul(seed):
    check_gradients(lambda a, b: a * b + b, [(4, 3, 2), (3, 1)], seed)


@pytest.mark.parametrize("seed", SEEDS)
def test_grad_power(seed):
    check_gradients(lambda x: x ** 3 + (x ** 2) * 0.5, [(6, 6)], seed)


@pytest.mark.parametrize("seed", SEEDS)
def test_grad_log_sqrt(seed):
    # keep inputs strictly positive and away from zero
    check_gradients(lambda x: ad.log(x) + ad.sqrt(x), [(5, 5)], seed,
                    scale=0.5, shift=2.0)


@pytest.mark.parametrize("seed", SEEDS)
def test_grad_absolute(seed):
    # shift away from the kink at zero
    check_gradients(lambda x: ad.absolute(x), [(6, 4)], seed, shift=3.0)


@pytest.mark.parametrize("seed", SEEDS)
def test_grad_hypot(seed):
    check_gradients(lambda a, b: ad.hypot(a, b), [(4, 4), (4, 4)], seed, shift=1.5)


def test_hypot_at_origin_is_finite():
    a = ad.Tensor(np.zeros((3, 3)), requires_grad=True)
    b = ad.Tensor(np.zeros((3, 3)), requires_grad=True)
    ad.hypot(a, b).sum().backward()
    assert np.all(np.isfinite(a.grad)) and np.all(np.isfinite(b.grad))


@pytest.mark.parametrize("seed", SEEDS)
def test_grad_clip(seed):
    # random normals stay well inside (-10, 10), far from the clamp kinks
    check_gradients(lambda x: ad.clip(x, -10.0, 10.0) ** 2, [(5, 5)], seed)


def test_clip_blocks_gradient_outside_range():
    x = ad.Tensor(np.array([-2.0, 0.3, 2.0]), requires_grad=True)
    ad.clip(x, 0.0, 1.0).sum().backward()
    assert np.array_equal(x.grad, [0.0, 1.0, 0.0])


@pytest.mark.parametrize("seed", SEEDS)
def test_grad_leaky_relu(seed):
    check_gradients(lambda x: ad.leaky_relu(x, 0.2), [(6, 6)], seed, shift=0.0)


@pytest.mark.parametrize("seed", SEEDS)
def test_grad_reshape_transpose_getitem(seed):
    def build(x):
        y = ad.transpose(ad.reshape(x, (4, 6)), (1, 0))
        return y[1:5, ::2] * 2.0
    check_gradients(build, [(2, 3, 4)], seed)


@pytest.mark.parametrize("seed", SEEDS)
def test_grad_concat(seed):
    check_gradients(lambda a, b: ad.concat([a, b], axis=1) ** 2,
                    [(3, 2, 4), (3, 5, 4)], seed)


@pytest.mark.parametrize("seed", SEEDS)
def test_grad_sum_mean(seed):
    def build(x):
        return ad.sum_(x, axis=0) + ad.mean(x, axis=2, keepdims=True).sum()
    check_gradients(build, [(3, 4, 5)], seed)


@pytest.mark.parametrize("seed", SEEDS)
def test_grad_reduce_max_min(seed):
    check_gradients(lambda x: ad.reduce_max(x) * 2.0 - ad.reduce_min(x),
                    [(5, 7)], seed)


def test_reduce_max_gradient_goes_to_single_winner():
    x = ad.Tensor(np.array([[1.0, 5.0], [5.0, 2.0]]), requires_grad=True)
    ad.reduce_max(x).backward()
    assert x.grad.sum() == 1.0 and (x.grad != 0).sum() == 1


@pytest.mark.parametrize("seed", SEEDS)
def test_grad_matmul(seed):
    check_gradients(lambda a, b: a @ b, [(4, 6), (6, 3)], seed)


@pytest.mark.parametrize("seed", SEEDS)
def test_grad_conv2d(seed):
    def build(x, w, b):
        return ad.conv2d(x, w, b, stride=(2, 1), padding=(1, 2))
    check_gradients(build, [(2, 3, 7, 8), (4, 3, 3, 3), (4,)], seed)


@pytest.mark.parametrize("seed", SEEDS)
def test_grad_conv3d(seed):
    def build(x, w, b):
        return ad.conv3d(x, w, b, stride=(1, 2, 2), padding=1)
    check_gradients(build, [(1, 2, 4, 6, 6), (3, 2, 3, 3, 3), (3,)], seed)


@pytest.mark.parametrize("seed", SEEDS)
def test_grad_anisotropic_kernel_conv3d(seed):
    # plane-collapsing head: kernel spans the full depth axis
    def build(x, w):
        return ad.conv3d(x, w, stride=1, padding=0)
    check_gradients(build, [(1, 2, 4, 5, 5), (3, 2, 4, 1, 1)], seed)


@pytest.mark.parametrize("seed", SEEDS)
def test_grad_maxpool2d(seed):
    check_gradients(lambda x: ad.maxpool2d(x, 2), [(2, 3, 6, 8)], seed)


@pytest.mark.parametrize("seed", SEEDS)
def test_grad_avgpool2d(seed):
    check_gradients(lambda x: ad.avgpool2d(x, 2), [(2, 3, 6, 8)], seed)


@pytest.mark.parametrize("seed", SEEDS)
def test_grad_upsample_nearest(seed):
    check_gradients(lambda x: ad.upsample_nearest(x, 2) ** 2, [(2, 3, 4, 5)], seed)


@pytest.mark.parametrize("seed", SEEDS)
def test_grad_instance_norm(seed):
    check_gradients(lambda x: ad.instance_norm(x), [(2, 3, 5, 6)], seed)


@pytest.mark.parametrize("seed", SEEDS)
def test_grad_instance_norm_3d(seed):
    check_gradients(lambda x: ad.instance_norm(x), [(1, 2, 3, 4, 4)], seed)


# ---------------------------------------------------------------------------
# engine behavior
# ---------------------------------------------------------------------------

def test_shared_subexpression_accumulates_once():
    # y feeds the loss twice; a node revisited during backward would double
    # one of the contributions
    x = ad.Tensor(np.array([1.0, 2.0, 3.0]), requires_grad=True)
    y = x * 2.0
    loss = y.sum() + (y ** 2).sum()
    loss.backward()
    expected = 2.0 + 8.0 * x.data  # d/dx (2x + 4x^2)
    np.testing.assert_allclose(x.grad, expected, rtol=1e-12)


def test_backward_is_linear_in_seed_gradient():
    rng = np.random.default_rng(3)
    a = rng.standard_normal((4, 4))

    def grad_for(seed_grad):
        x = ad.Tensor(a, requires_grad=True)
        y = ad.leaky_relu(x @ x, 0.2)
        y.backward(seed_grad)
        return x.grad

    g1 = np.ones((4, 4))
    g2 = rng.standard_normal((4, 4))
    lhs = grad_for(g1 + 2.0 * g2)
    rhs = grad_for(g1) + 2.0 * grad_for(g2)
    np.testing.assert_allclose(lhs, rhs, atol=1e-10)


def test_backward_requires_scalar_without_seed():
    x = ad.Tensor(np.ones((2, 2)), requires_grad=True)
    with pytest.raises(ValueError, match="scalar"):
        (x * 2.0).backward()


def test_grad_accumulates_across_backward_calls():
    x = ad.Tensor(np.array([2.0]), requires_grad=True)
    (x * 3.0).sum().backward()
    (x * 3.0).sum().backward()
    assert x.grad[0] == 6.0


def test_no_grad_suppresses_graph():
    x = ad.Tensor(np.ones(3), requires_grad=True)
    with ad.no_grad():
        y = x * 2.0
    assert y._grads_fn is None
    y.sum().backward()
    assert x.grad is None


def test_nan_guard_trips_on_nonfinite_gradient():
    ad.set_nan_guard(True)
    try:
        x = ad.Tensor(np.array([0.0]), requires_grad=True)
        with np.errstate(divide="ignore"), pytest.raises(FloatingPointError):
            ad.log(x).sum().backward()
    finally:
        ad.set_nan_guard(False)


def test_forward_is_deterministic():
    def run():
        rng = np.random.default_rng(11)
        x = ad.Tensor(rng.standard_normal((2, 3, 8, 8)), requires_grad=True)
        w = ad.Tensor(rng.standard_normal((4, 3, 3, 3)), requires_grad=True)
        out = ad.instance_norm(ad.conv2d(x, w, stride=2, padding=1))
        loss = ad.leaky_relu(out).sum()
        loss.backward()
        return loss.data.copy(), x.grad.copy(), w.grad.copy()

    first, second = run(), run()
    for a, b in zip(first, second):
        assert np.array_equal(a, b)


def test_float64_everywhere():
    x = ad.Tensor(np.ones((2, 2), dtype=np.float32))
    assert x.data.dtype == np.float64
    y = x * np.float32(2.0)
    assert y.data.dtype == np.float64
