"""Reverse-mode autodiff: every op against central finite differences."""

import numpy as np
import pytest

from matrix_trader.nets import autodiff as ad
from matrix_trader.nets.autodiff import Tensor


def fd_grad(f, x, h=1e-6):
    """Central finite-difference gradient of scalar f() w.r.t. array x,
    mutated in place coordinate by coordinate."""
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f()
        flat[i] = orig - h
        fm = f()
        flat[i] = orig
        gf[i] = (fp - fm) / (2.0 * h)
    return g


def check_grads(build, arrays, tol=1e-6):
    """`build(tensors) -> scalar Tensor`; checks every input's gradient."""
    tensors = [Tensor(a, requires_grad=True) for a in arrays]
    loss = build(tensors)
    loss.backward()
    for t, a in zip(tensors, arrays):
        num = fd_grad(lambda: float(build([Tensor(x) for x in arrays]).data), a)
        assert t.grad is not None
        np.testing.assert_allclose(t.grad, num, rtol=tol, atol=tol)


R = np.random.default_rng(0)


def test_add_sub_broadcast():
    a = R.standard_normal((3, 4))
    b = R.standard_normal(4)  # broadcasts over rows
    check_grads(lambda ts: ad.tsum(ad.mul(ad.add(ts[0], ts[1]), 1.7)), [a, b])
    check_grads(lambda ts: ad.tsum(ad.sub(ts[0], ts[1])), [a, b])


def test_mul_div():
    a = R.standard_normal((2, 3))
    b = R.uniform(0.5, 2.0, (2, 3))
    check_grads(lambda ts: ad.tsum(ad.mul(ts[0], ts[1])), [a, b])
    check_grads(lambda ts: ad.tsum(ad.div(ts[0], ts[1])), [a, b])


def test_scalar_operand_and_constant_array():
    a = R.standard_normal((2, 2))
    check_grads(lambda ts: ad.tsum(ad.mul(ts[0], 3.0)), [a])
    c = R.standard_normal((2, 2))
    check_grads(lambda ts: ad.tsum(ad.add(ts[0], c)), [a])


def test_neg_power_exp_log_tanh():
    a = R.uniform(0.5, 2.0, (3, 3))
    check_grads(lambda ts: ad.tsum(ad.neg(ts[0])), [a])
    check_grads(lambda ts: ad.tsum(ad.power(ts[0], 3)), [a])
    check_grads(lambda ts: ad.tsum(ad.texp(ts[0])), [a])
    check_grads(lambda ts: ad.tsum(ad.tlog(ts[0])), [a])
    check_grads(lambda ts: ad.tsum(ad.tanh(ts[0])), [a])


def test_power_rejects_tensor_exponent():
    t = Tensor(np.ones(2), requires_grad=True)
    with pytest.raises(TypeError):
        ad.power(t, t)


def test_relu_and_clip_away_from_kinks():
    a = R.standard_normal((4, 4))
    a[np.abs(a) < 0.05] = 0.1  # keep FD away from the kink
    check_grads(lambda ts: ad.tsum(ad.relu(ts[0])), [a])
    b = R.uniform(-2, 2, (4, 4))
    b[np.abs(b - 1.0) < 0.05] = 0.0
    b[np.abs(b + 1.0) < 0.05] = 0.0
    check_grads(lambda ts: ad.tsum(ad.clip(ts[0], -1.0, 1.0)), [b])


def test_clip_zero_gradient_outside_range():
    t = Tensor(np.array([-2.0, 0.0, 2.0]), requires_grad=True)
    ad.tsum(ad.clip(t, -1.0, 1.0)).backward()
    assert np.array_equal(t.grad, [0.0, 1.0, 0.0])


def test_clip_boundary_is_inside():
    t = Tensor(np.array([-1.0, 1.0]), requires_grad=True)
    ad.tsum(ad.clip(t, -1.0, 1.0)).backward()
    assert np.array_equal(t.grad, [1.0, 1.0])


def test_minimum_picks_elementwise():
    a = R.standard_normal((3, 3))
    b = R.standard_normal((3, 3))
    mask = np.abs(a - b) < 0.05
    a[mask] += 0.2  # no ties for the FD check
    check_grads(lambda ts: ad.tsum(ad.minimum(ts[0], ts[1])), [a, b])


def test_minimum_splits_ties_evenly():
    a = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    b = Tensor(np.array([1.0, 5.0]), requires_grad=True)
    ad.tsum(ad.minimum(a, b)).backward()
    assert np.array_equal(a.grad, [0.5, 1.0])
    assert np.array_equal(b.grad, [0.5, 0.0])


def test_matmul():
    a = R.standard_normal((3, 4))
    b = R.standard_normal((4, 2))
    check_grads(lambda ts: ad.tsum(ad.matmul(ts[0], ts[1])), [a, b])


def test_matmul_requires_2d():
    with pytest.raises(ValueError):
        ad.matmul(Tensor(np.zeros(3)), Tensor(np.zeros((3, 2))))


def test_reductions_and_reshape():
    a = R.standard_normal((3, 4))
    check_grads(lambda ts: ad.tsum(ad.mul(ad.tsum(ts[0], axis=0), 0.3)), [a])
    check_grads(lambda ts: ad.tsum(ad.mul(ad.tmean(ts[0], axis=1), 0.7)), [a])
    check_grads(lambda ts: ad.tmean(ts[0]), [a])
    check_grads(
        lambda ts: ad.tsum(ad.mul(ad.reshape(ts[0], (4, 3)),
                                  np.arange(12.0).reshape(4, 3))),
        [a],
    )


def test_tmean_value():
    a = np.arange(6.0).reshape(2, 3)
    assert float(ad.tmean(Tensor(a)).data) == a.mean()
    assert np.array_equal(ad.tmean(Tensor(a), axis=0).data, a.mean(axis=0))


def test_conv2d_gradients():
    x = R.standard_normal((2, 2, 5, 6))
    w = R.standard_normal((3, 2, 3, 3))
    b = R.standard_normal(3)
    check_grads(
        lambda ts: ad.tsum(ad.mul(ad.conv2d(ts[0], ts[1], ts[2]), 0.1)),
        [x, w, b], tol=1e-5,
    )


def test_maxpool2d_gradients():
    x = R.standard_normal((2, 3, 6, 8))
    # unique values keep the argmax stable under FD nudges
    x = np.argsort(x, axis=None).reshape(x.shape).astype(np.float64) * 0.01
    check_grads(lambda ts: ad.tsum(ad.mul(ad.maxpool2d(ts[0]), 0.3)), [x], tol=1e-5)


def test_batchnorm2d_train_gradients():
    x = R.standard_normal((4, 2, 3, 3))
    gamma = R.uniform(0.5, 1.5, 2)
    beta = R.standard_normal(2)

    def build(ts):
        rm, rv = np.zeros(2), np.ones(2)  # fresh buffers each call
        out = ad.batchnorm2d(ts[0], ts[1], ts[2], rm, rv, training=True)
        return ad.tsum(ad.mul(out, np.arange(72.0).reshape(4, 2, 3, 3) * 0.01))

    check_grads(build, [x, gamma, beta], tol=1e-5)


def test_batchnorm2d_eval_gradients():
    x = R.standard_normal((3, 2, 2, 2))
    gamma = R.uniform(0.5, 1.5, 2)
    beta = R.standard_normal(2)
    rm = R.standard_normal(2)
    rv = R.uniform(0.5, 2.0, 2)

    def build(ts):
        out = ad.batchnorm2d(ts[0], ts[1], ts[2], rm.copy(), rv.copy(),
                             training=False)
        return ad.tsum(ad.mul(out, 0.37))

    check_grads(build, [x, gamma, beta], tol=1e-6)


# ----------------------------------------------------------- mechanics --

def test_backward_requires_scalar():
    t = Tensor(np.zeros(3), requires_grad=True)
    with pytest.raises(ValueError):
        ad.mul(t, 2.0).backward()


def test_gradient_accumulates_over_reuse():
    t = Tensor(np.array([3.0]), requires_grad=True)
    loss = ad.tsum(ad.add(ad.mul(t, 2.0), ad.mul(t, 5.0)))
    loss.backward()
    assert t.grad[0] == 7.0


def test_no_grad_builds_no_graph():
    t = Tensor(np.ones(3), requires_grad=True)
    with ad.no_grad():
        out = ad.mul(t, 2.0)
    assert out._parents == ()
    assert not out.requires_grad


def test_detach_blocks_gradient():
    t = Tensor(np.array([2.0]), requires_grad=True)
    loss = ad.tsum(ad.mul(t.detach(), 3.0))
    loss.backward()
    assert t.grad is None


def test_gradients_helper_zero_fills_unused():
    used = Tensor(np.ones(2), requires_grad=True)
    unused = Tensor(np.ones(3), requires_grad=True)
    loss = ad.tsum(used)
    grads = ad.gradients(loss, [used, unused])
    assert np.array_equal(grads[0], [1.0, 1.0])
    assert np.array_equal(grads[1], np.zeros(3))


def test_float32_graph_stays_float32():
    a = Tensor(np.ones((2, 2), dtype=np.float32), requires_grad=True)
    b = Tensor(np.ones((2, 2), dtype=np.float32), requires_grad=True)
    loss = ad.tmean(ad.minimum(ad.mul(a, 1.5), ad.texp(b)))
    assert loss.data.dtype == np.float32
    loss.backward()
    assert a.grad.dtype == np.float32
    assert b.grad.dtype == np.float32
