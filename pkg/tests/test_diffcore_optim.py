import numpy as np
import pytest

from privtab import diffcore as dc
from privtab.errors import ShapeError


def test_zero_gradient_leaves_params_unchanged():
    p = dc.Tensor(np.array([[1.0, -2.0]]), requires_grad=True)
    opt = dc.Adam([p])
    before = p.data.copy()
    p.grad = np.zeros_like(p.data)
    opt.step()
    assert np.array_equal(p.data, before)


def test_first_step_magnitude_is_bias_corrected_lr():
    # constant gradient g at t=1: update = lr * g / (|g| + eps) ~ lr * sign(g)
    p = dc.Tensor(np.array([[5.0, -3.0]]), requires_grad=True)
    opt = dc.Adam([p], lr=1e-4)
    before = p.data.copy()
    p.grad = np.array([[0.7, -0.2]])
    opt.step()
    delta = p.data - before
    assert np.allclose(np.abs(delta), 1e-4, rtol=1e-3)
    assert np.sign(delta[0, 0]) == -1.0 and np.sign(delta[0, 1]) == 1.0


def test_identical_calls_identical_results():
    def run():
        p = dc.Tensor(np.array([[1.0, 2.0]]), requires_grad=True)
        opt = dc.Adam([p], lr=1e-3)
        for i in range(5):
            p.grad = np.array([[0.5, -0.25]]) * (i + 1)
            opt.step()
        return p.data.copy()

    assert np.array_equal(run(), run())


def test_adam_step_shape_mismatch():
    with pytest.raises(ShapeError):
        dc.adam_step(np.zeros((2, 2)), np.zeros((2, 3)), np.zeros((2, 2)),
                     np.zeros((2, 2)), 1, 1e-3, 0.9, 0.999, 1e-8)


def test_adam_converges_on_quadratic():
    p = dc.Tensor(np.array([[4.0]]), requires_grad=True)
    opt = dc.Adam([p], lr=0.1)
    for _ in range(400):
        p.grad = 2.0 * p.data  # d/dp p^2
        opt.step()
    assert abs(p.data[0, 0]) < 1e-2
