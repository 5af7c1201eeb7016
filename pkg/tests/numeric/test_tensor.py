import numpy as np
import pytest

from ddvm.errors import NonFiniteError, ShapeError
from ddvm.numeric import (
    DenseField,
    DiffGraph,
    Tensor,
    abs_smooth,
    absolute,
    concat,
    elementwise,
    no_grad,
    reduce_mean,
    reduce_sum,
    softmax,
    stop_gradient,
    upsample_nearest,
)


def test_elementwise_examples():
    assert np.array_equal(elementwise("add", [1.0, 2.0], [3.0, 4.0]).data, [4.0, 6.0])
    assert np.array_equal(elementwise("mul", [1.0, 2.0], 0.0).data, [0.0, 0.0])
    a = np.arange(6.0).reshape(2, 3)
    assert np.array_equal(elementwise("sub", a, a).data, np.zeros((2, 3)))


def test_elementwise_shape_mismatch_names_both_shapes():
    with pytest.raises(ShapeError) as info:
        elementwise("add", np.zeros((2, 3)), np.zeros((3, 2)))
    assert info.value.shape_a == (2, 3)
    assert info.value.shape_b == (3, 2)


def test_dense_field_rejects_non_finite():
    with pytest.raises(NonFiniteError):
        DenseField(np.array([[np.nan]]))


def test_dense_field_is_read_only_and_row_major():
    field = DenseField(np.arange(12.0).reshape(2, 3, 2))
    assert field.shape == (2, 3, 2)
    assert np.array_equal(field.flat(), np.arange(12.0))
    with pytest.raises(ValueError):
        field.values[0, 0, 0] = 5.0


def test_backward_of_product():
    a = Tensor([2.0, 3.0], requires_grad=True)
    b = Tensor([5.0, 7.0], requires_grad=True)
    with DiffGraph() as graph:
        out = reduce_sum(a * b)
        graph.backward(out)
    assert np.array_equal(a.grad, [5.0, 7.0])
    assert np.array_equal(b.grad, [2.0, 3.0])


def test_absolute_subgradient_is_zero_at_zero():
    x = Tensor([-1.0, 0.0, 2.0], requires_grad=True)
    with DiffGraph() as graph:
        graph.backward(reduce_sum(absolute(x)))
    assert np.array_equal(x.grad, [-1.0, 0.0, 1.0])


def test_abs_smooth_stays_within_delta_of_abs():
    x = np.array([-2.0, -0.5, 0.0, 0.5, 3.0])
    smooth = abs_smooth(x, delta=0.1).data
    assert smooth[2] == 0.0
    assert np.all(smooth <= np.abs(x))
    assert np.all(np.abs(x) - smooth <= 0.1)


def test_linearity_of_backward():
    rng = np.random.default_rng(0)
    w = Tensor(rng.normal(size=(3, 3)), requires_grad=True)

    def grads(fn):
        w.grad = None
        with DiffGraph() as graph:
            graph.backward(fn())
        return w.grad.copy()

    f = lambda: reduce_sum(w * w)
    g = lambda: reduce_mean(w * 3.0)
    combined = grads(lambda: 2.0 * f() + (-0.5) * g())
    assert np.allclose(combined, 2.0 * grads(f) - 0.5 * grads(g), atol=1e-12)


def test_no_grad_and_stop_gradient_block_recording():
    x = Tensor([1.0, 2.0], requires_grad=True)
    with DiffGraph() as graph:
        with no_grad():
            y = x * 2.0
        assert not y.requires_grad
        z = stop_gradient(x) * x
        graph.backward(reduce_sum(z))
    assert np.array_equal(x.grad, [1.0, 2.0])


def test_replay_reproduces_outputs():
    rng = np.random.default_rng(3)
    x = Tensor(rng.normal(size=(2, 4)), requires_grad=True)
    with DiffGraph() as graph:
        out = reduce_sum(softmax(concat([x, x * x], axis=-1), axis=-1))
    assert graph.replay()
    assert out.data.shape == ()


def test_determinism_of_forward_and_backward():
    def run():
        rng = np.random.default_rng(11)
        w = Tensor(rng.normal(size=(1, 2, 2, 3)), requires_grad=True)
        with DiffGraph() as graph:
            out = reduce_mean(upsample_nearest(w, 2) ** 2.0)
            graph.backward(out)
        return out.data, w.grad

    (o1, g1), (o2, g2) = run(), run()
    assert np.array_equal(o1, o2)
    assert np.array_equal(g1, g2)


def test_upsample_nearest_gradient_sums_blocks():
    w = Tensor(np.ones((1, 2, 2, 1)), requires_grad=True)
    with DiffGraph() as graph:
        graph.backward(reduce_sum(upsample_nearest(w, 3)))
    assert np.array_equal(w.grad, np.full((1, 2, 2, 1), 9.0))
