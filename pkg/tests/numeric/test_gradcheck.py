import numpy as np
import pytest

from ddvm.errors import GradCheckError
from ddvm.numeric import Tensor, abs_smooth, conv2d, grad_check, log, reduce_mean, reduce_sum, silu
from ddvm.training.loss import masked_loss


def test_square_at_three():
    x = Tensor(3.0, name="x")
    report = grad_check(lambda: x * x, {"x": x})
    assert report.passed, report.summary()
    assert float(report.entries[0].analytic) == pytest.approx(6.0)
    assert float(report.entries[0].numeric) == pytest.approx(6.0, rel=1e-6)


def test_constant_function_has_zero_gradient():
    x = Tensor([1.0, 2.0])
    report = grad_check(lambda: Tensor(5.0) + 0.0 * reduce_sum(x), [x])
    assert report.passed
    assert np.all(report.entries[0].analytic == 0.0)


def test_non_finite_function_raises():
    x = Tensor(-1.0)
    with pytest.raises(GradCheckError):
        grad_check(lambda: log(x), [x])


def test_bad_step_raises():
    x = Tensor(1.0)
    with pytest.raises(GradCheckError):
        grad_check(lambda: x * x, [x], step=0.0)


COMPOSITION_OPS = ("add", "mul", "conv2d", "mean", "abs_smooth")


class RandomComposition:
    """
    A random expression tree over (1, H, W, C) fields, reduced to a scalar mean.
    Every conv2d node owns a fresh kernel, so the parameter set varies per tree.
    """

    def __init__(self, rng: np.random.Generator, max_depth: int = 4):
        self.rng = rng
        height, width = (int(v) for v in rng.integers(2, 5, size=2))
        self.shape = (1, height, width, int(rng.integers(1, 3)))
        self.params = {f"field{i}": Tensor(rng.normal(0.0, 0.7, size=self.shape)) for i in range(2)}
        self.tree = self._grow(max_depth)

    def _grow(self, depth: int):
        if depth == 0 or self.rng.uniform() < 0.25:
            return ("leaf", f"field{int(self.rng.integers(0, 2))}")
        op = COMPOSITION_OPS[int(self.rng.integers(0, len(COMPOSITION_OPS)))]
        if op in ("add", "mul"):
            return (op, self._grow(depth - 1), self._grow(depth - 1))
        if op == "conv2d":
            size = int(self.rng.choice([1, 3]))
            channels = self.shape[-1]
            name = f"kernel{len(self.params)}"
            self.params[name] = Tensor(self.rng.normal(0.0, 1.0 / np.sqrt(size * size * channels),
                                                       size=(size, size, channels, channels)))
            return (op, self._grow(depth - 1), name)
        return (op, self._grow(depth - 1))

    def _eval(self, node):
        op = node[0]
        if op == "leaf":
            return self.params[node[1]]
        if op == "add":
            return self._eval(node[1]) + self._eval(node[2])
        if op == "mul":
            return self._eval(node[1]) * self._eval(node[2])
        if op == "conv2d":
            return conv2d(self._eval(node[1]), self.params[node[2]])
        h = self._eval(node[1])
        if op == "mean":
            return h + reduce_mean(h, axis=(1, 2), keepdims=True)
        return abs_smooth(h, delta=0.1)

    def __call__(self):
        return reduce_mean(self._eval(self.tree))


def check_random_compositions(count: int, seed: int):
    rng = np.random.default_rng(seed)
    ops_seen = set()
    for _ in range(count):
        expr = RandomComposition(rng)
        ops_seen.update(_ops_in(expr.tree))
        report = grad_check(expr, expr.params, step=1e-4, tol_rel=1e-3)
        assert report.passed, f"{expr.tree}\n{report.summary()}"
    return ops_seen


def _ops_in(node):
    if node[0] == "leaf":
        return {"leaf"}
    found = {node[0]}
    for child in node[1:]:
        if isinstance(child, tuple):
            found |= _ops_in(child)
    return found


def test_random_compositions_match_central_differences():
    assert set(COMPOSITION_OPS) <= check_random_compositions(60, seed=7)


@pytest.mark.slow
def test_thousand_random_compositions_match_central_differences():
    assert set(COMPOSITION_OPS) <= check_random_compositions(1000, seed=2024)


def test_strided_parameter_is_perturbed_in_place():
    base = np.random.default_rng(3).normal(size=(4, 3))
    w = Tensor(np.zeros((3, 4)), name="w")
    w.data = base.T
    assert not w.data.flags.c_contiguous
    c = np.arange(12.0).reshape(3, 4)
    report = grad_check(lambda: reduce_sum(w * w * c), [w])
    assert report.passed, report.summary()
    np.testing.assert_allclose(report.entries[0].numeric, 2.0 * base.T * c, rtol=1e-6, atol=1e-8)
    assert np.array_equal(w.data, base.T)

def test_masked_l1_of_two_layer_net():
    rng = np.random.default_rng(5)
    x = rng.normal(size=(2, 6, 6, 3))
    target = rng.normal(size=(2, 6, 6, 1))
    mask = rng.uniform(size=(2, 6, 6)) < 0.6
    w1 = Tensor(rng.normal(size=(3, 3, 3, 4)) * 0.4, name="w1")
    w2 = Tensor(rng.normal(size=(3, 3, 4, 1)) * 0.4, name="w2")

    def f():
        pred = conv2d(silu(conv2d(x, w1)), w2)
        return masked_loss(target, pred, mask, "l1").value

    report = grad_check(f, {"w1": w1, "w2": w2}, step=1e-4, tol_rel=1e-3)
    assert report.passed, report.summary()
