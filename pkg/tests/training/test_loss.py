import numpy as np
import pytest

from ddvm.errors import ShapeError
from ddvm.numeric import DiffGraph, Tensor
from ddvm.training import masked_loss

EPS = np.array([0.0, 1.0])
EPS_HAT = np.array([0.5, 0.0])
MASK = np.array([True, False])


def test_l1_and_l2_examples():
    assert masked_loss(EPS, EPS_HAT, MASK, "l1").scalar == pytest.approx(0.5)
    assert masked_loss(EPS, EPS_HAT, MASK, "l2").scalar == pytest.approx(0.25)


def test_perfect_prediction_is_zero():
    rng = np.random.default_rng(0)
    eps = rng.normal(size=(2, 4, 4, 2))
    mask = rng.uniform(size=(2, 4, 4)) < 0.5
    mask[0, 0, 0] = True
    loss = masked_loss(eps, eps, mask)
    assert loss.scalar == 0.0
    assert loss.n_valid == 2 * int(mask.sum())


def test_all_false_mask_is_degenerate_not_nan():
    loss = masked_loss(EPS, EPS_HAT, np.zeros(2, dtype=bool))
    assert loss.degenerate
    assert loss.scalar == 0.0
    assert loss.n_valid == 0


def test_gradient_is_exactly_zero_off_mask():
    rng = np.random.default_rng(1)
    eps = rng.normal(size=(1, 5, 5, 2))
    eps_hat = Tensor(rng.normal(size=(1, 5, 5, 2)), requires_grad=True)
    mask = rng.uniform(size=(1, 5, 5)) < 0.4
    mask[0, 2, 2] = True
    with DiffGraph() as graph:
        graph.backward(masked_loss(eps, eps_hat, mask, "l1").value)
    assert np.all(eps_hat.grad[~mask] == 0.0)
    assert np.any(eps_hat.grad[mask] != 0.0)


def test_perturbing_off_mask_leaves_loss_bit_identical():
    rng = np.random.default_rng(2)
    eps = rng.normal(size=(6, 6, 1))
    eps_hat = rng.normal(size=(6, 6, 1))
    mask = rng.uniform(size=(6, 6)) < 0.5
    mask[0, 0] = True
    perturbed = eps_hat.copy()
    perturbed[~mask] += 100.0
    for kind in ("l1", "l2"):
        assert masked_loss(eps, eps_hat, mask, kind).scalar == masked_loss(eps, perturbed, mask, kind).scalar


def test_shape_and_kind_errors():
    with pytest.raises(ShapeError):
        masked_loss(np.zeros((2, 2, 1)), np.zeros((2, 2, 2)), np.ones((2, 2), dtype=bool))
    with pytest.raises(ShapeError):
        masked_loss(np.zeros((2, 2, 1)), np.zeros((2, 2, 1)), np.ones((3, 2), dtype=bool))
    with pytest.raises(ValueError):
        masked_loss(EPS, EPS_HAT, MASK, "huber")
