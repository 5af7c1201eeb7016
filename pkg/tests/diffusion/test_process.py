import numpy as np
import pytest

from ddvm.diffusion import (
    GAMMA_CLIP,
    NoiseSchedule,
    ancestral_variance,
    eps_to_sample,
    forward_diffuse,
    recompute_target_eps,
)
from ddvm.errors import ScheduleError, ShapeError

Y = np.array([0.5])
EPS = np.array([-1.0])


def test_forward_diffuse_examples():
    assert forward_diffuse(Y, EPS, 1.0) == pytest.approx([0.5])
    assert forward_diffuse(Y, EPS, 0.25) == pytest.approx([-0.6160254], abs=1e-7)
    assert forward_diffuse(Y, EPS, 1e-12) == pytest.approx([-1.0], abs=1e-5)


def test_eps_to_sample_examples():
    assert eps_to_sample(np.array([-0.6160254]), EPS, 0.25) == pytest.approx([0.5], abs=1e-7)
    y_t = np.array([0.3, -0.2])
    assert np.array_equal(eps_to_sample(y_t, np.zeros(2), 1.0), y_t)


def test_recompute_target_eps_examples():
    assert recompute_target_eps(Y, np.array([0.4232051]), 0.25) == pytest.approx([0.2], abs=1e-7)
    assert recompute_target_eps(Y, np.sqrt(0.3) * Y, 0.3) == pytest.approx([0.0], abs=1e-15)


def test_round_trips_over_random_tuples():
    rng = np.random.default_rng(0)
    n = 10_000
    y = rng.uniform(-1.0, 1.0, size=(n, 1))
    eps = rng.standard_normal((n, 1))
    gamma = rng.uniform(GAMMA_CLIP, 1.0 - GAMMA_CLIP, size=n)
    y_t = forward_diffuse(y, eps, gamma)
    assert np.max(np.abs(eps_to_sample(y_t, eps, gamma) - y)) < 1e-9
    eps_back = recompute_target_eps(y, y_t, gamma)
    assert np.max(np.abs(forward_diffuse(y, eps_back, gamma) - y_t)) < 1e-9


def test_forward_marginal_moments():
    rng = np.random.default_rng(1)
    n = 100_000
    gamma = 0.36
    y_t = forward_diffuse(np.full(n, 0.5), rng.standard_normal(n), gamma)
    stderr = np.sqrt(1.0 - gamma) / np.sqrt(n)
    assert abs(y_t.mean() - 0.6 * 0.5) < 3 * stderr
    assert y_t.var() == pytest.approx(1.0 - gamma, rel=0.05)


def test_gamma_clip_guards():
    with pytest.raises(ScheduleError):
        eps_to_sample(Y, EPS, GAMMA_CLIP / 10)
    with pytest.raises(ScheduleError):
        recompute_target_eps(Y, Y, 1.0)
    with pytest.raises(ScheduleError):
        forward_diffuse(Y, EPS, 0.0)


def test_shape_mismatch():
    with pytest.raises(ShapeError):
        forward_diffuse(np.zeros((2, 2)), np.zeros((2, 3)), 0.5)
    with pytest.raises(ShapeError):
        forward_diffuse(np.zeros((2, 3)), np.zeros((2, 3)), np.array([0.5, 0.5, 0.5]))


def test_ancestral_variance_nonnegative_on_chain():
    for kind in ("cosine", "linear_beta"):
        for step in NoiseSchedule(kind=kind, steps=128).chain():
            if step.is_final:
                continue
            var = ancestral_variance(step.gamma_t, step.gamma_s)
            assert 0.0 <= var <= 1.0 - step.gamma_s


def test_ancestral_variance_vanishes_for_a_no_op_step():
    schedule = NoiseSchedule()
    step = schedule.step(0.5, 0.5 - 1e-9)
    assert ancestral_variance(step.gamma_t, step.gamma_s) == pytest.approx(0.0, abs=1e-8)
    with pytest.raises(ScheduleError):
        ancestral_variance(0.5, 0.4)
