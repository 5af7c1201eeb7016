import logging

import numpy as np
import pytest

from ddvm.diffusion import (
    EMPTY_MASK_WARNING,
    NoiseSchedule,
    ddpm_ancestral_step,
    eps_to_sample,
    forward_diffuse,
    run_chain,
    sample,
    sample_with_replacement,
)
from ddvm.errors import ShapeError
from ddvm.sparse_data import SparseTarget

H, W = 6, 5


@pytest.fixture
def image(rng):
    return rng.uniform(-1.0, 1.0, size=(H, W, 3))


@pytest.fixture
def target(rng):
    return rng.uniform(-0.9, 0.9, size=(H, W, 1))


def test_final_step_with_exact_noise_recovers_clean_target(image, target, oracle_model):
    schedule = NoiseSchedule(steps=64)
    step = schedule.step(1.0 / 64, 0.0)
    rng = np.random.default_rng(3)
    y_t = forward_diffuse(target, rng.standard_normal(target.shape), step.gamma_t)
    y0 = ddpm_ancestral_step(oracle_model(target, schedule), image, y_t, step, rng)
    assert y0.shape == target.shape
    assert np.allclose(y0, target, atol=1e-9)


def test_oracle_chain_lands_on_target(image, target, oracle_model):
    schedule = NoiseSchedule(steps=16)
    out = sample(oracle_model(target, schedule), image, schedule, rng=np.random.default_rng(0))
    assert np.allclose(out, target, atol=1e-9)


def test_single_step_is_one_deterministic_jump(image, zero_model):
    schedule = NoiseSchedule(steps=64)
    out = sample(zero_model(1), image, schedule, steps=1, rng=np.random.default_rng(5))
    y1 = np.random.default_rng(5).standard_normal((1, H, W, 1))[0]
    expected = np.clip(eps_to_sample(y1, np.zeros_like(y1), schedule.gamma(1.0)), -1.0, 1.0)
    assert np.array_equal(out, expected)


def test_clip_bounds_output(image, zero_model):
    schedule = NoiseSchedule(steps=4)
    out = sample(zero_model(2), image, schedule, rng=np.random.default_rng(2))
    assert out.shape == (H, W, 2)
    assert out.min() >= -1.0 and out.max() <= 1.0


def test_same_seed_same_samples(image, tiny_depth_model):
    schedule = NoiseSchedule(steps=3)
    a = sample(tiny_depth_model, image, schedule, rng=np.random.default_rng(9))
    b = sample(tiny_depth_model, image, schedule, rng=np.random.default_rng(9))
    assert np.array_equal(a, b)


def test_batched_conditioning_keeps_batch_axis(rng, zero_model):
    x = rng.uniform(-1.0, 1.0, size=(3, H, W, 3))
    out = sample(zero_model(1), x, NoiseSchedule(steps=2), rng=rng)
    assert out.shape == (3, H, W, 1)


def test_partial_chain_from_noised_target(image, target, oracle_model):
    schedule = NoiseSchedule(steps=64)
    rng = np.random.default_rng(4)
    t_prime = 8 / 64
    y_start = forward_diffuse(target, rng.standard_normal(target.shape), schedule.gamma(t_prime))
    out = run_chain(oracle_model(target, schedule), image, y_start, schedule, rng, t_start=t_prime)
    assert np.allclose(out, target, atol=1e-9)


def test_prediction_shape_is_checked(image):
    class WrongModel:
        out_channels = 1

        def predict(self, x, y_t, t, use_ema=True):
            return np.zeros(y_t.shape[:-1] + (2,))

    with pytest.raises(ShapeError):
        sample(WrongModel(), image, NoiseSchedule(steps=2), rng=np.random.default_rng(0))


def test_full_mask_replacement_reproduces_known_values(image, target, tiny_depth_model):
    known = SparseTarget(target, np.ones((H, W), dtype=bool))
    result = sample_with_replacement(tiny_depth_model, image, known, NoiseSchedule(steps=4), rng=np.random.default_rng(1))
    assert np.array_equal(result.values, target)
    assert result.warnings == ()


def test_partial_mask_keeps_known_pixels_bit_exact(image, target, zero_model):
    mask = np.random.default_rng(8).uniform(size=(H, W)) < 0.5
    known = SparseTarget(target, mask)
    result = sample_with_replacement(zero_model(1), image, known, NoiseSchedule(steps=8), rng=np.random.default_rng(1))
    assert np.array_equal(result.values[mask], target[mask])
    assert result.values.shape == (H, W, 1)


def test_empty_mask_falls_back_to_plain_sampling(image, zero_model, caplog):
    schedule = NoiseSchedule(steps=4)
    known = SparseTarget(np.zeros((H, W, 1)), np.zeros((H, W), dtype=bool))
    with caplog.at_level(logging.WARNING):
        result = sample_with_replacement(zero_model(1), image, known, schedule, rng=np.random.default_rng(6))
    plain = sample(zero_model(1), image, schedule, rng=np.random.default_rng(6))
    assert result.warnings == (EMPTY_MASK_WARNING,)
    assert np.array_equal(result.values, plain)
    assert "mask is empty" in caplog.text


def test_replacement_rejects_mismatched_known(image, zero_model):
    known = SparseTarget(np.zeros((H + 1, W, 1)), np.ones((H + 1, W), dtype=bool))
    with pytest.raises(ShapeError):
        sample_with_replacement(zero_model(1), image, known, NoiseSchedule(steps=2))
