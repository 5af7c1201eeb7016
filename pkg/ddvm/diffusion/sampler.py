"""
DDPM ancestral sampling and replacement guidance.

All chains operate on batched NHWC arrays. An unbatched conditioning image
(H, W, C) is accepted and the result is returned unbatched as well.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Protocol, Tuple

import numpy as np

from ddvm.diffusion.process import ancestral_variance, eps_to_sample, forward_diffuse
from ddvm.diffusion.schedule import DiffusionStep, NoiseSchedule
from ddvm.errors import ShapeError
from ddvm.sparse_data.target import SparseTarget

logger = logging.getLogger(__name__)

EMPTY_MASK_WARNING = "empty_mask"


class EpsModel(Protocol):
    """Anything that predicts the noise in y_t given the conditioning x."""

    @property
    def out_channels(self) -> int: ...

    def predict(self, x: np.ndarray, y_t: np.ndarray, t: np.ndarray, use_ema: bool = True) -> np.ndarray: ...


@dataclass(frozen=True)
class GuidedSample:
    values: np.ndarray
    warnings: Tuple[str, ...] = ()


def _as_batch(x: np.ndarray) -> Tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 3:
        return arr[None], True
    if arr.ndim != 4:
        raise ShapeError("conditioning must be (H, W, C) or (B, H, W, C)", arr.shape)
    return arr, False


def _unbatch(values: np.ndarray, single: bool) -> np.ndarray:
    return values[0] if single else values


def _predict_eps(model: EpsModel, x: np.ndarray, y_t: np.ndarray, t: float, use_ema: bool) -> np.ndarray:
    eps_hat = np.asarray(model.predict(x, y_t, np.full(y_t.shape[0], t), use_ema=use_ema), dtype=np.float64)
    if eps_hat.shape != y_t.shape:
        raise ShapeError("noise prediction does not match the sample shape", eps_hat.shape, y_t.shape)
    return eps_hat


def ddpm_ancestral_step(
    model: EpsModel,
    x: np.ndarray,
    y_t: np.ndarray,
    step: DiffusionStep,
    rng: np.random.Generator,
    clip: bool = True,
    use_ema: bool = True,
) -> np.ndarray:
    """
    One refinement step y_t -> y_s.

    The clean estimate is clipped to [-1, 1] when `clip` is set. At s = 0 the
    step is deterministic and returns the clean estimate.
    """
    xb, single = _as_batch(x)
    yb = np.asarray(y_t, dtype=np.float64)
    if single:
        yb = yb[None]
    eps_hat = _predict_eps(model, xb, yb, step.t, use_ema)
    y0_hat = eps_to_sample(yb, eps_hat, step.gamma_t)
    if clip:
        y0_hat = np.clip(y0_hat, -1.0, 1.0)
    if step.is_final:
        return _unbatch(y0_hat, single)
    var = ancestral_variance(step.gamma_t, step.gamma_s)
    mean = np.sqrt(step.gamma_s) * y0_hat + np.sqrt(max(0.0, 1.0 - step.gamma_s - var)) * eps_hat
    y_s = mean + np.sqrt(var) * rng.standard_normal(yb.shape)
    return _unbatch(y_s, single)


def run_chain(
    model: EpsModel,
    x: np.ndarray,
    y_start: np.ndarray,
    schedule: NoiseSchedule,
    rng: np.random.Generator,
    steps: int = 0,
    t_start: float = 1.0,
    clip: bool = True,
    use_ema: bool = True,
    known: Optional[SparseTarget] = None,
) -> np.ndarray:
    """
    Run the discretized chain from y_start at t_start down to t = 0.

    With `known`, annotated pixels are replaced by a freshly noised copy of the
    known values before every step and by the exact values after the last.
    """
    xb, single = _as_batch(x)
    y = np.array(y_start, dtype=np.float64)
    if single:
        y = y[None]
    if y.shape[:3] != xb.shape[:3]:
        raise ShapeError("sample and conditioning differ in batch or spatial shape", y.shape, xb.shape)
    known_values = known_mask = None
    if known is not None:
        known_values = np.asarray(known.values, dtype=np.float64).reshape(y.shape)
        known_mask = np.broadcast_to(known.mask.reshape(y.shape[:3] + (1,)), y.shape)
    for step in schedule.chain(steps, t_start):
        if known_mask is not None:
            noised = forward_diffuse(known_values, rng.standard_normal(y.shape), step.gamma_t)
            y = np.where(known_mask, noised, y)
        y = ddpm_ancestral_step(model, xb, y, step, rng, clip=clip, use_ema=use_ema)
        logger.debug(f"chain step t={step.t:.4f} -> s={step.s:.4f}")
    if known_mask is not None:
        y = np.where(known_mask, known_values, y)
    return _unbatch(y, single)


def sample(
    model: EpsModel,
    x: np.ndarray,
    schedule: NoiseSchedule,
    steps: int = 0,
    rng: Optional[np.random.Generator] = None,
    clip: bool = True,
    use_ema: bool = True,
) -> np.ndarray:
    """Draw y_1 ~ N(0, I) and refine it to y_0 with `steps` (default: schedule.steps) ancestral steps."""
    rng = rng if rng is not None else np.random.default_rng()
    xb, single = _as_batch(x)
    y1 = rng.standard_normal(xb.shape[:3] + (model.out_channels,))
    out = run_chain(model, xb, y1, schedule, rng, steps=steps, clip=clip, use_ema=use_ema)
    return _unbatch(out, single)


def sample_with_replacement(
    model: EpsModel,
    x: np.ndarray,
    known: SparseTarget,
    schedule: NoiseSchedule,
    steps: int = 0,
    rng: Optional[np.random.Generator] = None,
    clip: bool = True,
    use_ema: bool = True,
) -> GuidedSample:
    """
    Impute the unknown pixels of a normalized target.

    An empty mask degrades to plain sample() and flags the result with
    EMPTY_MASK_WARNING.
    """
    rng = rng if rng is not None else np.random.default_rng()
    xb, single = _as_batch(x)
    expected = xb.shape[:3] + (model.out_channels,)
    if int(np.prod(known.values.shape)) != int(np.prod(expected)):
        raise ShapeError("known values do not match the sample shape", known.values.shape, expected)
    if not known.mask.any():
        logger.warning("replacement mask is empty; sampling without guidance")
        values = sample(model, xb, schedule, steps=steps, rng=rng, clip=clip, use_ema=use_ema)
        return GuidedSample(_unbatch(values, single), (EMPTY_MASK_WARNING,))
    y1 = rng.standard_normal(expected)
    values = run_chain(model, xb, y1, schedule, rng, steps=steps, clip=clip, use_ema=use_ema, known=known)
    return GuidedSample(_unbatch(values, single))
