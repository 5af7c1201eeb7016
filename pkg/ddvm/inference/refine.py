"""
Coarse-to-fine refinement.

A low-resolution prediction is upsampled bicubically, each layout patch is
re-noised to time t' around it and sampled back to t = 0, and the patches
are merged with the layout weights. Flow vectors are rescaled in pixel
units when the frame grows.
"""

import logging
from typing import Optional, Tuple

import numpy as np

from ddvm.diffusion.process import forward_diffuse
from ddvm.diffusion.sampler import EpsModel, run_chain, sample
from ddvm.diffusion.schedule import NoiseSchedule
from ddvm.errors import ScheduleError, ShapeError
from ddvm.inference.tiling import PatchLayout
from ddvm.parallel import run_parallel, spawn_rngs
from ddvm.sparse_data.normalize import denormalize, normalize_values
from ddvm.sparse_data.resize import BICUBIC, BILINEAR, resize_dense
from ddvm.sparse_data.target import NormSpec

logger = logging.getLogger(__name__)

# t' presets: fine-grained scenes use a later restart than large-motion ones
T_PRIME_PRESETS = {"sintel": 32 / 64, "kitti": 8 / 64}


def upsample_flow_pixels(flow: np.ndarray, size: Tuple[int, int]) -> np.ndarray:
    """Bicubic upsample of a pixel-unit flow field, vectors scaled by the size ratio."""
    flow = np.asarray(flow, dtype=np.float64)
    h_lo, w_lo = flow.shape[:2]
    up = resize_dense(flow, size, order=BICUBIC)
    return up * np.array([size[1] / w_lo, size[0] / h_lo])


def upsample_prediction(base: np.ndarray, size: Tuple[int, int], task: str) -> np.ndarray:
    """Normalized low-resolution prediction to a normalized prediction at size=(H, W)."""
    base = np.asarray(base, dtype=np.float64)
    if base.ndim != 3:
        raise ShapeError("base prediction must be (H, W, C)", base.shape)
    if base.shape[0] > size[0] or base.shape[1] > size[1]:
        raise ShapeError("base prediction is larger than the target frame", base.shape, size)
    if task == "flow":
        low = NormSpec.for_flow(base.shape[1], base.shape[0])
        high = low.rescaled(size[1], size[0])
        return normalize_values(upsample_flow_pixels(denormalize(base, low), size), high)
    return np.clip(resize_dense(base, size, order=BICUBIC), -1.0, 1.0)


def _refine_patch(model: EpsModel, x: np.ndarray, z: np.ndarray, t_prime: float, schedule: NoiseSchedule,
                  steps: int, rng: np.random.Generator, clip: bool, use_ema: bool) -> np.ndarray:
    gamma = schedule.gamma(t_prime)
    y_start = forward_diffuse(z, rng.standard_normal(z.shape), gamma)
    return run_chain(model, x, y_start, schedule, rng, steps=steps, t_start=t_prime, clip=clip, use_ema=use_ema)


def refine(
    model: EpsModel,
    x_hires: np.ndarray,
    base: np.ndarray,
    layout: PatchLayout,
    t_prime: float,
    schedule: NoiseSchedule,
    rng: Optional[np.random.Generator] = None,
    task: Optional[str] = None,
    steps: int = 0,
    clip: bool = True,
    use_ema: bool = True,
) -> np.ndarray:
    """
    Refine a normalized low-resolution prediction at the resolution of x_hires.

    Runs round(t' * steps) sampler steps per patch, one thread per patch.
    """
    if not 0.0 < t_prime < 1.0:
        raise ScheduleError(f"t' must lie in (0, 1), got {t_prime}")
    rng = rng if rng is not None else np.random.default_rng()
    x_hires = np.asarray(x_hires, dtype=np.float64)
    if tuple(x_hires.shape[:2]) != layout.frame:
        raise ShapeError("conditioning does not match the layout frame", x_hires.shape, layout.frame)
    task = task or ("flow" if model.out_channels == 2 else "depth")
    z = upsample_prediction(base, layout.frame, task)
    jobs = [
        (model, x_patch, z_patch, t_prime, schedule, steps, child, clip, use_ema)
        for x_patch, z_patch, child in zip(layout.crop(x_hires), layout.crop(z), spawn_rngs(rng, len(layout)))
    ]
    patches = run_parallel(_refine_patch, jobs)
    logger.debug(f"Refined {len(patches)} patches from t'={t_prime:.4f}")
    return layout.merge(patches)


def coarse_to_fine(
    model: EpsModel,
    x_hires: np.ndarray,
    layout: PatchLayout,
    t_prime: float,
    schedule: NoiseSchedule,
    rng: Optional[np.random.Generator] = None,
    task: Optional[str] = None,
    steps: int = 0,
    clip: bool = True,
    use_ema: bool = True,
) -> Tuple[np.ndarray, np.ndarray]:
    """Sample at half resolution, then refine; returns (refined, low-resolution base)."""
    rng = rng if rng is not None else np.random.default_rng()
    x_hires = np.asarray(x_hires, dtype=np.float64)
    h, w = x_hires.shape[:2]
    x_low = resize_dense(x_hires, (h // 2, w // 2), order=BILINEAR)
    base = sample(model, x_low, schedule, steps=steps, rng=rng, clip=clip, use_ema=use_ema)
    refined = refine(model, x_hires, base, layout, t_prime, schedule, rng, task=task, steps=steps,
                     clip=clip, use_ema=use_ema)
    return refined, base
