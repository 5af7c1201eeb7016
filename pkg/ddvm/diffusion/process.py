"""Forward noising and its inversions in terms of gamma."""

from typing import Union

import numpy as np

from ddvm.diffusion.schedule import GAMMA_CLIP
from ddvm.errors import ScheduleError, ShapeError

GammaLike = Union[float, np.ndarray]

# relative slack on the clip comparisons
_CLIP_SLACK = 1e-9


def _expand(gamma: GammaLike, like: np.ndarray) -> np.ndarray:
    """Broadcast a scalar or per-example gamma over the trailing axes of `like`."""
    g = np.asarray(gamma, dtype=np.float64)
    if g.ndim == 0:
        return g
    if g.ndim != 1 or like.ndim < 2 or g.shape[0] != like.shape[0]:
        raise ShapeError("gamma must be a scalar or one value per example", g.shape, like.shape)
    return g.reshape((-1,) + (1,) * (like.ndim - 1))


def _same_shape(a: np.ndarray, b: np.ndarray, what: str) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{what} shapes differ", a.shape, b.shape)


def forward_diffuse(y0: np.ndarray, eps: np.ndarray, gamma: GammaLike) -> np.ndarray:
    """y_t = sqrt(gamma) * y0 + sqrt(1 - gamma) * eps."""
    y0 = np.asarray(y0, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    _same_shape(y0, eps, "target and noise")
    g = _expand(gamma, y0)
    if np.any(g <= 0.0) or np.any(g > 1.0):
        raise ScheduleError("gamma must lie in (0, 1]")
    return np.sqrt(g) * y0 + np.sqrt(1.0 - g) * eps


def eps_to_sample(y_t: np.ndarray, eps_hat: np.ndarray, gamma: GammaLike) -> np.ndarray:
    """Clean-sample estimate (y_t - sqrt(1 - gamma) * eps_hat) / sqrt(gamma)."""
    y_t = np.asarray(y_t, dtype=np.float64)
    eps_hat = np.asarray(eps_hat, dtype=np.float64)
    _same_shape(y_t, eps_hat, "noisy sample and noise estimate")
    g = _expand(gamma, y_t)
    if np.any(g < GAMMA_CLIP * (1.0 - _CLIP_SLACK)) or np.any(g > 1.0):
        raise ScheduleError(f"gamma below the clip floor {GAMMA_CLIP}; the sample estimate is unstable")
    return (y_t - np.sqrt(1.0 - g) * eps_hat) / np.sqrt(g)


def recompute_target_eps(y0: np.ndarray, y_t: np.ndarray, gamma: GammaLike) -> np.ndarray:
    """Noise that maps y0 to y_t at gamma: (y_t - sqrt(gamma) * y0) / sqrt(1 - gamma)."""
    y0 = np.asarray(y0, dtype=np.float64)
    y_t = np.asarray(y_t, dtype=np.float64)
    _same_shape(y_t, y0, "noisy sample and target")
    g = _expand(gamma, y_t)
    ceiling = 1.0 - GAMMA_CLIP
    if np.any(g > ceiling + GAMMA_CLIP * _CLIP_SLACK) or np.any(g <= 0.0):
        raise ScheduleError(f"gamma above the clip ceiling {ceiling}; the implied noise is unstable")
    return (y_t - np.sqrt(g) * y0) / np.sqrt(1.0 - g)


def ancestral_variance(gamma_t: float, gamma_s: float) -> float:
    """Posterior variance of y_s given y_t and y0, for s < t."""
    if not (0.0 < gamma_t < gamma_s <= 1.0):
        raise ScheduleError(f"need 0 < gamma_t < gamma_s <= 1, got {gamma_t}, {gamma_s}")
    return max(0.0, (1.0 - gamma_s) / (1.0 - gamma_t) * (1.0 - gamma_t / gamma_s))
