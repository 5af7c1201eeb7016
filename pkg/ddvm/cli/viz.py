"""Color coding of flow fields, depth maps, variances and error maps."""

from typing import Optional

import numpy as np
from matplotlib import colormaps

from ddvm.errors import ShapeError
from ddvm.sparse_data.target import SparseTarget

# Middlebury color wheel segment lengths
RY, YG, GC, CB, BM, MR = 15, 6, 4, 11, 13, 6

DEPTH_CMAP = "magma_r"
VARIANCE_CMAP = "inferno"
ERROR_CMAP = "hot"


def make_color_wheel() -> np.ndarray:
    """(55, 3) wheel in 0..255: red, yellow, green, cyan, blue, magenta and back."""
    ncols = RY + YG + GC + CB + BM + MR
    wheel = np.zeros((ncols, 3))
    col = 0
    wheel[0:RY, 0] = 255
    wheel[0:RY, 1] = np.floor(255 * np.arange(RY) / RY)
    col += RY
    wheel[col:col + YG, 0] = 255 - np.floor(255 * np.arange(YG) / YG)
    wheel[col:col + YG, 1] = 255
    col += YG
    wheel[col:col + GC, 1] = 255
    wheel[col:col + GC, 2] = np.floor(255 * np.arange(GC) / GC)
    col += GC
    wheel[col:col + CB, 1] = 255 - np.floor(255 * np.arange(CB) / CB)
    wheel[col:col + CB, 2] = 255
    col += CB
    wheel[col:col + BM, 2] = 255
    wheel[col:col + BM, 0] = np.floor(255 * np.arange(BM) / BM)
    col += BM
    wheel[col:col + MR, 2] = 255 - np.floor(255 * np.arange(MR) / MR)
    wheel[col:col + MR, 0] = 255
    return wheel


def flow_to_color(flow: np.ndarray, mask: Optional[np.ndarray] = None,
                  max_radius: Optional[float] = None) -> np.ndarray:
    """
    Hue encodes direction and saturation magnitude, normalized by max_radius
    (default: the largest valid vector). Masked-out pixels are black.
    """
    flow = np.asarray(flow, dtype=np.float64)
    if flow.ndim != 3 or flow.shape[-1] != 2:
        raise ShapeError("flow must be (H, W, 2)", flow.shape)
    valid = np.all(np.isfinite(flow), axis=-1)
    if mask is not None:
        valid &= np.asarray(mask, dtype=bool)
    u = np.where(valid, flow[..., 0], 0.0)
    v = np.where(valid, flow[..., 1], 0.0)
    rad = np.sqrt(u ** 2 + v ** 2)
    if max_radius is None:
        max_radius = float(rad[valid].max()) if valid.any() else 0.0
    scale = max(max_radius, np.finfo(np.float64).eps)
    u, v, rad = u / scale, v / scale, rad / scale

    wheel = make_color_wheel()
    ncols = wheel.shape[0]
    angle = np.arctan2(-v, -u) / np.pi
    fk = (angle + 1) / 2 * (ncols - 1)
    k0 = np.floor(fk).astype(int)
    k1 = (k0 + 1) % ncols
    f = (fk - k0)[..., None]
    col = (1 - f) * wheel[k0] / 255.0 + f * wheel[k1] / 255.0
    inside = (rad <= 1)[..., None]
    col = np.where(inside, 1 - rad[..., None] * (1 - col), col * 0.75)
    img = np.floor(255 * col).astype(np.uint8)
    img[~valid] = 0
    return img


def colorize(values: np.ndarray, cmap: str, mask: Optional[np.ndarray] = None,
             vmin: Optional[float] = None, vmax: Optional[float] = None) -> np.ndarray:
    """Scalar map to uint8 RGB through a matplotlib colormap; masked-out pixels are black."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim == 3 and values.shape[-1] == 1:
        values = values[..., 0]
    if values.ndim != 2:
        raise ShapeError("colorize expects a single-channel map", values.shape)
    valid = np.isfinite(values)
    if mask is not None:
        valid &= np.asarray(mask, dtype=bool)
    shown = values[valid]
    lo = vmin if vmin is not None else (float(shown.min()) if shown.size else 0.0)
    hi = vmax if vmax is not None else (float(shown.max()) if shown.size else 1.0)
    span = hi - lo if hi > lo else 1.0
    scaled = np.clip((np.where(valid, values, lo) - lo) / span, 0.0, 1.0)
    rgb = (colormaps[cmap](scaled)[..., :3] * 255.0).round().astype(np.uint8)
    rgb[~valid] = 0
    return rgb


def depth_to_color(depth: np.ndarray, d_max: float, mask: Optional[np.ndarray] = None) -> np.ndarray:
    return colorize(depth, DEPTH_CMAP, mask, vmin=0.0, vmax=d_max)


def variance_to_color(variance: np.ndarray) -> np.ndarray:
    """Heat map of the per-pixel ensemble variance, summed over channels."""
    variance = np.asarray(variance, dtype=np.float64)
    if variance.ndim == 3:
        variance = variance.sum(axis=-1)
    return colorize(variance, VARIANCE_CMAP, vmin=0.0)


def error_map(pred: np.ndarray, gt: SparseTarget) -> np.ndarray:
    """Per-pixel |pred - gt| (end-point error for flow); 0 where gt is missing."""
    pred = np.asarray(pred, dtype=np.float64)
    if pred.ndim == 2:
        pred = pred[..., None]
    if pred.shape != gt.values.shape:
        raise ShapeError("prediction and ground truth differ in shape", pred.shape, gt.values.shape)
    err = np.sqrt(np.sum((pred - gt.values) ** 2, axis=-1))
    return np.where(gt.mask, err, 0.0)


def error_to_color(pred: np.ndarray, gt: SparseTarget) -> np.ndarray:
    return colorize(error_map(pred, gt), ERROR_CMAP, gt.mask, vmin=0.0)
