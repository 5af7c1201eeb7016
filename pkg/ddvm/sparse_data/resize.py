"""
Resizing of inputs and targets.

Dense maps use spline interpolation (bilinear by default, bicubic for
coarse-to-fine upsampling); sparse maps use nearest-neighbour sampling so
no value is ever blended with a hole.
"""

from typing import Tuple

import numpy as np
from scipy import ndimage

from ddvm.errors import ShapeError
from ddvm.sparse_data.target import SparseTarget

BILINEAR = 1
BICUBIC = 3


def resize_dense(values: np.ndarray, size: Tuple[int, int], order: int = BILINEAR) -> np.ndarray:
    """Resize an (H, W, C) array to size=(height, width) with a spline of the given order."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 3:
        raise ShapeError("resize_dense expects (height, width, channels)", arr.shape)
    height, width = size
    if (height, width) == arr.shape[:2]:
        return arr.copy()
    factors = (height / arr.shape[0], width / arr.shape[1], 1.0)
    out = ndimage.zoom(arr, factors, order=order, mode="nearest", grid_mode=True)
    if out.shape[:2] != (height, width):
        raise ShapeError(f"resize produced an unexpected shape for target {(height, width)}", out.shape)
    return out


def _nearest_source(n_out: int, n_in: int) -> np.ndarray:
    return np.minimum(((np.arange(n_out) + 0.5) * n_in / n_out).astype(np.int64), n_in - 1)


def resize_sparse(target: SparseTarget, size: Tuple[int, int]) -> SparseTarget:
    """Nearest-neighbour resize of an unbatched sparse target; values are not rescaled."""
    if target.batched:
        raise ShapeError("resize_sparse takes one target", target.values.shape)
    rows = _nearest_source(size[0], target.height)
    cols = _nearest_source(size[1], target.width)
    return SparseTarget(target.values[np.ix_(rows, cols)], target.mask[np.ix_(rows, cols)])
