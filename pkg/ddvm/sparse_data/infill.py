"""
Imputation of missing ground truth before noising.

Both procedures keep annotated pixels bit-exact and leave no pixel
unfilled when at least one pixel is annotated. Ties go to the smaller row
index, then the smaller column index.
"""

import numpy as np

from ddvm.errors import InfillError, ShapeError
from ddvm.numeric.field import DenseField
from ddvm.sparse_data.target import SparseTarget

INFILL_MODES = ("none", "nearest", "rowcol")

# distance matrix entries per chunk in the nearest-pixel search
_CHUNK_ELEMENTS = 1 << 22


def nearest_valid_index(mask: np.ndarray) -> np.ndarray:
    """
    Flat row-major index of the nearest annotated pixel for every pixel.

    Squared distances are exact integers and argmin returns the first
    minimum, so equidistant candidates resolve to the smallest flat index.
    """
    height, width = mask.shape
    flat_mask = mask.reshape(-1)
    valid = np.flatnonzero(flat_mask)
    if valid.size == 0:
        raise InfillError("cannot infill a target with an empty mask")
    result = np.arange(flat_mask.size)
    invalid = np.flatnonzero(~flat_mask)
    if invalid.size == 0:
        return result
    valid_r, valid_c = np.divmod(valid, width)
    chunk = max(1, _CHUNK_ELEMENTS // valid.size)
    for start in range(0, invalid.size, chunk):
        block = invalid[start:start + chunk]
        rows, cols = np.divmod(block, width)
        d2 = (rows[:, None] - valid_r[None, :]) ** 2 + (cols[:, None] - valid_c[None, :]) ** 2
        result[block] = valid[np.argmin(d2, axis=1)]
    return result


def _infill_nearest_array(values: np.ndarray, mask: np.ndarray) -> np.ndarray:
    height, width, channels = values.shape
    src = nearest_valid_index(mask)
    return values.reshape(-1, channels)[src].reshape(height, width, channels)


def nearest_index_1d(valid: np.ndarray) -> np.ndarray:
    """Index of the nearest valid entry along a line, -1 when the line has none."""
    n = valid.size
    idx = np.flatnonzero(valid)
    if idx.size == 0:
        return np.full(n, -1, dtype=np.int64)
    pos = np.arange(n)
    right = np.searchsorted(idx, pos)
    left_idx = np.where(right > 0, idx[np.maximum(right - 1, 0)], -1)
    right_idx = np.where(right < idx.size, idx[np.minimum(right, idx.size - 1)], -1)
    far = n + 1
    d_left = np.where(left_idx >= 0, pos - left_idx, far)
    d_right = np.where(right_idx >= 0, right_idx - pos, far)
    return np.where(d_left <= d_right, left_idx, right_idx)


def _infill_rowcol_array(values: np.ndarray, mask: np.ndarray) -> np.ndarray:
    if not mask.any():
        raise InfillError("cannot infill a target with an empty mask")
    height, width, _ = values.shape
    filled = values.copy()
    row_valid = np.zeros_like(mask)
    for r in range(height):
        src = nearest_index_1d(mask[r])
        if src[0] < 0:
            continue
        filled[r] = values[r, src]
        row_valid[r] = True
    out = filled.copy()
    for c in range(width):
        src = nearest_index_1d(row_valid[:, c])
        out[:, c] = filled[src, c]
    return out


def infill_nearest(target: SparseTarget) -> DenseField:
    """Every unannotated pixel takes the value of its Euclidean-nearest annotated pixel."""
    if target.batched:
        raise ShapeError("infill_nearest takes one target; use infill() for batches", target.values.shape)
    return DenseField(_infill_nearest_array(target.values, target.mask))


def infill_flow_rowcol(target: SparseTarget) -> DenseField:
    """1-D nearest fill along rows, then along columns over the row-pass result."""
    if target.batched:
        raise ShapeError("infill_flow_rowcol takes one target; use infill() for batches", target.values.shape)
    return DenseField(_infill_rowcol_array(target.values, target.mask))


def infill(target: SparseTarget, mode: str) -> np.ndarray:
    """
    Infill a (possibly batched) target and return a plain array.

    mode "none" returns the values with the 0 sentinel left in the holes.
    """
    if mode not in INFILL_MODES:
        raise ValueError(f"unknown infill mode '{mode}', expected one of {INFILL_MODES}")
    if mode == "none":
        return np.array(target.values)
    fill = _infill_nearest_array if mode == "nearest" else _infill_rowcol_array
    if not target.batched:
        return fill(target.values, target.mask)
    return np.stack([fill(v, m) for v, m in zip(target.values, target.mask)])
