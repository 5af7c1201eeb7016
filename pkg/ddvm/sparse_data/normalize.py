"""
Mapping between physical units and the model's [-1, 1] range.

depth: v' = 2 * clamp(v, 0, d_max) / d_max - 1
flow:  u' = u / W, v' = v / H, clamped to [-1, 1]
"""

from typing import Union

import numpy as np

from ddvm.errors import NormalizationError, ShapeError
from ddvm.numeric.field import DenseField
from ddvm.sparse_data.target import NormSpec, SparseTarget

FieldLike = Union[DenseField, np.ndarray]


def _check_channels(values: np.ndarray, spec: NormSpec) -> None:
    if values.shape[-1] != spec.channels:
        raise ShapeError(f"{spec.task} values must have {spec.channels} channel(s)", values.shape)


def normalize_values(values: np.ndarray, spec: NormSpec) -> np.ndarray:
    """Normalize a dense array of physical values (no mask)."""
    arr = np.asarray(values, dtype=np.float64)
    _check_channels(arr, spec)
    if spec.task == "depth":
        return 2.0 * np.clip(arr, 0.0, spec.d_max) / spec.d_max - 1.0
    scale = np.array([spec.flow_width, spec.flow_height])
    return np.clip(arr / scale, -1.0, 1.0)


def normalize(target: SparseTarget, spec: NormSpec) -> SparseTarget:
    """Normalize annotated values into [-1, 1]; the mask is unchanged."""
    if spec.task == "depth" and np.any(target.values[target.mask] < 0):
        raise NormalizationError("depth must be non-negative at annotated pixels")
    return SparseTarget(normalize_values(target.values, spec), target.mask)


def denormalize(values: FieldLike, spec: NormSpec) -> FieldLike:
    """Inverse of normalize on the non-clamped range; returns the input's type."""
    arr = np.asarray(values, dtype=np.float64)
    _check_channels(arr, spec)
    if spec.task == "depth":
        out = (arr + 1.0) * 0.5 * spec.d_max
    else:
        out = arr * np.array([spec.flow_width, spec.flow_height])
    return DenseField(out) if isinstance(values, DenseField) else out
