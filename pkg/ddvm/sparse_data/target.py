"""Sparse ground truth (values + validity mask) and normalization specs."""

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ddvm.errors import NonFiniteError, NormalizationError, ShapeError
from ddvm.numeric.field import DenseField

INDOOR_MAX_DEPTH = 10.0
OUTDOOR_MAX_DEPTH = 80.0

TASKS = ("depth", "flow")
TASK_CHANNELS = {"depth": 1, "flow": 2}


@dataclass(frozen=True, eq=False)
class SparseTarget:
    """
    Annotated ground truth: values (..., H, W, C) and a boolean mask (..., H, W).

    Leading batch axes are allowed. Pixels outside the mask carry the
    sentinel 0 whatever was passed in.
    """

    values: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        mask = np.array(self.mask, dtype=bool)
        if values.ndim == mask.ndim:
            values = values[..., None]
        if values.ndim < 3 or values.shape[:-1] != mask.shape:
            raise ShapeError("SparseTarget values and mask disagree", values.shape, mask.shape)
        valid = mask[..., None]
        if not np.all(np.isfinite(values[np.broadcast_to(valid, values.shape)])):
            raise NonFiniteError("SparseTarget has non-finite values at annotated pixels")
        values = np.where(valid, values, 0.0)
        values.flags.writeable = False
        mask.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", mask)

    @classmethod
    def dense(cls, values) -> "SparseTarget":
        arr = np.asarray(values, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[..., None]
        return cls(arr, np.ones(arr.shape[:-1], dtype=bool))

    @classmethod
    def stack(cls, targets: Sequence["SparseTarget"]) -> "SparseTarget":
        return cls(np.stack([t.values for t in targets]), np.stack([t.mask for t in targets]))

    @property
    def batched(self) -> bool:
        return self.values.ndim == 4

    @property
    def height(self) -> int:
        return self.values.shape[-3]

    @property
    def width(self) -> int:
        return self.values.shape[-2]

    @property
    def channels(self) -> int:
        return self.values.shape[-1]

    @property
    def n_valid(self) -> int:
        return int(self.mask.sum())

    @property
    def field(self) -> DenseField:
        if self.batched:
            raise ShapeError("field is only defined for an unbatched target", self.values.shape)
        return DenseField(self.values)

    def __len__(self) -> int:
        return self.values.shape[0] if self.batched else 1

    def __getitem__(self, index) -> "SparseTarget":
        if not self.batched:
            raise ShapeError("cannot index an unbatched target", self.values.shape)
        return SparseTarget(self.values[index], self.mask[index])


@dataclass(frozen=True)
class NormSpec:
    """How a task's physical units map onto the model's [-1, 1] range."""

    task: str
    d_max: float = INDOOR_MAX_DEPTH
    flow_width: float = 1.0
    flow_height: float = 1.0

    def __post_init__(self):
        if self.task not in TASKS:
            raise NormalizationError(f"unknown task '{self.task}', expected one of {TASKS}")
        if not self.d_max > 0:
            raise NormalizationError(f"d_max must be positive, got {self.d_max}")
        if not (self.flow_width > 0 and self.flow_height > 0):
            raise NormalizationError(
                f"flow denominators must be positive, got W={self.flow_width} H={self.flow_height}")

    @classmethod
    def for_depth(cls, d_max: float = INDOOR_MAX_DEPTH) -> "NormSpec":
        return cls("depth", d_max=d_max)

    @classmethod
    def for_flow(cls, width: float, height: float) -> "NormSpec":
        return cls("flow", flow_width=float(width), flow_height=float(height))

    @property
    def channels(self) -> int:
        return TASK_CHANNELS[self.task]

    def rescaled(self, width: int, height: int) -> "NormSpec":
        """The same spec for a frame resized to (height, width)."""
        if self.task == "depth":
            return self
        return NormSpec.for_flow(width, height)
