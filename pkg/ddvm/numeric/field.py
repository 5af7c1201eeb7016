"""
DenseField: an immutable H x W x C grid of real values in normalized units.

Layout is row-major with channels innermost, the same convention used by
every file format and test in the toolkit.
"""

from typing import Tuple

import numpy as np

from ddvm.errors import NonFiniteError, ShapeError


class DenseField:
    """Read-only (height, width, channels) array of finite reals."""

    __slots__ = ("_values",)

    def __init__(self, values, dtype=np.float64):
        arr = np.array(values, dtype=dtype)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3:
            raise ShapeError("DenseField expects (height, width, channels)", arr.shape)
        if not np.all(np.isfinite(arr)):
            raise NonFiniteError("DenseField values must be finite")
        arr.flags.writeable = False
        self._values = arr

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def shape(self) -> Tuple[int, int, int]:
        return self._values.shape  # type: ignore[return-value]

    @property
    def height(self) -> int:
        return self._values.shape[0]

    @property
    def width(self) -> int:
        return self._values.shape[1]

    @property
    def channels(self) -> int:
        return self._values.shape[2]

    def flat(self) -> np.ndarray:
        """Values in row-major order, channels innermost."""
        return self._values.reshape(-1)

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self._values
        return self._values.astype(dtype)

    def __eq__(self, other) -> bool:
        if not isinstance(other, DenseField):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self._values, other._values)

    def __hash__(self):
        return hash((self.shape, self._values.tobytes()))

    def __repr__(self) -> str:
        return f"DenseField(height={self.height}, width={self.width}, channels={self.channels})"
