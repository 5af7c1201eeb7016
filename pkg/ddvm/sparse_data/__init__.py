"""Validity masks, normalization and infilling of sparse ground truth."""

from ddvm.sparse_data.infill import INFILL_MODES, infill, infill_flow_rowcol, infill_nearest
from ddvm.sparse_data.normalize import denormalize, normalize, normalize_values
from ddvm.sparse_data.resize import BICUBIC, BILINEAR, resize_dense, resize_sparse
from ddvm.sparse_data.target import (
    INDOOR_MAX_DEPTH,
    OUTDOOR_MAX_DEPTH,
    TASK_CHANNELS,
    TASKS,
    NormSpec,
    SparseTarget,
)

__all__ = [
    "BICUBIC", "BILINEAR", "INDOOR_MAX_DEPTH", "INFILL_MODES", "OUTDOOR_MAX_DEPTH", "TASKS",
    "TASK_CHANNELS", "NormSpec", "SparseTarget", "denormalize", "infill", "infill_flow_rowcol",
    "infill_nearest", "normalize", "normalize_values", "resize_dense", "resize_sparse",
]
