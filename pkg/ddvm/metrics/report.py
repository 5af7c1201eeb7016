"""
Evaluation metrics over annotated pixels, in physical units.

flow:  AEPE (pixels) and Fl-all (percent of pixels with EPE > 3 px and > 5% of |gt|)
depth: REL, Sq-rel, RMS, RMS-log, log10 and the delta < 1.25^i accuracies
"""

from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from ddvm.errors import MetricsError, ShapeError
from ddvm.sparse_data.target import SparseTarget

FL_ABS_THRESHOLD = 3.0
FL_REL_THRESHOLD = 0.05
MIN_EVAL_DEPTH = 1e-3
DELTA_BASE = 1.25

FLOW_KEYS = ("aepe", "fl_all")
DEPTH_KEYS = ("rel", "sq_rel", "rms", "rms_log", "log10", "delta1", "delta2", "delta3")

# (top, bottom, left, right) pixel bounds, end-exclusive
Crop = Tuple[int, int, int, int]


@dataclass(frozen=True)
class MetricReport:
    task: str
    values: Dict[str, float] = field(default_factory=dict)
    n_valid: int = 0

    def __getitem__(self, key: str) -> float:
        return self.values[key]

    def to_record(self, **extra) -> Dict:
        record = {"task": self.task, "n_valid": self.n_valid}
        record.update(self.values)
        record.update(extra)
        return record


def _valid_pixels(pred: np.ndarray, gt: SparseTarget, crop: Optional[Crop]):
    pred = np.asarray(pred, dtype=np.float64)
    if pred.ndim == 2:
        pred = pred[..., None]
    if gt.batched or pred.shape != gt.values.shape:
        raise ShapeError("prediction and ground truth differ in shape", pred.shape, gt.values.shape)
    mask = gt.mask
    if crop is not None:
        top, bottom, left, right = crop
        window = np.zeros_like(mask)
        window[top:bottom, left:right] = True
        mask = mask & window
    if not mask.any():
        raise MetricsError("no valid pixel to evaluate")
    return pred[mask], gt.values[mask]


def flow_metrics(pred: np.ndarray, gt: SparseTarget, crop: Optional[Crop] = None) -> MetricReport:
    p, g = _valid_pixels(pred, gt, crop)
    if p.shape[-1] != 2:
        raise ShapeError("flow metrics need (u, v) fields", p.shape)
    epe = np.sqrt(np.sum((p - g) ** 2, axis=-1))
    magnitude = np.sqrt(np.sum(g ** 2, axis=-1))
    outlier = (epe > FL_ABS_THRESHOLD) & (epe > FL_REL_THRESHOLD * magnitude)
    return MetricReport("flow", {"aepe": float(epe.mean()), "fl_all": float(100.0 * outlier.mean())}, int(epe.size))


def depth_metrics(pred: np.ndarray, gt: SparseTarget, cap: float, crop: Optional[Crop] = None) -> MetricReport:
    """Predictions are clamped to [MIN_EVAL_DEPTH, cap] before scoring."""
    if not cap > MIN_EVAL_DEPTH:
        raise MetricsError(f"depth cap must exceed {MIN_EVAL_DEPTH}, got {cap}")
    p, g = _valid_pixels(pred, gt, crop)
    p, g = p[..., 0], g[..., 0]
    if np.any(g <= 0):
        raise MetricsError("ground-truth depth must be positive at annotated pixels")
    p = np.clip(p, MIN_EVAL_DEPTH, cap)
    diff = p - g
    ratio = np.maximum(p / g, g / p)
    values = {
        "rel": float(np.mean(np.abs(diff) / g)),
        "sq_rel": float(np.mean(diff ** 2 / g)),
        "rms": float(np.sqrt(np.mean(diff ** 2))),
        "rms_log": float(np.sqrt(np.mean((np.log(p) - np.log(g)) ** 2))),
        "log10": float(np.mean(np.abs(np.log10(p) - np.log10(g)))),
    }
    for i in (1, 2, 3):
        values[f"delta{i}"] = float(np.mean(ratio < DELTA_BASE ** i))
    return MetricReport("depth", values, int(g.size))


def aggregate(reports: Sequence[MetricReport]) -> MetricReport:
    """Unweighted mean of every metric over examples; n_valid is summed."""
    if not reports:
        raise MetricsError("nothing to aggregate")
    tasks = {r.task for r in reports}
    if len(tasks) != 1:
        raise MetricsError(f"cannot aggregate mixed tasks {sorted(tasks)}")
    keys = reports[0].values.keys()
    values = {key: float(np.mean([r.values[key] for r in reports])) for key in keys}
    return MetricReport(tasks.pop(), values, sum(r.n_valid for r in reports))
