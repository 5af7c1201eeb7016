"""Flow and depth evaluation metrics."""

from ddvm.metrics.report import (
    DEPTH_KEYS,
    FL_ABS_THRESHOLD,
    FL_REL_THRESHOLD,
    FLOW_KEYS,
    MIN_EVAL_DEPTH,
    MetricReport,
    aggregate,
    depth_metrics,
    flow_metrics,
)

__all__ = [
    "DEPTH_KEYS", "FLOW_KEYS", "FL_ABS_THRESHOLD", "FL_REL_THRESHOLD", "MIN_EVAL_DEPTH", "MetricReport",
    "aggregate", "depth_metrics", "flow_metrics",
]
