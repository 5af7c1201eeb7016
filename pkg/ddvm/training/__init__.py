"""Masked noise-prediction training with infilling and step unrolling."""

from ddvm.training.config import AUTO_INFILL, LOSS_KINDS, MAX_UNROLL_STEPS, PRESETS, TASK_INFILL, TrainConfig, preset
from ddvm.training.data import (
    TrainBatch,
    TrainExample,
    build_example,
    draw_batch,
    flip_example,
    normalize_image,
    resize_example,
    stack_frames,
    with_half_resolution,
)
from ddvm.training.loss import MaskedLoss, masked_loss
from ddvm.training.optimizer import TrainState, learning_rate, optimizer_update
from ddvm.training.trainer import METRICS_LOG, NoisedBatch, StepMetrics, fit, prepare_noised, train_step

__all__ = [
    "AUTO_INFILL", "LOSS_KINDS", "MAX_UNROLL_STEPS", "METRICS_LOG", "PRESETS", "TASK_INFILL", "MaskedLoss",
    "NoisedBatch", "StepMetrics", "TrainBatch", "TrainConfig", "TrainExample", "TrainState", "build_example",
    "draw_batch", "fit", "flip_example", "learning_rate", "masked_loss", "normalize_image", "optimizer_update",
    "preset", "prepare_noised", "resize_example", "stack_frames", "train_step", "with_half_resolution",
]
