"""Noise-prediction loss restricted to annotated pixels."""

from dataclasses import dataclass

import numpy as np

from ddvm.errors import ShapeError
from ddvm.numeric.tensor import ArrayLike, Tensor, absolute, as_tensor, masked_select_mean, square
from ddvm.training.config import LOSS_KINDS


@dataclass(frozen=True)
class MaskedLoss:
    value: Tensor
    n_valid: int
    degenerate: bool = False

    @property
    def scalar(self) -> float:
        return self.value.item()


def masked_loss(eps: ArrayLike, eps_hat: ArrayLike, mask: np.ndarray, kind: str = "l1") -> MaskedLoss:
    """
    Mean |eps - eps_hat| (or its square) over mask-true elements.

    The (..., H, W) mask is broadcast across channels. Mask-false elements
    enter with weight 0, so they contribute neither to the value nor to the
    gradient. An all-false mask gives a constant 0 flagged as degenerate.
    """
    if kind not in LOSS_KINDS:
        raise ValueError(f"unknown loss '{kind}', expected one of {LOSS_KINDS}")
    target = as_tensor(eps)
    pred = as_tensor(eps_hat)
    if target.shape != pred.shape:
        raise ShapeError("noise and noise estimate differ in shape", target.shape, pred.shape)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape == pred.shape[:-1]:
        mask = mask[..., None]
    if mask.shape[:-1] != pred.shape[:-1] or mask.shape[-1] not in (1, pred.shape[-1]):
        raise ShapeError("mask does not match the prediction", mask.shape, pred.shape)
    weights = np.broadcast_to(mask, pred.shape).astype(pred.data.dtype)
    n_valid = int(weights.sum())
    if n_valid == 0:
        return MaskedLoss(Tensor(0.0), 0, degenerate=True)
    residual = pred - target
    per_element = absolute(residual) if kind == "l1" else square(residual)
    return MaskedLoss(masked_select_mean(per_element, weights, n_valid), n_valid)
