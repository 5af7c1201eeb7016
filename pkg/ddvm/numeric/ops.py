"""Convolution and normalization built on the tensor primitives (NHWC layout)."""

from typing import Optional

import numpy as np

from ddvm.errors import ShapeError
from ddvm.numeric.tensor import ArrayLike, Tensor, _apply, as_tensor, reduce_mean, reshape, square

PADDING_MODES = ("same", "valid")


def conv_output_size(size: int, kernel: int, stride: int, padding: str) -> int:
    pad = kernel // 2 if padding == "same" else 0
    return (size + 2 * pad - kernel) // stride + 1


def conv2d(x: ArrayLike, kernel: ArrayLike, stride: int = 1, padding: str = "same") -> Tensor:
    """
    2-D cross-correlation of an NHWC input with a (k, k, Cin, Cout) kernel.

    "same" zero-pads k // 2 on every side, so stride 1 keeps the spatial
    shape; "valid" does not pad. A 3-D (H, W, C) input is treated as a
    batch of one and returned without the batch axis.
    """
    tx, tk = as_tensor(x), as_tensor(kernel)
    if tx.ndim == 3:
        out = conv2d(reshape(tx, (1,) + tx.shape), tk, stride, padding)
        return reshape(out, out.shape[1:])
    if tx.ndim != 4:
        raise ShapeError("conv2d expects an NHWC input", tx.shape)
    if tk.ndim != 4 or tk.shape[0] != tk.shape[1]:
        raise ShapeError("conv2d expects a square (k, k, Cin, Cout) kernel", tk.shape)
    k = tk.shape[0]
    if k % 2 == 0:
        raise ShapeError("conv2d kernel size must be odd", tk.shape)
    if tx.shape[-1] != tk.shape[2]:
        raise ShapeError("conv2d channel mismatch between input and kernel", tx.shape, tk.shape)
    if padding not in PADDING_MODES:
        raise ValueError(f"Unknown padding mode '{padding}', expected one of {PADDING_MODES}")
    if stride < 1:
        raise ValueError(f"conv2d stride must be >= 1, got {stride}")

    batch, height, width, _ = tx.shape
    pad = k // 2 if padding == "same" else 0
    out_h = conv_output_size(height, k, stride, padding)
    out_w = conv_output_size(width, k, stride, padding)
    if out_h < 1 or out_w < 1:
        raise ShapeError("conv2d input is smaller than the kernel", tx.shape, tk.shape)
    span_h = stride * (out_h - 1) + 1
    span_w = stride * (out_w - 1) + 1

    def forward(a, w):
        padded = np.pad(a, ((0, 0), (pad, pad), (pad, pad), (0, 0))) if pad else a
        out = np.zeros((batch, out_h, out_w, w.shape[3]), dtype=np.result_type(a, w))
        for i in range(k):
            for j in range(k):
                taps = padded[:, i:i + span_h:stride, j:j + span_w:stride, :]
                out += taps @ w[i, j]
        return out

    def backward(g):
        a, w = tx.data, tk.data
        padded = np.pad(a, ((0, 0), (pad, pad), (pad, pad), (0, 0))) if pad else a
        grad_padded = np.zeros_like(padded)
        grad_w = np.zeros_like(w)
        flat_g = g.reshape(-1, g.shape[-1])
        for i in range(k):
            for j in range(k):
                taps = padded[:, i:i + span_h:stride, j:j + span_w:stride, :]
                grad_w[i, j] = taps.reshape(-1, taps.shape[-1]).T @ flat_g
                grad_padded[:, i:i + span_h:stride, j:j + span_w:stride, :] += g @ w[i, j].T
        grad_a = grad_padded[:, pad:pad + height, pad:pad + width, :] if pad else grad_padded
        return grad_a, grad_w

    return _apply("conv2d", (tx, tk), forward, backward)


def linear(x: ArrayLike, weight: ArrayLike, bias: Optional[ArrayLike] = None) -> Tensor:
    out = as_tensor(x) @ as_tensor(weight)
    return out + bias if bias is not None else out


def group_norm(x: ArrayLike, groups: int, eps: float = 1e-5) -> Tensor:
    """Normalize NHWC activations over (H, W, channels-in-group); no affine terms."""
    tx = as_tensor(x)
    batch, height, width, channels = tx.shape
    if channels % groups != 0:
        raise ShapeError(f"group_norm: {channels} channels not divisible by {groups} groups", tx.shape)
    grouped = reshape(tx, (batch, height, width, groups, channels // groups))
    centered = grouped - reduce_mean(grouped, axis=(1, 2, 4), keepdims=True)
    variance = reduce_mean(square(centered), axis=(1, 2, 4), keepdims=True)
    normalized = centered * (variance + eps) ** -0.5
    return reshape(normalized, tx.shape)
