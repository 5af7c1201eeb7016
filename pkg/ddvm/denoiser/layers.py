"""
Parameter initializers and building blocks of the denoiser.

Blocks are functions over a flat name -> Tensor mapping; every parameter
name is the block prefix plus a local suffix (".conv.w", ".scale.b", ...).
"""

import math
from typing import Dict, Mapping

import numpy as np

from ddvm.numeric.ops import conv2d, group_norm, linear
from ddvm.numeric.tensor import Tensor, matmul, reshape, silu, softmax, transpose, upsample_nearest

Params = Mapping[str, Tensor]
InitTable = Dict[str, np.ndarray]


def init_conv(table: InitTable, name: str, rng: np.random.Generator, k: int, c_in: int, c_out: int,
              zero: bool = False) -> None:
    """He-normal kernel (or zeros) and a zero bias."""
    if zero:
        table[f"{name}.w"] = np.zeros((k, k, c_in, c_out))
    else:
        table[f"{name}.w"] = rng.normal(0.0, math.sqrt(2.0 / (k * k * c_in)), size=(k, k, c_in, c_out))
    table[f"{name}.b"] = np.zeros(c_out)


def init_dense(table: InitTable, name: str, rng: np.random.Generator, d_in: int, d_out: int,
               scale: float = 1.0) -> None:
    table[f"{name}.w"] = rng.normal(0.0, scale / math.sqrt(d_in), size=(d_in, d_out))
    table[f"{name}.b"] = np.zeros(d_out)


def init_film_block(table: InitTable, name: str, rng: np.random.Generator, c_in: int, c_out: int,
                    time_hidden: int) -> None:
    init_conv(table, f"{name}.conv", rng, 3, c_in, c_out)
    init_dense(table, f"{name}.scale", rng, time_hidden, c_out, scale=0.5)
    init_dense(table, f"{name}.shift", rng, time_hidden, c_out, scale=0.5)
    if c_in != c_out:
        init_conv(table, f"{name}.skip", rng, 1, c_in, c_out)


def init_attention(table: InitTable, name: str, rng: np.random.Generator, channels: int) -> None:
    for part in ("q", "k", "v"):
        init_dense(table, f"{name}.{part}", rng, channels, channels)
    init_dense(table, f"{name}.proj", rng, channels, channels, scale=0.1)


def conv(params: Params, name: str, x: Tensor, stride: int = 1) -> Tensor:
    return conv2d(x, params[f"{name}.w"], stride=stride) + params[f"{name}.b"]


def dense(params: Params, name: str, x: Tensor) -> Tensor:
    return linear(x, params[f"{name}.w"], params[f"{name}.b"])


def _film_term(params: Params, name: str, temb: Tensor) -> Tensor:
    out = dense(params, name, temb)
    return reshape(out, (out.shape[0], 1, 1, out.shape[1]))


def film_block(params: Params, name: str, x: Tensor, temb: Tensor, groups: int) -> Tensor:
    """
    conv3x3 -> group norm -> FiLM (1 + s) * h + b -> SiLU, with a residual path.

    s and b are per-example, per-channel maps of the time features temb (B, T).
    (1 + s) * normalize(h) + b is s' * normalize(h) + b with s' = 1 + s;
    s = 0 is the identity modulation.
    """
    h = group_norm(conv(params, f"{name}.conv", x), groups)
    h = h * (1.0 + _film_term(params, f"{name}.scale", temb)) + _film_term(params, f"{name}.shift", temb)
    h = silu(h)
    skip = conv(params, f"{name}.skip", x) if f"{name}.skip.w" in params else x
    return h + skip


def attention_block(params: Params, name: str, x: Tensor, groups: int) -> Tensor:
    """Single-head self-attention over all spatial positions, added residually."""
    batch, height, width, channels = x.shape
    tokens = reshape(group_norm(x, groups), (batch, height * width, channels))
    q = dense(params, f"{name}.q", tokens)
    k = dense(params, f"{name}.k", tokens)
    v = dense(params, f"{name}.v", tokens)
    weights = softmax(matmul(q, transpose(k, (0, 2, 1))) / math.sqrt(channels), axis=-1)
    mixed = dense(params, f"{name}.proj", matmul(weights, v))
    return x + reshape(mixed, x.shape)


def downsample(params: Params, name: str, x: Tensor) -> Tensor:
    return conv(params, name, x, stride=2)


def upsample(params: Params, name: str, x: Tensor) -> Tensor:
    return conv(params, name, upsample_nearest(x, 2))
