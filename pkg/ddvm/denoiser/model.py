"""
The denoiser f(x, y_t, t) -> predicted noise.

Parameters are trainable tensors keyed by name; the EMA shadow is a
same-keyed dict of plain arrays. Inference passes read either set
without recording a graph, so several sampling threads may share one
model as long as no training step runs concurrently.
"""

import logging
from typing import Dict, Optional, Union

import numpy as np

from ddvm.denoiser import layers
from ddvm.denoiser.arch import DenoiserArch
from ddvm.errors import ShapeError
from ddvm.numeric.field import DenseField
from ddvm.numeric.ops import group_norm
from ddvm.numeric.tensor import Tensor, as_tensor, concat, get_default_dtype, no_grad, silu

logger = logging.getLogger(__name__)

# highest angular frequency of the time embedding
TIME_SCALE = 100.0
MAX_PERIOD = 10000.0

InputLike = Union[np.ndarray, DenseField, Tensor]


def time_embed(t, dim: int) -> np.ndarray:
    """
    Sinusoidal embedding [sin(w_k t), cos(w_k t)], w_k = TIME_SCALE * MAX_PERIOD^(-k / (dim/2)).

    A scalar t gives a (dim,) vector, an array of B times gives (B, dim).
    """
    if dim < 2 or dim % 2 != 0:
        raise ShapeError("time embedding dimension must be even", (dim,))
    half = dim // 2
    freqs = TIME_SCALE * MAX_PERIOD ** (-np.arange(half, dtype=np.float64) / half)
    times = np.asarray(t, dtype=np.float64)
    angles = times[..., None] * freqs
    return np.concatenate([np.sin(angles), np.cos(angles)], axis=-1)


def init_params(arch: DenoiserArch, rng: np.random.Generator) -> Dict[str, np.ndarray]:
    """Initial weights; the output convolution starts at zero so the first prediction is 0."""
    table: Dict[str, np.ndarray] = {}
    th = arch.time_hidden
    layers.init_dense(table, "time.dense0", rng, arch.time_dim, th)
    layers.init_dense(table, "time.dense1", rng, th, th)
    layers.init_conv(table, "in.conv", rng, 3, arch.ch_in, arch.width(0))
    for lvl in range(arch.levels):
        w = arch.width(lvl)
        layers.init_film_block(table, f"down{lvl}.block0", rng, w, w, th)
        layers.init_film_block(table, f"down{lvl}.block1", rng, w, w, th)
        if arch.has_attention(lvl):
            layers.init_attention(table, f"down{lvl}.attn", rng, w)
        layers.init_conv(table, f"down{lvl}.pool", rng, 3, w, arch.width(lvl + 1))
    wb = arch.width(arch.levels)
    layers.init_film_block(table, "mid.block0", rng, wb, wb, th)
    if arch.has_attention(arch.levels):
        layers.init_attention(table, "mid.attn", rng, wb)
    layers.init_film_block(table, "mid.block1", rng, wb, wb, th)
    for lvl in reversed(range(arch.levels)):
        w = arch.width(lvl)
        layers.init_conv(table, f"up{lvl}.unpool", rng, 3, arch.width(lvl + 1), w)
        layers.init_film_block(table, f"up{lvl}.block0", rng, 2 * w, w, th)
        layers.init_film_block(table, f"up{lvl}.block1", rng, w, w, th)
        if arch.has_attention(lvl):
            layers.init_attention(table, f"up{lvl}.attn", rng, w)
    layers.init_conv(table, "out.conv", rng, 1, arch.width(0), arch.ch_out, zero=True)
    return table


def _as_batch(value: InputLike) -> Tensor:
    if isinstance(value, DenseField):
        value = value.values
    tensor = as_tensor(value)
    if tensor.ndim == 3:
        tensor = tensor.reshape((1,) + tensor.shape)
    if tensor.ndim != 4:
        raise ShapeError("denoiser inputs must be (H, W, C) or (B, H, W, C)", tensor.shape)
    return tensor


class DenoiserModel:
    """UNet with FiLM time conditioning, plus an EMA copy of its weights."""

    def __init__(self, arch: DenoiserArch, params: Dict[str, np.ndarray],
                 ema_params: Optional[Dict[str, np.ndarray]] = None):
        self.arch = arch
        self.params: Dict[str, Tensor] = {
            name: Tensor(value, requires_grad=True, name=name) for name, value in params.items()
        }
        source = ema_params if ema_params is not None else params
        if set(source) != set(params):
            raise ShapeError("EMA weights do not mirror the model weights", (len(source),), (len(params),))
        self.ema_params: Dict[str, np.ndarray] = {}
        for name, value in source.items():
            arr = np.array(value, dtype=get_default_dtype())
            if arr.shape != self.params[name].shape:
                raise ShapeError(f"EMA weight '{name}' has the wrong shape", arr.shape, self.params[name].shape)
            self.ema_params[name] = arr

    @classmethod
    def create(cls, arch: DenoiserArch, rng: Optional[np.random.Generator] = None) -> "DenoiserModel":
        rng = rng if rng is not None else np.random.default_rng()
        model = cls(arch, init_params(arch, rng))
        logger.debug(f"Initialized denoiser with {model.num_parameters()} parameters")
        return model

    @property
    def out_channels(self) -> int:
        return self.arch.ch_out

    def num_parameters(self) -> int:
        return sum(p.size for p in self.params.values())

    def arrays(self) -> Dict[str, np.ndarray]:
        return {name: p.data for name, p in self.params.items()}

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    def forward(self, x: InputLike, y_t: InputLike, t, use_ema: bool = False) -> Tensor:
        """Noise prediction (B, H, W, ch_out); records a graph when one is active and use_ema is off."""
        xb, yb = _as_batch(x), _as_batch(y_t)
        if xb.shape[:3] != yb.shape[:3]:
            raise ShapeError("conditioning and noisy target differ in batch or spatial shape", xb.shape, yb.shape)
        if xb.shape[-1] + yb.shape[-1] != self.arch.ch_in:
            raise ShapeError(f"inputs must have {self.arch.ch_in} channels in total", xb.shape, yb.shape)
        if yb.shape[-1] != self.arch.ch_out:
            raise ShapeError(f"noisy target must have {self.arch.ch_out} channels", yb.shape)
        self.arch.check_spatial(xb.shape[1], xb.shape[2])
        times = np.broadcast_to(np.asarray(t, dtype=np.float64), (xb.shape[0],))
        params = ({name: Tensor(value) for name, value in self.ema_params.items()} if use_ema else self.params)
        return _unet(self.arch, params, concat([xb, yb], axis=-1), times)

    def predict(self, x: InputLike, y_t: InputLike, t, use_ema: bool = True) -> np.ndarray:
        """Inference pass returning a plain array; batch axis kept only if the inputs had one."""
        with no_grad():
            out = self.forward(x, y_t, t, use_ema=use_ema).data
        raw = x.values if isinstance(x, DenseField) else np.asarray(x) if not isinstance(x, Tensor) else x
        single = raw.ndim == 3
        return np.array(out[0] if single else out, dtype=np.float64)

    def update_ema(self, decay: float) -> None:
        """ema <- decay * ema + (1 - decay) * params."""
        if not 0.0 <= decay <= 1.0:
            raise ValueError(f"EMA decay must lie in [0, 1], got {decay}")
        for name, p in self.params.items():
            self.ema_params[name] = decay * self.ema_params[name] + (1.0 - decay) * p.data


def _unet(arch: DenoiserArch, params, h: Tensor, times: np.ndarray) -> Tensor:
    g = arch.groups
    temb = Tensor(time_embed(times, arch.time_dim))
    temb = silu(layers.dense(params, "time.dense0", temb))
    temb = silu(layers.dense(params, "time.dense1", temb))

    h = layers.conv(params, "in.conv", h)
    skips = []
    for lvl in range(arch.levels):
        h = layers.film_block(params, f"down{lvl}.block0", h, temb, g)
        h = layers.film_block(params, f"down{lvl}.block1", h, temb, g)
        if arch.has_attention(lvl):
            h = layers.attention_block(params, f"down{lvl}.attn", h, g)
        skips.append(h)
        h = layers.downsample(params, f"down{lvl}.pool", h)

    h = layers.film_block(params, "mid.block0", h, temb, g)
    if arch.has_attention(arch.levels):
        h = layers.attention_block(params, "mid.attn", h, g)
    h = layers.film_block(params, "mid.block1", h, temb, g)

    for lvl in reversed(range(arch.levels)):
        h = layers.upsample(params, f"up{lvl}.unpool", h)
        h = concat([h, skips[lvl]], axis=-1)
        h = layers.film_block(params, f"up{lvl}.block0", h, temb, g)
        h = layers.film_block(params, f"up{lvl}.block1", h, temb, g)
        if arch.has_attention(lvl):
            h = layers.attention_block(params, f"up{lvl}.attn", h, g)

    h = silu(group_norm(h, g))
    return layers.conv(params, "out.conv", h)


def forward(model: DenoiserModel, x: InputLike, y_t: InputLike, t, use_ema: bool = False) -> Tensor:
    """Noise prediction for the gradient pass; see DenoiserModel.forward."""
    return model.forward(x, y_t, t, use_ema=use_ema)


def reinit_io_layers(model: DenoiserModel, ch_in: int, ch_out: int,
                     rng: Optional[np.random.Generator] = None, task: Optional[str] = None) -> DenoiserModel:
    """
    A new model for a different channel layout that keeps every hidden weight.

    The input convolution is re-drawn and the output convolution zeroed;
    EMA weights of the kept layers carry over, the new layers start with EMA
    equal to their fresh values.
    """
    rng = rng if rng is not None else np.random.default_rng()
    fields = model.arch.to_dict()
    fields.update(ch_in=ch_in, ch_out=ch_out, task=task)
    arch = DenoiserArch(**fields)
    fresh = init_params(arch, rng)
    params, ema = {}, {}
    for name, value in fresh.items():
        if name.startswith(("in.conv.", "out.conv.")):
            params[name] = value
            ema[name] = value
        else:
            params[name] = model.params[name].data.copy()
            ema[name] = model.ema_params[name].copy()
    logger.info(f"Re-initialized input/output layers for ch_in={ch_in}, ch_out={ch_out}")
    return DenoiserModel(arch, params, ema)

