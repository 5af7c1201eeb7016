"""UNet-style denoiser with FiLM time conditioning."""

from ddvm.denoiser.arch import DenoiserArch
from ddvm.denoiser.checkpoint import FORMAT_VERSION, MAGIC, load_checkpoint, save_checkpoint
from ddvm.denoiser.model import (
    TIME_SCALE,
    DenoiserModel,
    forward,
    init_params,
    reinit_io_layers,
    time_embed,
)

__all__ = [
    "FORMAT_VERSION", "MAGIC", "TIME_SCALE", "DenoiserArch", "DenoiserModel", "forward",
    "init_params", "load_checkpoint", "reinit_io_layers", "save_checkpoint", "time_embed",
]
