"""Architecture descriptor for the UNet-style denoiser."""

from dataclasses import asdict, dataclass, fields
from typing import Any, Dict, List, Optional

from ddvm.errors import CheckpointError, ShapeError
from ddvm.sparse_data.target import TASK_CHANNELS, TASKS

GROUPS = 8
IMAGE_CHANNELS = 3


@dataclass(frozen=True)
class DenoiserArch:
    """
    Channel layout and size of a denoiser.

    ch_in counts the conditioning image channels plus the noisy target
    channels; ch_out is the target channel count. attn_at_bottom enables one
    self-attention block at the bottleneck; attn_levels > 1 also adds
    attention to that many of the lowest encoder/decoder levels.
    """

    ch_in: int
    ch_out: int
    base_width: int = 32
    levels: int = 2
    attn_at_bottom: bool = False
    attn_levels: int = 1
    time_dim: int = 64
    groups: int = GROUPS
    task: Optional[str] = None

    def __post_init__(self):
        if self.ch_in < 1 or self.ch_out < 1:
            raise ShapeError("channel counts must be positive", (self.ch_in, self.ch_out))
        if not 1 <= self.levels <= 4:
            raise ShapeError("levels must lie in [1, 4]", (self.levels,))
        if self.base_width % self.groups != 0:
            raise ShapeError(f"base_width must be divisible by {self.groups} groups", (self.base_width,))
        if self.time_dim < 2 or self.time_dim % 2 != 0:
            raise ShapeError("time_dim must be a positive even number", (self.time_dim,))
        if not 1 <= self.attn_levels <= self.levels + 1:
            raise ShapeError("attn_levels must lie in [1, levels + 1]", (self.attn_levels,))
        if self.task is not None:
            if self.task not in TASKS:
                raise ShapeError(f"unknown task '{self.task}'", ())
            if self.ch_out != TASK_CHANNELS[self.task]:
                raise ShapeError(f"{self.task} models predict {TASK_CHANNELS[self.task]} channel(s)", (self.ch_out,))

    @classmethod
    def for_task(cls, task: str, image_channels: int = IMAGE_CHANNELS, **kwargs) -> "DenoiserArch":
        """depth: one image plus the noisy depth; flow: two frames plus the noisy (u, v)."""
        if task not in TASKS:
            raise ShapeError(f"unknown task '{task}', expected one of {TASKS}", ())
        ch_out = TASK_CHANNELS[task]
        ch_in = (image_channels if task == "depth" else 2 * image_channels) + ch_out
        return cls(ch_in=ch_in, ch_out=ch_out, task=task, **kwargs)

    @property
    def cond_channels(self) -> int:
        return self.ch_in - self.ch_out

    @property
    def time_hidden(self) -> int:
        return 2 * self.time_dim

    def width(self, level: int) -> int:
        """Channel width at a resolution level; level == levels is the bottleneck."""
        return self.base_width * (1 if level == 0 else 2)

    def has_attention(self, level: int) -> bool:
        return self.attn_at_bottom and level > self.levels - self.attn_levels

    @property
    def attention_levels(self) -> List[int]:
        return [lvl for lvl in range(self.levels + 1) if self.has_attention(lvl)]

    def check_spatial(self, height: int, width: int) -> None:
        factor = 2 ** self.levels
        if height % factor or width % factor:
            raise ShapeError(f"spatial size must be divisible by {factor}", (height, width))

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "DenoiserArch":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise CheckpointError(f"unknown architecture fields {unknown}")
        return cls(**data)
