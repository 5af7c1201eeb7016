"""Training hyper-parameters and the pretrain/finetune presets."""

from dataclasses import dataclass, replace

from ddvm.errors import ConfigError
from ddvm.sparse_data.infill import INFILL_MODES

LOSS_KINDS = ("l1", "l2")
MAX_UNROLL_STEPS = 8

# "auto" picks the task default: 2D nearest for depth, rows then columns for flow
AUTO_INFILL = "auto"
TASK_INFILL = {"depth": "nearest", "flow": "rowcol"}


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-4
    warmup_steps: int = 100
    batch_size: int = 8
    unroll_steps: int = 0
    infill_mode: str = AUTO_INFILL
    loss: str = "l1"
    ema_decay: float = 0.999
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    steps: int = 1000
    checkpoint_every: int = 500
    log_every: int = 10
    flip_prob: float = 0.5
    # also train on half-resolution copies, the scale coarse_to_fine samples at
    multiscale: bool = False
    seed: int = 0

    def __post_init__(self):
        if not self.lr > 0:
            raise ConfigError("train.lr", f"must be positive, got {self.lr}")
        if self.warmup_steps < 0:
            raise ConfigError("train.warmup_steps", f"must be >= 0, got {self.warmup_steps}")
        if self.batch_size < 1:
            raise ConfigError("train.batch_size", f"must be >= 1, got {self.batch_size}")
        if not 0 <= self.unroll_steps <= MAX_UNROLL_STEPS:
            raise ConfigError("train.unroll_steps", f"must lie in [0, {MAX_UNROLL_STEPS}], got {self.unroll_steps}")
        if self.infill_mode not in INFILL_MODES + (AUTO_INFILL,):
            raise ConfigError("train.infill_mode",
                              f"expected one of {INFILL_MODES + (AUTO_INFILL,)}, got '{self.infill_mode}'")
        if self.loss not in LOSS_KINDS:
            raise ConfigError("train.loss", f"expected one of {LOSS_KINDS}, got '{self.loss}'")
        if not 0.0 <= self.ema_decay < 1.0:
            raise ConfigError("train.ema_decay", f"must lie in [0, 1), got {self.ema_decay}")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ConfigError("train.beta1", "Adam betas must lie in [0, 1)")
        if not 0.0 <= self.flip_prob <= 1.0:
            raise ConfigError("train.flip_prob", f"must lie in [0, 1], got {self.flip_prob}")
        if self.steps < 0 or self.checkpoint_every < 0 or self.log_every < 1:
            raise ConfigError("train.steps", "step counts must be non-negative and log_every >= 1")

    def infill_for(self, task: str) -> str:
        """The concrete infill mode for `task`; "auto" resolves to the task default."""
        if self.infill_mode != AUTO_INFILL:
            return self.infill_mode
        if task not in TASK_INFILL:
            raise ConfigError("task", f"expected one of {sorted(TASK_INFILL)}, got '{task}'")
        return TASK_INFILL[task]


PRESETS = ("pretrain", "finetune")


def preset(name: str, task: str = "depth", **overrides) -> TrainConfig:
    """
    pretrain: no unrolling, lr 1e-4, L1.
    finetune: one unrolled step; depth fine-tuning uses lr 3e-5.
    Both infill with the task default: nearest for depth, rowcol for flow.
    """
    if name == "pretrain":
        cfg = TrainConfig(unroll_steps=0, lr=1e-4, loss="l1", infill_mode=TASK_INFILL.get(task, AUTO_INFILL))
    elif name == "finetune":
        cfg = TrainConfig(unroll_steps=1, lr=3e-5 if task == "depth" else 1e-4, loss="l1",
                          infill_mode=TASK_INFILL.get(task, AUTO_INFILL))
    else:
        raise ConfigError("train.preset", f"expected one of {PRESETS}, got '{name}'")
    return replace(cfg, **overrides) if overrides else cfg
