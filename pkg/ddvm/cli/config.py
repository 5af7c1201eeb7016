"""
Run configuration: a tree of dataclasses addressed by flat dotted keys.

On disk a config is a JSON object. Keys may be flat ("train.lr": 3e-5) or
nested ({"train": {"lr": 3e-5}}); both are flattened before validation.
Unknown keys and ill-typed values raise ConfigError naming the key.

    {
      "task": "flow",
      "preset": "finetune",
      "arch.base_width": 16,
      "schedule.steps": 32,
      "paths.data": "data/flow"
    }
"""

import json
import logging
import typing
from dataclasses import asdict, dataclass, field, fields, is_dataclass, replace
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Tuple

from ddvm.denoiser.arch import DenoiserArch
from ddvm.diffusion.schedule import DEPTH_SAMPLING_STEPS, FLOW_SAMPLING_STEPS, NoiseSchedule
from ddvm.errors import ConfigError, DDVMError
from ddvm.inference.refine import T_PRIME_PRESETS
from ddvm.inference.tiling import PatchLayout, build_layout
from ddvm.sparse_data.target import TASKS
from ddvm.training.config import PRESETS, TrainConfig, preset

logger = logging.getLogger(__name__)

DTYPES = ("float64", "float32")
REDUCTIONS = ("mean", "median")


@dataclass(frozen=True)
class ArchConfig:
    base_width: int = 32
    levels: int = 2
    attn_at_bottom: bool = False
    attn_levels: int = 1
    time_dim: int = 64

    def build(self, task: str) -> DenoiserArch:
        return DenoiserArch.for_task(task, **asdict(self))


@dataclass(frozen=True)
class ScheduleConfig:
    """steps = 0 picks the task default (128 for depth, 64 for flow)."""

    kind: str = "cosine"
    steps: int = 0
    cosine_offset: float = 0.008
    beta_min: float = 0.1
    beta_max: float = 20.0

    def build(self, task: str) -> NoiseSchedule:
        steps = self.steps or (DEPTH_SAMPLING_STEPS if task == "depth" else FLOW_SAMPLING_STEPS)
        return NoiseSchedule(self.kind, steps, self.cosine_offset, self.beta_min, self.beta_max)


@dataclass(frozen=True)
class SampleConfig:
    """reduce picks the per-pixel "mean" or "median" of the n_samples chains."""

    n_samples: int = 1
    reduce: str = "mean"
    steps: int = 0
    clip: bool = True
    use_ema: bool = True


@dataclass(frozen=True)
class RefineConfig:
    """
    preset ("sintel" or "kitti") overrides t_prime. A patch size of 0 means
    the full frame along that axis.
    """

    preset: str = ""
    t_prime: float = 8 / 64
    grid_rows: int = 1
    grid_cols: int = 1
    patch_height: int = 0
    patch_width: int = 0

    @property
    def time(self) -> float:
        return T_PRIME_PRESETS[self.preset] if self.preset else self.t_prime

    def layout(self, frame: Tuple[int, int]) -> PatchLayout:
        patch = (self.patch_height or frame[0], self.patch_width or frame[1])
        return build_layout(frame, (self.grid_rows, self.grid_cols), patch)


@dataclass(frozen=True)
class PathsConfig:
    """checkpoint = "" means <run>/final.ddvk; init optionally seeds training from a checkpoint."""

    data: str = "data"
    run: str = "runs/default"
    checkpoint: str = ""
    init: str = ""
    output: str = "predictions"

    @property
    def checkpoint_path(self) -> Path:
        return Path(self.checkpoint) if self.checkpoint else Path(self.run) / "final.ddvk"


@dataclass(frozen=True)
class NumericConfig:
    dtype: str = "float64"


@dataclass(frozen=True)
class RunConfig:
    task: str = "depth"
    seed: int = 0
    preset: str = ""
    arch: ArchConfig = field(default_factory=ArchConfig)
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    sample: SampleConfig = field(default_factory=SampleConfig)
    refine: RefineConfig = field(default_factory=RefineConfig)
    paths: PathsConfig = field(default_factory=PathsConfig)
    numeric: NumericConfig = field(default_factory=NumericConfig)

    def __post_init__(self):
        if self.task not in TASKS:
            raise ConfigError("task", f"expected one of {TASKS}, got '{self.task}'")
        if self.preset and self.preset not in PRESETS:
            raise ConfigError("preset", f"expected one of {PRESETS}, got '{self.preset}'")
        if self.sample.n_samples < 1:
            raise ConfigError("sample.n_samples", f"must be >= 1, got {self.sample.n_samples}")
        if self.sample.steps < 0:
            raise ConfigError("sample.steps", f"must be >= 0, got {self.sample.steps}")
        if self.sample.reduce not in REDUCTIONS:
            raise ConfigError("sample.reduce", f"expected one of {REDUCTIONS}, got '{self.sample.reduce}'")
        if self.refine.preset and self.refine.preset not in T_PRIME_PRESETS:
            raise ConfigError("refine.preset", f"expected one of {sorted(T_PRIME_PRESETS)}, got '{self.refine.preset}'")
        if not 0.0 < self.refine.time < 1.0:
            raise ConfigError("refine.t_prime", f"must lie in (0, 1), got {self.refine.time}")
        if self.numeric.dtype not in DTYPES:
            raise ConfigError("numeric.dtype", f"expected one of {DTYPES}, got '{self.numeric.dtype}'")
        try:
            self.arch.build(self.task)
        except DDVMError as e:
            raise ConfigError("arch", str(e)) from e
        try:
            self.schedule.build(self.task)
        except DDVMError as e:
            raise ConfigError("schedule", str(e)) from e

    def schedule_for_task(self) -> NoiseSchedule:
        return self.schedule.build(self.task)

    def arch_for_task(self) -> DenoiserArch:
        return self.arch.build(self.task)


def flatten(data: Dict[str, Any], prefix: str = "") -> Dict[str, Any]:
    """Nested mappings to dotted keys; already-dotted keys pass through."""
    flat = {}
    for key, value in data.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(flatten(value, name + "."))
        else:
            flat[name] = value
    return flat


def to_flat(config: RunConfig) -> Dict[str, Any]:
    return flatten(asdict(config))


def _check_value(key: str, value: Any, kind) -> Any:
    if kind is bool:
        if not isinstance(value, bool):
            raise ConfigError(key, f"expected a boolean, got {value!r}")
        return value
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(key, f"expected an integer, got {value!r}")
        return value
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(key, f"expected a number, got {value!r}")
        return float(value)
    if kind is str:
        if not isinstance(value, str):
            raise ConfigError(key, f"expected a string, got {value!r}")
        return value
    raise ConfigError(key, f"unsupported field type {kind}")


def _section(cls, flat: Dict[str, Any], prefix: str, base=None):
    hints = typing.get_type_hints(cls)
    kwargs = {
        f.name: _check_value(prefix + f.name, flat[prefix + f.name], hints[f.name])
        for f in fields(cls) if prefix + f.name in flat
    }
    return replace(base, **kwargs) if base is not None else cls(**kwargs)


def _known_keys() -> set:
    return set(to_flat(RunConfig()))


def build_config(flat: Dict[str, Any]) -> RunConfig:
    """
    A RunConfig from flat dotted keys. A preset seeds the train section before
    explicit train.* keys are applied.
    """
    known = _known_keys()
    for key in flat:
        if key not in known:
            raise ConfigError(key, "unknown configuration key")
    preset_name = _check_value("preset", flat.get("preset", ""), str)
    if preset_name and preset_name not in PRESETS:
        raise ConfigError("preset", f"expected one of {PRESETS}, got '{preset_name}'")
    hints = typing.get_type_hints(RunConfig)
    kwargs = {}
    for f in fields(RunConfig):
        kind = hints[f.name]
        if is_dataclass(kind):
            base = None
            if f.name == "train" and preset_name:
                base = preset(preset_name, flat.get("task", RunConfig.task))
            kwargs[f.name] = _section(kind, flat, f.name + ".", base)
        elif f.name in flat:
            kwargs[f.name] = _check_value(f.name, flat[f.name], kind)
    return RunConfig(**kwargs)


def parse_override(text: str) -> Tuple[str, Any]:
    """key=value; the value is parsed as JSON, falling back to the raw string."""
    if "=" not in text:
        raise ConfigError(text, "override must look like key=value")
    key, raw = text.split("=", 1)
    key = key.strip()
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


def load_config(path: Optional[Path] = None, overrides: Iterable[str] = ()) -> RunConfig:
    flat: Dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError("config", f"file not found: {path}")
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError("config", f"{path} is not valid JSON: {e}") from e
        if not isinstance(data, dict):
            raise ConfigError("config", f"{path} must hold a JSON object")
        flat.update(flatten(data))
        logger.debug(f"Loaded {len(flat)} config keys from {path}")
    for text in overrides:
        key, value = parse_override(text)
        flat[key] = value
    return build_config(flat)


def save_config(config: RunConfig, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(to_flat(config), f, indent=2, sort_keys=True)
    return path
