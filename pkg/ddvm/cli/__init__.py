"""Batch front door: commands, run configuration and on-disk formats."""

from ddvm.cli.config import (
    ArchConfig,
    NumericConfig,
    PathsConfig,
    RefineConfig,
    RunConfig,
    SampleConfig,
    ScheduleConfig,
    load_config,
    parse_override,
    save_config,
    to_flat,
)
from ddvm.cli.formats import read_depth_png, read_flo, read_flo_target, write_depth_png, write_flo

__all__ = [
    "ArchConfig", "NumericConfig", "PathsConfig", "RefineConfig", "RunConfig", "SampleConfig",
    "ScheduleConfig", "load_config", "parse_override", "read_depth_png", "read_flo", "read_flo_target",
    "save_config", "to_flat", "write_depth_png", "write_flo",
]
