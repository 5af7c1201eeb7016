"""
Exception hierarchy for the ddvm toolkit.

Library code raises these; only the command-line front door catches them,
logs a single error record and turns them into a non-zero exit code.
"""

from typing import Optional, Sequence, Tuple


class DDVMError(ValueError):
    """Base class for every error raised by ddvm."""


class ShapeError(DDVMError):
    """Two operands have incompatible shapes."""

    def __init__(self, message: str, shape_a: Sequence[int], shape_b: Optional[Sequence[int]] = None):
        self.shape_a: Tuple[int, ...] = tuple(int(s) for s in shape_a)
        self.shape_b: Optional[Tuple[int, ...]] = tuple(int(s) for s in shape_b) if shape_b is not None else None
        if self.shape_b is None:
            super().__init__(f"{message}: got shape {self.shape_a}")
        else:
            super().__init__(f"{message}: shapes {self.shape_a} and {self.shape_b}")


class GradCheckError(DDVMError):
    """The function under a gradient check produced a non-finite value."""


class NonFiniteError(DDVMError):
    """A value that must be finite (loss, gradient, field) was NaN or Inf."""


class ScheduleError(DDVMError):
    """Invalid noise level, time or schedule parameter."""


class InfillError(DDVMError):
    """Infilling was asked to impute a target with no valid pixel."""


class NormalizationError(DDVMError):
    """Invalid normalization spec or out-of-domain physical value."""


class ConfigError(DDVMError):
    """Configuration schema violation; carries the offending key."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"config key '{key}': {message}")


class FormatError(DDVMError):
    """A file on disk does not match its declared binary format."""


class CheckpointError(DDVMError):
    """A checkpoint is missing, truncated or incompatible with the model."""


class MetricsError(DDVMError):
    """Metrics cannot be computed for the given prediction and target."""


class SceneSpecError(DDVMError):
    """A synthetic scene specification is degenerate."""


class LayoutError(DDVMError):
    """A patch layout cannot cover the requested frame."""


class OutputError(DDVMError):
    """An output directory is in use or would be overwritten without --force."""
