"""Multi-sample aggregation and coarse-to-fine tiled refinement."""

from ddvm.inference.ensemble import EnsembleResult, ensemble
from ddvm.inference.refine import (
    T_PRIME_PRESETS,
    coarse_to_fine,
    refine,
    upsample_flow_pixels,
    upsample_prediction,
)
from ddvm.inference.tiling import (
    WEIGHT_FLOOR,
    PatchLayout,
    PatchSlot,
    build_layout,
    identity_layout,
    patch_starts,
    ramp_profile,
)

__all__ = [
    "T_PRIME_PRESETS", "WEIGHT_FLOOR", "EnsembleResult", "PatchLayout", "PatchSlot", "build_layout",
    "coarse_to_fine", "ensemble", "identity_layout", "patch_starts", "ramp_profile", "refine",
    "upsample_flow_pixels", "upsample_prediction",
]
