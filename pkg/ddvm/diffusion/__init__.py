"""Noise schedule, forward process and samplers."""

from ddvm.diffusion.process import ancestral_variance, eps_to_sample, forward_diffuse, recompute_target_eps
from ddvm.diffusion.sampler import (
    EMPTY_MASK_WARNING,
    EpsModel,
    GuidedSample,
    ddpm_ancestral_step,
    run_chain,
    sample,
    sample_with_replacement,
)
from ddvm.diffusion.schedule import (
    DEPTH_SAMPLING_STEPS,
    FLOW_SAMPLING_STEPS,
    GAMMA_CLIP,
    SCHEDULE_KINDS,
    DiffusionStep,
    NoiseSchedule,
)

__all__ = [
    "DEPTH_SAMPLING_STEPS", "EMPTY_MASK_WARNING", "FLOW_SAMPLING_STEPS", "GAMMA_CLIP", "SCHEDULE_KINDS",
    "DiffusionStep", "EpsModel", "GuidedSample", "NoiseSchedule", "ancestral_variance",
    "ddpm_ancestral_step", "eps_to_sample", "forward_diffuse", "recompute_target_eps", "run_chain",
    "sample", "sample_with_replacement",
]
