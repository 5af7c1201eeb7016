"""Independent sampling chains and their per-pixel summary."""

import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from ddvm.diffusion.sampler import EpsModel, sample
from ddvm.diffusion.schedule import NoiseSchedule
from ddvm.parallel import run_parallel, spawn_rngs

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class EnsembleResult:
    """Per-pixel statistics of n samples, in normalized units; variance uses 1/n."""

    mean: np.ndarray
    variance: np.ndarray
    median: np.ndarray
    samples: List[np.ndarray]

    @classmethod
    def from_samples(cls, samples: List[np.ndarray]) -> "EnsembleResult":
        if not samples:
            raise ValueError("an ensemble needs at least one sample")
        stack = np.stack(samples)
        return cls(stack.mean(axis=0), stack.var(axis=0), np.median(stack, axis=0), list(samples))

    @property
    def n(self) -> int:
        return len(self.samples)


def ensemble(
    model: EpsModel,
    x: np.ndarray,
    n: int,
    schedule: NoiseSchedule,
    rng: Optional[np.random.Generator] = None,
    steps: int = 0,
    clip: bool = True,
    use_ema: bool = True,
) -> EnsembleResult:
    """Run n chains, each with its own generator spawned from rng, in parallel threads."""
    if n < 1:
        raise ValueError(f"ensemble size must be >= 1, got {n}")
    rng = rng if rng is not None else np.random.default_rng()
    jobs = [(model, x, schedule, steps, child, clip, use_ema) for child in spawn_rngs(rng, n)]
    samples = run_parallel(sample, jobs)
    logger.debug(f"Ensemble of {n} samples finished")
    return EnsembleResult.from_samples(samples)
