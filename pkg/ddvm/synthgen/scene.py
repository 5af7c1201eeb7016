"""Scene specifications and the randomness shared by every generator."""

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from ddvm.errors import SceneSpecError
from ddvm.sparse_data.target import INDOOR_MAX_DEPTH

SCENE_KINDS = ("depth_planes", "flow_layers", "constant", "bimodal")

# Student-t degrees of freedom of the label noise
NOISE_DOF = 3.0

MIN_SIZE = 8


@dataclass(frozen=True)
class SceneSpec:
    """
    Parameters of one procedurally generated example.

    sparsity is the fraction of pixels dropped from the ground truth;
    noise_sigma scales heavy-tailed label noise in normalized units
    (fraction of d_max / 2 for depth, of W and H for flow). n_layers fixes
    the number of depth surfaces or flow layers instead of drawing it.
    """

    kind: str
    height: int = 64
    width: int = 64
    sparsity: float = 0.0
    noise_sigma: float = 0.0
    seed: int = 0
    n_layers: Optional[int] = None
    max_motion: float = 0.2
    d_max: float = INDOOR_MAX_DEPTH
    depth_a: float = 3.0
    depth_b: float = 7.0

    def __post_init__(self):
        if self.kind not in SCENE_KINDS:
            raise SceneSpecError(f"unknown scene kind '{self.kind}', expected one of {SCENE_KINDS}")
        if self.height < MIN_SIZE or self.width < MIN_SIZE:
            raise SceneSpecError(f"scenes must be at least {MIN_SIZE}x{MIN_SIZE}, got {self.height}x{self.width}")
        if not 0.0 <= self.sparsity < 1.0:
            raise SceneSpecError(f"sparsity must lie in [0, 1), got {self.sparsity}")
        if self.noise_sigma < 0:
            raise SceneSpecError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if self.n_layers is not None and self.n_layers < 0:
            raise SceneSpecError(f"n_layers must be >= 0, got {self.n_layers}")
        if not 0.0 <= self.max_motion <= 1.0:
            raise SceneSpecError(f"max_motion must lie in [0, 1], got {self.max_motion}")
        if not self.d_max > 0:
            raise SceneSpecError(f"d_max must be positive, got {self.d_max}")
        if not (0 < self.depth_a <= self.d_max and 0 < self.depth_b <= self.d_max):
            raise SceneSpecError("bimodal depths must lie in (0, d_max]")

    @property
    def shape(self):
        return self.height, self.width

    def check_levels(self, levels: int) -> None:
        factor = 2 ** levels
        if self.height % factor or self.width % factor:
            raise SceneSpecError(f"{self.height}x{self.width} is not divisible by {factor} ({levels} levels)")

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)

    def for_example(self, index: int) -> "SceneSpec":
        return replace(self, seed=example_seed(self.seed, index))


def example_seed(base: int, index: int) -> int:
    return int(base) * 100003 + int(index)


def dropout_mask(shape, sparsity: float, rng: np.random.Generator) -> np.ndarray:
    """True where a pixel survives; each pixel is dropped independently with probability sparsity."""
    if sparsity <= 0:
        return np.ones(shape, dtype=bool)
    return rng.uniform(size=shape) >= sparsity


def ensure_valid(mask: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Re-admit one random pixel when every pixel was dropped."""
    if mask.any():
        return mask
    out = mask.copy()
    out.flat[int(rng.integers(0, out.size))] = True
    return out


def heavy_tailed_noise(shape, scale, rng: np.random.Generator) -> np.ndarray:
    """Student-t noise times a per-channel scale."""
    return rng.standard_t(NOISE_DOF, size=shape) * np.asarray(scale, dtype=np.float64)
