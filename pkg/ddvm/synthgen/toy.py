"""
Toy tasks with a known answer.

constant: the image brightness encodes one normalized value c and the
target is c everywhere.
bimodal: a background plane with clear shading plus a marked square whose
appearance is the same whether its depth is depth_a or depth_b; each
example picks one of the two with probability 1/2.
"""

from dataclasses import dataclass
from typing import Iterator, List, Optional

import numpy as np

from ddvm.errors import SceneSpecError
from ddvm.numeric.field import DenseField
from ddvm.sparse_data.target import NormSpec, SparseTarget
from ddvm.synthgen.depth import FOG_COLOR
from ddvm.synthgen.scene import SceneSpec

# checkerboard period of the ambiguous region, in pixels
CHECKER = 4


@dataclass(frozen=True, eq=False)
class ToyExample:
    """Unpacks as (image, target, norm). label is the constant or the chosen mode."""

    image: DenseField
    target: SparseTarget
    norm: NormSpec
    label: float
    region: Optional[np.ndarray] = None

    def __iter__(self) -> Iterator:
        return iter((self.image, self.target, self.norm))


def constant_value(seed: int) -> float:
    return float(np.random.default_rng(seed).uniform(-0.8, 0.8))


def gen_constant(spec: SceneSpec, value: Optional[float] = None) -> ToyExample:
    """
    Image of uniform brightness (c + 1) / 2 and a dense depth target whose
    normalized value is c; c is drawn from the seed unless given.
    """
    if spec.kind != "constant":
        raise SceneSpecError(f"gen_constant needs kind 'constant', got '{spec.kind}'")
    c = constant_value(spec.seed) if value is None else float(value)
    if not -1.0 <= c <= 1.0:
        raise SceneSpecError(f"constant must lie in [-1, 1], got {c}")
    image = np.full((spec.height, spec.width, 3), (c + 1.0) / 2.0)
    depth = np.full((spec.height, spec.width), (c + 1.0) / 2.0 * spec.d_max)
    return ToyExample(DenseField(image), SparseTarget.dense(depth), NormSpec.for_depth(spec.d_max), c)


def ambiguous_region(height: int, width: int) -> np.ndarray:
    """Central square covering half of each side."""
    region = np.zeros((height, width), dtype=bool)
    region[height // 4:height - height // 4, width // 4:width - width // 4] = True
    return region


def background_depth(height: int, d_max: float) -> np.ndarray:
    rows = (np.arange(height) + 0.5) / height
    return ((0.95 - 0.1 * rows) * d_max)[:, None]


def gen_bimodal_example(spec: SceneSpec, choose_b: bool) -> ToyExample:
    h, w = spec.height, spec.width
    region = ambiguous_region(h, w)
    depth = np.broadcast_to(background_depth(h, spec.d_max), (h, w)).copy()
    mode_depth = spec.depth_b if choose_b else spec.depth_a
    depth[region] = mode_depth

    fog = (depth / spec.d_max)[..., None]
    image = (1.0 - fog) * 0.8 + fog * FOG_COLOR
    ys, xs = np.mgrid[0:h, 0:w]
    checker = ((ys // CHECKER + xs // CHECKER) % 2).astype(np.float64)
    image[region] = (0.2 + 0.6 * checker[region])[:, None] * np.array([1.0, 0.9, 0.3])
    return ToyExample(DenseField(np.clip(image, 0.0, 1.0)), SparseTarget.dense(depth),
                      NormSpec.for_depth(spec.d_max), mode_depth, region)


def gen_bimodal(spec: SceneSpec, count: int = 1) -> List[ToyExample]:
    """count examples, example i seeded from (spec.seed, i); depth_a == depth_b gives one mode."""
    if spec.kind != "bimodal":
        raise SceneSpecError(f"gen_bimodal needs kind 'bimodal', got '{spec.kind}'")
    if count < 1:
        raise SceneSpecError(f"count must be >= 1, got {count}")
    examples = []
    for i in range(count):
        rng = spec.for_example(i).rng()
        examples.append(gen_bimodal_example(spec, bool(rng.uniform() < 0.5)))
    return examples
