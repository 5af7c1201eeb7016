"""
Depth scenes made of tilted planar surfaces composited by a z-buffer.

Surface 0 is a background plane covering the frame; the others are
axis-aligned rectangles ("boxes" when their face is fronto-parallel).
Every surface is a plane z = z0 + a * u + b * v over normalized image
coordinates u, v in [-0.5, 0.5]. The image is derived from depth and the
surface normal only through Lambertian shading and depth fog, so depth is
recoverable from the image.
"""

from dataclasses import dataclass
from typing import Iterator, List

import numpy as np

from ddvm.errors import SceneSpecError
from ddvm.numeric.field import DenseField
from ddvm.sparse_data.target import NormSpec, SparseTarget
from ddvm.synthgen.scene import SceneSpec, dropout_mask, ensure_valid, heavy_tailed_noise

FOG_COLOR = np.array([0.6, 0.7, 0.8])
LIGHT_DIR = np.array([0.3, -0.5, 1.0]) / np.linalg.norm([0.3, -0.5, 1.0])
AMBIENT = 0.35

# depth jump (fraction of d_max) that counts as a discontinuity
EDGE_THRESHOLD = 0.05

MIN_DEPTH = 1e-3


@dataclass(frozen=True)
class Surface:
    z0: float
    slope_u: float
    slope_v: float
    albedo: np.ndarray
    rows: slice = slice(None)
    cols: slice = slice(None)

    def depth(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        return self.z0 + self.slope_u * u + self.slope_v * v

    @property
    def normal(self) -> np.ndarray:
        n = np.array([-self.slope_u, -self.slope_v, 1.0])
        return n / np.linalg.norm(n)


@dataclass(frozen=True, eq=False)
class DepthScene:
    """Unpacks as (image, target, norm); clean_depth holds the noise-free dense depth."""

    image: DenseField
    target: SparseTarget
    norm: NormSpec
    clean_depth: np.ndarray

    def __iter__(self) -> Iterator:
        return iter((self.image, self.target, self.norm))


def random_surfaces(spec: SceneSpec, rng: np.random.Generator) -> List[Surface]:
    h, w, d_max = spec.height, spec.width, spec.d_max
    count = spec.n_layers if spec.n_layers is not None else int(rng.integers(2, 6))
    if count < 1:
        raise SceneSpecError("a depth scene needs at least one surface")
    surfaces = [Surface(
        z0=rng.uniform(0.7, 0.85) * d_max,
        slope_u=rng.uniform(-0.1, 0.1) * d_max,
        slope_v=rng.uniform(-0.2, 0.05) * d_max,
        albedo=rng.uniform(0.5, 1.0, size=3),
    )]
    for _ in range(count - 1):
        rh = int(rng.integers(max(2, h // 6), max(3, h // 2)))
        rw = int(rng.integers(max(2, w // 6), max(3, w // 2)))
        top = int(rng.integers(0, h - rh + 1))
        left = int(rng.integers(0, w - rw + 1))
        box = rng.uniform() < 0.5
        surfaces.append(Surface(
            z0=rng.uniform(0.15, 0.55) * d_max,
            slope_u=0.0 if box else rng.uniform(-0.1, 0.1) * d_max,
            slope_v=0.0 if box else rng.uniform(-0.1, 0.1) * d_max,
            albedo=rng.uniform(0.3, 1.0, size=3),
            rows=slice(top, top + rh),
            cols=slice(left, left + rw),
        ))
    return surfaces


def render_depth(surfaces: List[Surface], height: int, width: int, d_max: float):
    """z-buffer composite; returns (depth, surface index per pixel)."""
    v, u = np.meshgrid((np.arange(height) + 0.5) / height - 0.5,
                       (np.arange(width) + 0.5) / width - 0.5, indexing="ij")
    depth = np.full((height, width), np.inf)
    owner = np.full((height, width), -1, dtype=np.int64)
    for idx, surface in enumerate(surfaces):
        z = np.clip(surface.depth(u, v), MIN_DEPTH, d_max)
        region = np.zeros((height, width), dtype=bool)
        region[surface.rows, surface.cols] = True
        closer = region & (z < depth)
        depth = np.where(closer, z, depth)
        owner = np.where(closer, idx, owner)
    if np.any(owner < 0):
        raise SceneSpecError("surfaces do not cover the frame")
    return depth, owner


def shade(depth: np.ndarray, owner: np.ndarray, surfaces: List[Surface], d_max: float) -> np.ndarray:
    """(1 - fog) * albedo * lambert + fog * FOG_COLOR, fog = depth / d_max."""
    albedo = np.stack([s.albedo for s in surfaces])[owner]
    normals = np.stack([s.normal for s in surfaces])[owner]
    lambert = AMBIENT + (1.0 - AMBIENT) * np.clip(normals @ LIGHT_DIR, 0.0, 1.0)
    fog = (depth / d_max)[..., None]
    return np.clip((1.0 - fog) * albedo * lambert[..., None] + fog * FOG_COLOR, 0.0, 1.0)


def boundary_band(depth: np.ndarray, threshold: float) -> np.ndarray:
    """Pixels on the far side of a 4-neighbour depth jump larger than threshold."""
    band = np.zeros(depth.shape, dtype=bool)
    dv = depth[1:, :] - depth[:-1, :]
    du = depth[:, 1:] - depth[:, :-1]
    band[1:, :] |= dv > threshold
    band[:-1, :] |= -dv > threshold
    band[:, 1:] |= du > threshold
    band[:, :-1] |= -du > threshold
    return band


def gen_depth_scene(spec: SceneSpec) -> DepthScene:
    """
    Render one depth example.

    With sparsity > 0 the mask also drops a one-pixel band behind every
    depth discontinuity. Valid depths get Student-t noise of scale
    noise_sigma * d_max / 2 and are clipped to (0, d_max].
    """
    if spec.kind != "depth_planes":
        raise SceneSpecError(f"gen_depth_scene needs kind 'depth_planes', got '{spec.kind}'")
    rng = spec.rng()
    surfaces = random_surfaces(spec, rng)
    depth, owner = render_depth(surfaces, spec.height, spec.width, spec.d_max)
    image = shade(depth, owner, surfaces, spec.d_max)

    mask = dropout_mask(depth.shape, spec.sparsity, rng)
    if spec.sparsity > 0:
        mask &= ~boundary_band(depth, EDGE_THRESHOLD * spec.d_max)
    mask = ensure_valid(mask, rng)

    values = depth.copy()
    if spec.noise_sigma > 0:
        values = values + heavy_tailed_noise(depth.shape, spec.noise_sigma * spec.d_max / 2.0, rng)
        values = np.clip(values, MIN_DEPTH, spec.d_max)
    return DepthScene(DenseField(image), SparseTarget(values, mask), NormSpec.for_depth(spec.d_max), depth)
