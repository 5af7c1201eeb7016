"""
Layered optical-flow pairs.

A background texture and 0..n convex textured polygons (later layers on
top) each move by an affine motion. Textures are analytic, so both frames
are rendered exactly: frame 1 samples each layer's texture at the pixel,
frame 2 samples it at the pre-image of the pixel under the layer motion.
Pixel centers sit at integer (x = column, y = row) positions.
"""

from dataclasses import dataclass, field
from typing import Iterator, List, Optional, Sequence

import numpy as np
from matplotlib.path import Path as PolygonPath
from scipy import ndimage

from ddvm.errors import SceneSpecError, ShapeError
from ddvm.numeric.field import DenseField
from ddvm.sparse_data.target import NormSpec, SparseTarget
from ddvm.synthgen.scene import SceneSpec, dropout_mask, ensure_valid, heavy_tailed_noise
from ddvm.synthgen.texture import SinusoidTexture


@dataclass(frozen=True)
class AffineMotion:
    """p -> center + matrix @ (p - center) + translation, points as (x, y)."""

    matrix: np.ndarray = field(default_factory=lambda: np.eye(2))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(2))
    center: np.ndarray = field(default_factory=lambda: np.zeros(2))

    @classmethod
    def translate(cls, dx: float, dy: float) -> "AffineMotion":
        return cls(np.eye(2), np.array([dx, dy], dtype=np.float64))

    def apply(self, points: np.ndarray) -> np.ndarray:
        return (points - self.center) @ self.matrix.T + self.center + self.translation

    def inverse_apply(self, points: np.ndarray) -> np.ndarray:
        return (points - self.center - self.translation) @ np.linalg.inv(self.matrix).T + self.center

    def displacement(self, points: np.ndarray) -> np.ndarray:
        return self.apply(points) - points

    def scaled(self, factor: float) -> "AffineMotion":
        """The motion with its departure from identity multiplied by factor."""
        matrix = np.eye(2) + factor * (self.matrix - np.eye(2))
        return AffineMotion(matrix, factor * self.translation, self.center)


@dataclass(frozen=True)
class FlowLayer:
    """A textured region; polygon None means the whole plane (the background)."""

    texture: SinusoidTexture
    motion: AffineMotion
    polygon: Optional[np.ndarray] = None

    def contains(self, points: np.ndarray, moved: bool = False) -> np.ndarray:
        if self.polygon is None:
            return np.ones(points.shape[0], dtype=bool)
        vertices = self.motion.apply(self.polygon) if moved else self.polygon
        return PolygonPath(vertices).contains_points(points)


@dataclass(frozen=True, eq=False)
class FlowPair:
    """Unpacks as (frame1, frame2, target); occluded and out_of_bounds label the invalid pixels."""

    frame1: DenseField
    frame2: DenseField
    target: SparseTarget
    occluded: np.ndarray
    out_of_bounds: np.ndarray

    def __iter__(self) -> Iterator:
        return iter((self.frame1, self.frame2, self.target))

    @property
    def norm(self) -> NormSpec:
        return NormSpec.for_flow(self.target.width, self.target.height)


def pixel_grid(height: int, width: int) -> np.ndarray:
    ys, xs = np.mgrid[0:height, 0:width]
    return np.stack([xs.ravel(), ys.ravel()], axis=1).astype(np.float64)


def _owners(layers: Sequence[FlowLayer], points: np.ndarray, moved: bool) -> np.ndarray:
    owner = np.zeros(points.shape[0], dtype=np.int64)
    for idx, layer in enumerate(layers):
        if idx == 0:
            continue
        owner[layer.contains(points, moved=moved)] = idx
    return owner


def render_flow_pair(height: int, width: int, layers: Sequence[FlowLayer]) -> FlowPair:
    """
    Deterministic rendering of explicit layers; layers[0] must be the background.

    The flow at a pixel is the motion of the topmost layer there. A pixel is
    occluded when a different layer is on top at its destination in frame 2,
    and out of bounds when the destination leaves the frame.
    """
    if not layers or layers[0].polygon is not None:
        raise SceneSpecError("the first layer must be a full-frame background")
    points = pixel_grid(height, width)
    owner1 = _owners(layers, points, moved=False)
    owner2 = _owners(layers, points, moved=True)

    frame1 = np.zeros((points.shape[0], 3))
    frame2 = np.zeros((points.shape[0], 3))
    flow = np.zeros((points.shape[0], 2))
    for idx, layer in enumerate(layers):
        here = owner1 == idx
        if here.any():
            frame1[here] = layer.texture(points[here, 0], points[here, 1])
            flow[here] = layer.motion.displacement(points[here])
        there = owner2 == idx
        if there.any():
            source = layer.motion.inverse_apply(points[there])
            frame2[there] = layer.texture(source[:, 0], source[:, 1])

    dest = points + flow
    out_of_bounds = ((dest[:, 0] < 0) | (dest[:, 0] > width - 1) | (dest[:, 1] < 0) | (dest[:, 1] > height - 1))
    dest_owner = np.zeros(points.shape[0], dtype=np.int64)
    for idx, layer in enumerate(layers):
        if idx:
            dest_owner[layer.contains(dest, moved=True)] = idx
    occluded = (dest_owner != owner1) & ~out_of_bounds

    grid = (height, width)
    mask = ~(occluded | out_of_bounds)
    return FlowPair(
        DenseField(frame1.reshape(grid + (3,))),
        DenseField(frame2.reshape(grid + (3,))),
        SparseTarget(flow.reshape(grid + (2,)), mask.reshape(grid)),
        occluded.reshape(grid),
        out_of_bounds.reshape(grid),
    )


def _bounded_motion(rng: np.random.Generator, center: np.ndarray, corners: np.ndarray,
                    max_disp: float) -> AffineMotion:
    angle = rng.uniform(-0.15, 0.15)
    scale = rng.uniform(0.9, 1.1)
    rot = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
    motion = AffineMotion(scale * rot, rng.uniform(-1.0, 1.0, size=2) * max_disp, center)
    largest = np.linalg.norm(motion.displacement(corners), axis=1).max()
    if largest > max_disp > 0:
        motion = motion.scaled(max_disp / largest)
    return motion


def random_layers(spec: SceneSpec, rng: np.random.Generator) -> List[FlowLayer]:
    """Background plus 1-3 (or spec.n_layers) convex polygons, every displacement within max_motion * W."""
    h, w = spec.height, spec.width
    max_disp = spec.max_motion * w
    frame_corners = np.array([[0, 0], [w - 1, 0], [0, h - 1], [w - 1, h - 1]], dtype=np.float64)
    frame_center = np.array([(w - 1) / 2.0, (h - 1) / 2.0])
    layers = [FlowLayer(SinusoidTexture.random(rng, max_freq=0.25),
                        _bounded_motion(rng, frame_center, frame_corners, 0.25 * max_disp))]
    count = spec.n_layers if spec.n_layers is not None else int(rng.integers(1, 4))
    for _ in range(count):
        radius = rng.uniform(0.15, 0.3) * min(h, w)
        center = np.array([rng.uniform(0.2, 0.8) * (w - 1), rng.uniform(0.2, 0.8) * (h - 1)])
        angles = np.sort(rng.uniform(0.0, 2.0 * np.pi, size=int(rng.integers(3, 8))))
        polygon = center + radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)
        layers.append(FlowLayer(SinusoidTexture.random(rng), _bounded_motion(rng, center, polygon, max_disp), polygon))
    return layers


def gen_flow_pair(spec: SceneSpec) -> FlowPair:
    """
    Render one random flow example.

    The mask excludes occluded and out-of-bounds pixels plus a random
    sparsity fraction; valid vectors get Student-t noise of scale
    noise_sigma * (W, H).
    """
    if spec.kind != "flow_layers":
        raise SceneSpecError(f"gen_flow_pair needs kind 'flow_layers', got '{spec.kind}'")
    rng = spec.rng()
    pair = render_flow_pair(spec.height, spec.width, random_layers(spec, rng))
    mask = pair.target.mask & dropout_mask(pair.target.mask.shape, spec.sparsity, rng)
    mask = ensure_valid(mask, rng)
    values = np.array(pair.target.values)
    if spec.noise_sigma > 0:
        scale = spec.noise_sigma * np.array([spec.width, spec.height], dtype=np.float64)
        values = values + heavy_tailed_noise(values.shape, scale, rng)
    return FlowPair(pair.frame1, pair.frame2, SparseTarget(values, mask), pair.occluded, pair.out_of_bounds)


def warp_backward(frame2: np.ndarray, flow: np.ndarray) -> np.ndarray:
    """frame2 sampled at p + flow(p) with bilinear interpolation (edge values outside)."""
    frame2 = np.asarray(frame2, dtype=np.float64)
    flow = np.asarray(flow, dtype=np.float64)
    if frame2.shape[:2] != flow.shape[:2] or flow.shape[-1] != 2:
        raise ShapeError("frame and flow disagree", frame2.shape, flow.shape)
    ys, xs = np.mgrid[0:flow.shape[0], 0:flow.shape[1]].astype(np.float64)
    coords = [ys + flow[..., 1], xs + flow[..., 0]]
    return np.stack([ndimage.map_coordinates(frame2[..., c], coords, order=1, mode="nearest")
                     for c in range(frame2.shape[-1])], axis=-1)
