"""Procedural toy datasets for depth, flow and the known-answer tasks."""

from ddvm.synthgen.depth import DepthScene, Surface, boundary_band, gen_depth_scene, render_depth
from ddvm.synthgen.flow import (
    AffineMotion,
    FlowLayer,
    FlowPair,
    gen_flow_pair,
    random_layers,
    render_flow_pair,
    warp_backward,
)
from ddvm.synthgen.manifest import MANIFEST_NAME, Manifest, ManifestEntry
from ddvm.synthgen.scene import NOISE_DOF, SCENE_KINDS, SceneSpec, dropout_mask, example_seed
from ddvm.synthgen.texture import SinusoidTexture
from ddvm.synthgen.toy import ToyExample, ambiguous_region, gen_bimodal, gen_bimodal_example, gen_constant

__all__ = [
    "MANIFEST_NAME", "NOISE_DOF", "SCENE_KINDS", "AffineMotion", "DepthScene", "FlowLayer", "FlowPair",
    "Manifest", "ManifestEntry", "SceneSpec", "SinusoidTexture", "Surface", "ToyExample",
    "ambiguous_region", "boundary_band", "dropout_mask", "example_seed", "gen_bimodal",
    "gen_bimodal_example", "gen_constant", "gen_depth_scene", "gen_flow_pair", "random_layers",
    "render_depth", "render_flow_pair", "warp_backward",
]
