"""Denoising diffusion models for dense prediction: monocular depth and optical flow."""

__version__ = "0.1.0"
