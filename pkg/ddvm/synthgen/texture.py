"""Smooth analytic RGB textures, evaluable at arbitrary (x, y) positions."""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SinusoidTexture:
    """base + sum_k amp_k * sin(f_k . (x, y) + phase_k), clipped to [0, 1]."""

    base: np.ndarray
    freqs: np.ndarray
    phases: np.ndarray
    amps: np.ndarray

    @classmethod
    def random(cls, rng: np.random.Generator, components: int = 4, max_freq: float = 0.35) -> "SinusoidTexture":
        directions = rng.uniform(0.0, 2.0 * np.pi, size=components)
        magnitudes = rng.uniform(0.05, max_freq, size=components)
        freqs = np.stack([np.cos(directions), np.sin(directions)], axis=1) * magnitudes[:, None]
        return cls(
            base=rng.uniform(0.25, 0.75, size=3),
            freqs=freqs,
            phases=rng.uniform(0.0, 2.0 * np.pi, size=components),
            amps=rng.uniform(0.03, 0.06, size=(components, 3)),
        )

    def __call__(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=np.float64)
        ys = np.asarray(ys, dtype=np.float64)
        angles = xs[..., None] * self.freqs[:, 0] + ys[..., None] * self.freqs[:, 1] + self.phases
        return np.clip(self.base + np.sin(angles) @ self.amps, 0.0, 1.0)
