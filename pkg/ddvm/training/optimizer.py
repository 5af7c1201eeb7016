"""Adam with linear warm-up, and the mutable training state it advances."""

import logging
from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional

import numpy as np

from ddvm.denoiser.model import DenoiserModel
from ddvm.errors import NonFiniteError, ShapeError
from ddvm.training.config import TrainConfig

logger = logging.getLogger(__name__)


@dataclass
class TrainState:
    """Model, optimizer moments and step counter; owned by one training loop."""

    model: DenoiserModel
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)
    rng: Optional[np.random.Generator] = None

    def __post_init__(self):
        for name, p in self.model.params.items():
            self.m.setdefault(name, np.zeros_like(p.data))
            self.v.setdefault(name, np.zeros_like(p.data))


def learning_rate(cfg: TrainConfig, step: int) -> float:
    """lr for the step-th update (1-based): linear ramp over warmup_steps, then constant."""
    if cfg.warmup_steps <= 0:
        return cfg.lr
    return cfg.lr * min(1.0, step / cfg.warmup_steps)


def optimizer_update(state: TrainState, grads: Mapping[str, np.ndarray], cfg: TrainConfig) -> TrainState:
    """
    One bias-corrected Adam update.

    Raises NonFiniteError, leaving parameters and moments untouched, when a
    gradient contains NaN or Inf.
    """
    for name, g in grads.items():
        if name not in state.model.params:
            raise ShapeError(f"gradient for unknown parameter '{name}'", np.shape(g))
        if np.shape(g) != state.model.params[name].shape:
            raise ShapeError(f"gradient shape mismatch for '{name}'", np.shape(g), state.model.params[name].shape)
        if not np.all(np.isfinite(g)):
            raise NonFiniteError(f"non-finite gradient for '{name}'")
    t = state.step + 1
    lr = learning_rate(cfg, t)
    correction1 = 1.0 - cfg.beta1 ** t
    correction2 = 1.0 - cfg.beta2 ** t
    for name, g in grads.items():
        p = state.model.params[name]
        state.m[name] = cfg.beta1 * state.m[name] + (1.0 - cfg.beta1) * g
        state.v[name] = cfg.beta2 * state.v[name] + (1.0 - cfg.beta2) * g * g
        m_hat = state.m[name] / correction1
        v_hat = state.v[name] / correction2
        p.data = p.data - lr * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)
    state.step = t
    return state
