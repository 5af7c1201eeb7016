"""
Finite-difference verification of reverse-mode gradients.

Usage:
    report = grad_check(lambda: loss_fn(params), params, step=1e-4, tol_rel=1e-3)
    assert report.passed, report.summary()
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Mapping, Sequence, Tuple, Union

import numpy as np

from ddvm.errors import GradCheckError
from ddvm.numeric.tensor import DiffGraph, Tensor, no_grad

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ParamGradient:
    name: str
    analytic: np.ndarray
    numeric: np.ndarray
    max_rel_error: float


@dataclass(frozen=True)
class GradCheckReport:
    entries: Tuple[ParamGradient, ...]
    max_rel_error: float
    tol_rel: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tol_rel

    def summary(self) -> str:
        lines = [f"grad_check: max relative error {self.max_rel_error:.3e} (tol {self.tol_rel:.1e})"]
        for entry in self.entries:
            lines.append(f"  {entry.name}: {entry.max_rel_error:.3e}")
        return "\n".join(lines)


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float) -> np.ndarray:
    """|a - n| / max(|a|, |n|, floor); the floor keeps near-zero gradients comparable."""
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / scale


def _evaluate(f: Callable[[], Tensor]) -> float:
    with no_grad():
        value = float(np.asarray(f().data))
    if not np.isfinite(value):
        raise GradCheckError(f"function under grad_check returned non-finite value {value}")
    return value


def grad_check(f: Callable[[], Tensor],
               params: Union[Mapping[str, Tensor], Sequence[Tensor]],
               step: float = 1e-4,
               tol_rel: float = 1e-3,
               floor: float = 1e-3) -> GradCheckReport:
    """
    Compare analytic gradients of the scalar f() with central differences.

    Args:
        f: zero-argument callable returning a scalar Tensor built from params
        params: tensors to differentiate (mapping name -> tensor, or a sequence)
        step: central-difference step, applied to one element at a time
        tol_rel: relative tolerance used by report.passed
        floor: lower bound on the relative-error denominator

    Raises:
        GradCheckError: f is non-finite at params or under a perturbation
    """
    if step <= 0:
        raise GradCheckError(f"finite-difference step must be positive, got {step}")
    named: Dict[str, Tensor] = dict(params) if isinstance(params, Mapping) else {
        (p.name or f"param_{i}"): p for i, p in enumerate(params)
    }
    for tensor in named.values():
        tensor.requires_grad = True
        tensor.grad = None

    with DiffGraph() as graph:
        out = f()
        if not np.all(np.isfinite(out.data)):
            raise GradCheckError("function under grad_check returned a non-finite value")
        graph.backward(out)
    reached = {id(t) for t in graph.leaves}

    entries: List[ParamGradient] = []
    worst = 0.0
    for name, tensor in named.items():
        if id(tensor) not in reached:
            logger.debug(f"grad_check: {name} does not reach the output")
        analytic = np.zeros_like(tensor.data) if tensor.grad is None else tensor.grad.copy()
        numeric = np.zeros_like(tensor.data)
        data = tensor.data
        # perturb tensor.data itself, also when it is a strided view
        for idx in np.ndindex(data.shape):
            original = data[idx]
            data[idx] = original + step
            upper = _evaluate(f)
            data[idx] = original - step
            lower = _evaluate(f)
            data[idx] = original
            numeric[idx] = (upper - lower) / (2.0 * step)
        err = float(np.max(relative_error(analytic, numeric, floor))) if analytic.size else 0.0
        worst = max(worst, err)
        entries.append(ParamGradient(name, analytic, numeric, err))
    return GradCheckReport(tuple(entries), worst, tol_rel)
