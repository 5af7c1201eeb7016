"""
The training step with infilling and step-unrolled denoising, and the
loop around it.

One step:
  draw t ~ U(0, 1) and eps ~ N(0, I) per example
  y   = infill(target)                         (holes filled per cfg.infill_for(task))
  y_t = sqrt(g) y + sqrt(1 - g) eps
  repeat unroll_steps times, without gradients:
      eps_pred = f(x, y_t, t)
      y_pred   = (y_t - sqrt(1 - g) eps_pred) / sqrt(g)
      y_t      = sqrt(g) y_pred + sqrt(1 - g) eps
      eps      = (y_t - sqrt(g) y) / sqrt(1 - g)
  loss = masked L1 or L2 between eps and f(x, y_t, t) over the annotated pixels
  Adam update, then EMA update
"""

import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from tqdm import tqdm

from ddvm.denoiser.checkpoint import save_checkpoint
from ddvm.denoiser.model import DenoiserModel, forward
from ddvm.diffusion.process import eps_to_sample, forward_diffuse, recompute_target_eps
from ddvm.diffusion.schedule import NoiseSchedule
from ddvm.errors import NonFiniteError
from ddvm.numeric.tensor import DiffGraph
from ddvm.sparse_data.infill import infill
from ddvm.sparse_data.target import SparseTarget
from ddvm.training.config import TrainConfig
from ddvm.training.data import TrainBatch, TrainExample, draw_batch
from ddvm.training.loss import masked_loss
from ddvm.training.optimizer import TrainState, learning_rate, optimizer_update

logger = logging.getLogger(__name__)

METRICS_LOG = "metrics.jsonl"
CHECKPOINT_GLOB = "step_*.ddvk"


@dataclass
class StepMetrics:
    step: int
    loss: float
    lr: float
    n_valid: int
    skipped: bool = False
    reason: Optional[str] = None
    diagnostics: Dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class NoisedBatch:
    """Inputs of the gradient pass after infilling and unrolling."""

    t: np.ndarray
    gamma: np.ndarray
    y: np.ndarray
    y_t: np.ndarray
    eps: np.ndarray


def _task_of(channels: int) -> str:
    return "flow" if channels == 2 else "depth"


def _infill_batch(target: SparseTarget, mode: str) -> np.ndarray:
    """Infill every example that has an annotated pixel; empty ones keep the 0 sentinel."""
    filled = np.array(target.values)
    for i in range(len(target)):
        if target.mask[i].any():
            filled[i] = infill(target[i], mode)
    return filled


def prepare_noised(model: DenoiserModel, batch: TrainBatch, cfg: TrainConfig, schedule: NoiseSchedule,
                   rng: np.random.Generator) -> NoisedBatch:
    """Everything before the gradient pass; the unrolled predictions record no graph."""
    t = rng.uniform(size=len(batch))
    eps = rng.standard_normal(batch.target.values.shape)
    gamma = schedule.gamma(t)
    y = _infill_batch(batch.target, cfg.infill_for(_task_of(batch.target.channels)))
    y_t = forward_diffuse(y, eps, gamma)
    for _ in range(cfg.unroll_steps):
        eps_pred = model.predict(batch.x, y_t, t, use_ema=False)
        y_pred = eps_to_sample(y_t, eps_pred, gamma)
        y_t = forward_diffuse(y_pred, eps, gamma)
        eps = recompute_target_eps(y, y_t, gamma)
    return NoisedBatch(t, gamma, y, y_t, eps)


def _diagnostics(noised: NoisedBatch, eps_hat: np.ndarray) -> Dict[str, Any]:
    return {
        "t_min": float(noised.t.min()),
        "t_max": float(noised.t.max()),
        "gamma_min": float(np.min(noised.gamma)),
        "y_t_finite": bool(np.all(np.isfinite(noised.y_t))),
        "eps_hat_finite": bool(np.all(np.isfinite(eps_hat))),
        "eps_hat_absmax": float(np.nanmax(np.abs(eps_hat))) if np.any(np.isfinite(eps_hat)) else None,
    }


def train_step(state: TrainState, batch: TrainBatch, cfg: TrainConfig, schedule: NoiseSchedule,
               rng: Optional[np.random.Generator] = None) -> tuple:
    """One optimizer step; returns (state, StepMetrics). Parameters change only on success."""
    rng = rng if rng is not None else state.rng
    if rng is None:
        raise ValueError("train_step needs a random generator")
    model = state.model
    lr = learning_rate(cfg, state.step + 1)
    noised = prepare_noised(model, batch, cfg, schedule, rng)

    model.zero_grad()
    with DiffGraph() as graph:
        eps_hat = forward(model, batch.x, noised.y_t, noised.t)
        loss = masked_loss(noised.eps, eps_hat, batch.target.mask, cfg.loss)
    if loss.degenerate:
        logger.warning(f"Step {state.step + 1}: degenerate batch with no annotated pixel; update skipped")
        return state, StepMetrics(state.step, 0.0, lr, 0, skipped=True, reason="degenerate_batch")
    value = loss.scalar
    if not np.isfinite(value):
        diagnostics = _diagnostics(noised, eps_hat.data)
        logger.error(f"Step {state.step + 1}: non-finite loss {value}; update aborted, diagnostics {diagnostics}")
        return state, StepMetrics(state.step, value, lr, loss.n_valid, skipped=True,
                                  reason="non_finite_loss", diagnostics=diagnostics)

    graph.backward(loss.value)
    grads = {name: p.grad if p.grad is not None else np.zeros_like(p.data) for name, p in model.params.items()}
    try:
        optimizer_update(state, grads, cfg)
    except NonFiniteError as e:
        logger.warning(f"Step {state.step + 1}: optimizer step rejected: {e}")
        return state, StepMetrics(state.step, value, lr, loss.n_valid, skipped=True, reason="non_finite_gradient")
    finally:
        model.zero_grad()
    model.update_ema(cfg.ema_decay)
    return state, StepMetrics(state.step, value, lr, loss.n_valid)


def _reset_run_dir(out_dir: Path) -> None:
    """Drop the metrics log and step checkpoints of an earlier run in out_dir."""
    stale = sorted(out_dir.glob(CHECKPOINT_GLOB))
    for path in stale + [out_dir / METRICS_LOG]:
        path.unlink(missing_ok=True)
    if stale:
        logger.info(f"Removed {len(stale)} stale checkpoints from {out_dir}")


def fit(
    model: DenoiserModel,
    examples: Sequence[TrainExample],
    cfg: TrainConfig,
    schedule: NoiseSchedule,
    out_dir: Optional[Path] = None,
    state: Optional[TrainState] = None,
    progress: bool = True,
) -> tuple:
    """
    Run cfg.steps training steps over randomly drawn batches.

    With an out_dir, metrics are written to metrics.jsonl and checkpoints
    every cfg.checkpoint_every steps and at the end. A fresh run (no state)
    starts a new log and removes step checkpoints left by an earlier run;
    a resumed run appends. Returns (state, [StepMetrics]).
    """
    rng = np.random.default_rng(cfg.seed)
    fresh = state is None
    state = state if state is not None else TrainState(model)
    state.rng = rng
    log_path = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        log_path = out_dir / METRICS_LOG
        if fresh:
            _reset_run_dir(out_dir)
    task = _task_of(model.out_channels)
    logger.info(f"Training {cfg.steps} steps on {len(examples)} {task} examples, "
                f"infill {cfg.infill_for(task)}, unroll {cfg.unroll_steps}, loss {cfg.loss}")
    history: List[StepMetrics] = []
    start = time.time()
    bar = tqdm(range(cfg.steps), desc="train", disable=not progress)
    for _ in bar:
        batch = draw_batch(examples, cfg.batch_size, rng, cfg.flip_prob)
        state, metrics = train_step(state, batch, cfg, schedule, rng)
        history.append(metrics)
        if not metrics.skipped:
            bar.set_postfix(loss=f"{metrics.loss:.4f}")
        if log_path is not None and (metrics.step % cfg.log_every == 0 or metrics.skipped):
            record = {"step": metrics.step, "loss": metrics.loss, "lr": metrics.lr,
                      "wall_time": round(time.time() - start, 3)}
            if metrics.skipped:
                record["skipped"] = metrics.reason
            with open(log_path, "a") as f:
                f.write(json.dumps(record) + "\n")
        if (out_dir is not None and cfg.checkpoint_every and not metrics.skipped
                and metrics.step % cfg.checkpoint_every == 0):
            save_checkpoint(model, out_dir / f"step_{metrics.step:07d}.ddvk", {"step": metrics.step})
    if out_dir is not None:
        save_checkpoint(model, out_dir / "final.ddvk", {"step": state.step, "train": asdict(cfg)})
    done = [m for m in history if not m.skipped]
    if done:
        logger.info(f"Finished {len(done)} steps, last loss {done[-1].loss:.5f}, "
                    f"{len(history) - len(done)} skipped")
    return state, history
