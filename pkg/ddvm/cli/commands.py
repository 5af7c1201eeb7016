"""
The batch commands behind the ddvm entry point.

Datasets and prediction sets are directories indexed by a manifest.
Dataset entries hold the inputs and ground truth:

    depth kinds   image=<i>_image.npy   depth=<i>_depth.png
    flow_layers   frame1=<i>_frame1.npy frame2=<i>_frame2.npy flow=<i>_flow.flo

Prediction entries (sample, refine, impute) reuse the dataset's spec and
indices and hold pred (plus var for ensembles, bicubic for refinement)
in the same physical formats.
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from ddvm.cli.config import RunConfig, save_config
from ddvm.cli.formats import (
    MAX_PNG_DEPTH,
    load_array,
    output_lock,
    prepare_output_dir,
    read_depth_png,
    read_flo,
    read_flo_target,
    save_array,
    save_png,
    write_depth_png,
    write_flo,
)
from ddvm.cli.viz import depth_to_color, error_to_color, flow_to_color, variance_to_color
from ddvm.denoiser.checkpoint import load_checkpoint
from ddvm.denoiser.model import DenoiserModel, reinit_io_layers
from ddvm.diffusion.sampler import sample_with_replacement
from ddvm.errors import ConfigError, SceneSpecError
from ddvm.inference.ensemble import ensemble
from ddvm.inference.refine import coarse_to_fine, upsample_prediction
from ddvm.metrics.report import Crop, MetricReport, aggregate, depth_metrics, flow_metrics
from ddvm.parallel import spawn_rngs
from ddvm.sparse_data.normalize import denormalize, normalize
from ddvm.sparse_data.target import NormSpec, SparseTarget
from ddvm.synthgen.depth import gen_depth_scene
from ddvm.synthgen.flow import gen_flow_pair
from ddvm.synthgen.manifest import Manifest, ManifestEntry
from ddvm.synthgen.scene import SceneSpec
from ddvm.synthgen.toy import gen_bimodal, gen_constant
from ddvm.training.data import build_example, stack_frames, with_half_resolution
from ddvm.training.trainer import fit

logger = logging.getLogger(__name__)

TASK_OF_KIND = {"depth_planes": "depth", "constant": "depth", "bimodal": "depth", "flow_layers": "flow"}

CONFIG_SNAPSHOT = "config.json"
VIZ_DIR = "viz"


@dataclass(frozen=True, eq=False)
class DatasetItem:
    index: int
    frames: List[np.ndarray]
    target: SparseTarget
    norm: NormSpec

    @property
    def x(self) -> np.ndarray:
        return stack_frames(self.frames)


def _summary(title: str, lines: Sequence[str]) -> None:
    print("\n" + "=" * 60)
    print(title)
    print("=" * 60)
    for line in lines:
        print(line)
    print("=" * 60)


def _write_example(spec: SceneSpec, index: int, out_dir: Path) -> Dict[str, str]:
    stem = f"{index:05d}"
    if spec.kind == "flow_layers":
        pair = gen_flow_pair(spec)
        files = {"frame1": f"{stem}_frame1.npy", "frame2": f"{stem}_frame2.npy", "flow": f"{stem}_flow.flo"}
        save_array(out_dir / files["frame1"], pair.frame1.values)
        save_array(out_dir / files["frame2"], pair.frame2.values)
        write_flo(out_dir / files["flow"], pair.target.values, pair.target.mask)
        return files
    if spec.kind == "depth_planes":
        image, target, _ = gen_depth_scene(spec)
    elif spec.kind == "constant":
        image, target, _ = gen_constant(spec)
    else:
        image, target, _ = gen_bimodal(spec, 1)[0]
    files = {"image": f"{stem}_image.npy", "depth": f"{stem}_depth.png"}
    save_array(out_dir / files["image"], image.values)
    write_depth_png(out_dir / files["depth"], target.values, target.mask)
    return files


def cmd_gen_data(spec: SceneSpec, n: int, out_dir: Path, force: bool = False, progress: bool = True) -> Manifest:
    """Write n examples of spec.kind plus a manifest; example i uses seed example_seed(spec.seed, i)."""
    if n < 1:
        raise SceneSpecError(f"number of examples must be >= 1, got {n}")
    out_dir = prepare_output_dir(out_dir, force)
    manifest = Manifest(spec)
    with output_lock(out_dir):
        for i in tqdm(range(n), desc="gen-data", disable=not progress):
            example_spec = spec.for_example(i)
            files = _write_example(example_spec, i, out_dir)
            manifest.entries.append(ManifestEntry(i, example_spec.seed, files))
        path = manifest.write(out_dir)
    logger.info(f"Wrote {n} {spec.kind} examples to {out_dir}")
    _summary("DATASET SUMMARY", [
        f"Kind: {spec.kind}",
        f"Examples written: {n}",
        f"Frame size: {spec.height}x{spec.width}",
        f"Sparsity: {spec.sparsity}",
        f"Manifest: {path}",
    ])
    return manifest


def load_dataset(data_dir: Path) -> Tuple[Manifest, List[DatasetItem]]:
    """Read every example of a generated dataset, targets in physical units."""
    data_dir = Path(data_dir)
    manifest = Manifest.read(data_dir)
    spec = manifest.spec
    items = []
    for entry in manifest.entries:
        if spec.kind == "flow_layers":
            frames = [load_array(entry.path(data_dir, "frame1")), load_array(entry.path(data_dir, "frame2"))]
            target = read_flo_target(entry.path(data_dir, "flow"))
            norm = NormSpec.for_flow(target.width, target.height)
        else:
            frames = [load_array(entry.path(data_dir, "image"))]
            target = read_depth_png(entry.path(data_dir, "depth"))
            norm = NormSpec.for_depth(spec.d_max)
        items.append(DatasetItem(entry.index, frames, target, norm))
    logger.debug(f"Loaded {len(items)} examples from {data_dir}")
    return manifest, items


def _check_task(cfg: RunConfig, manifest: Manifest) -> None:
    task = TASK_OF_KIND[manifest.spec.kind]
    if task != cfg.task:
        raise ConfigError("task", f"dataset holds {manifest.spec.kind} ({task}) examples but task is '{cfg.task}'")


def _load_model(cfg: RunConfig) -> DenoiserModel:
    model, meta = load_checkpoint(cfg.paths.checkpoint_path)
    if model.arch.task is not None and model.arch.task != cfg.task:
        raise ConfigError("task", f"checkpoint was trained for '{model.arch.task}', not '{cfg.task}'")
    logger.info(f"Loaded checkpoint {cfg.paths.checkpoint_path} (step {meta.get('step', '?')})")
    return model


def _initial_model(cfg: RunConfig, rng: np.random.Generator) -> DenoiserModel:
    arch = cfg.arch_for_task()
    if not cfg.paths.init:
        return DenoiserModel.create(arch, rng)
    model, _ = load_checkpoint(Path(cfg.paths.init))
    if (model.arch.ch_in, model.arch.ch_out) != (arch.ch_in, arch.ch_out):
        model = reinit_io_layers(model, arch.ch_in, arch.ch_out, rng, task=cfg.task)
    logger.info(f"Initialized training from {cfg.paths.init}")
    return model


def cmd_train(cfg: RunConfig, force: bool = False, progress: bool = True):
    manifest, items = load_dataset(Path(cfg.paths.data))
    _check_task(cfg, manifest)
    examples = [build_example(item.frames, item.target, item.norm) for item in items]
    rng = np.random.default_rng(cfg.seed)
    model = _initial_model(cfg, rng)
    model.arch.check_spatial(manifest.spec.height, manifest.spec.width)
    if cfg.train.multiscale:
        model.arch.check_spatial(manifest.spec.height // 2, manifest.spec.width // 2)
        examples = with_half_resolution(examples)
    run_dir = prepare_output_dir(Path(cfg.paths.run), force)
    with output_lock(run_dir):
        save_config(cfg, run_dir / CONFIG_SNAPSHOT)
        state, history = fit(model, examples, cfg.train, cfg.schedule_for_task(), out_dir=run_dir, progress=progress)
    done = [m for m in history if not m.skipped]
    _summary("TRAINING SUMMARY", [
        f"Task: {cfg.task}",
        f"Examples: {len(examples)}",
        f"Parameters: {model.num_parameters()}",
        f"Steps completed: {len(done)}",
        f"Steps skipped: {len(history) - len(done)}",
        f"Final loss: {done[-1].loss:.5f}" if done else "Final loss: n/a",
        f"Checkpoint: {run_dir / 'final.ddvk'}",
    ])
    return state, history


def _write_prediction(out_dir: Path, index: int, key: str, values: np.ndarray, norm: NormSpec) -> str:
    """Physical-unit prediction to its native format; returns the file name."""
    if norm.task == "flow":
        name = f"{index:05d}_{key}.flo"
        write_flo(out_dir / name, values)
    else:
        name = f"{index:05d}_{key}.png"
        write_depth_png(out_dir / name, np.clip(values, 0.0, min(norm.d_max, MAX_PNG_DEPTH)))
    return name


def read_prediction(path: Path, task: str) -> np.ndarray:
    if task == "flow":
        return read_flo(path).astype(np.float64)
    return read_depth_png(path).values


def _predict_all(cfg: RunConfig, force: bool, label: str, predict_one, progress: bool = True) -> Manifest:
    """Shared driver: predict_one(model, item, rng, out_dir) -> files dict, one call per example."""
    manifest, items = load_dataset(Path(cfg.paths.data))
    _check_task(cfg, manifest)
    model = _load_model(cfg)
    out_dir = prepare_output_dir(Path(cfg.paths.output), force)
    rng = np.random.default_rng(cfg.seed)
    result = Manifest(manifest.spec)
    with output_lock(out_dir):
        jobs = list(zip(manifest.entries, items, spawn_rngs(rng, len(items))))
        for entry, item, child in tqdm(jobs, desc=label, disable=not progress):
            result.entries.append(ManifestEntry(item.index, entry.seed, predict_one(model, item, child, out_dir)))
        path = result.write(out_dir)
    logger.info(f"{label}: wrote {len(result)} predictions to {out_dir}")
    _summary(f"{label.upper()} SUMMARY", [
        f"Task: {cfg.task}",
        f"Checkpoint: {cfg.paths.checkpoint_path}",
        f"Predictions written: {len(result)}",
        f"Manifest: {path}",
    ])
    return result


def cmd_sample(cfg: RunConfig, force: bool = False, progress: bool = True) -> Manifest:
    """Sample n_samples chains per input; writes the mean (or median) and, for n > 1, the variance."""
    schedule = cfg.schedule_for_task()
    sc = cfg.sample

    def predict_one(model, item: DatasetItem, rng, out_dir: Path) -> Dict[str, str]:
        result = ensemble(model, item.x, sc.n_samples, schedule, rng, steps=sc.steps, clip=sc.clip,
                          use_ema=sc.use_ema)
        summary = result.median if sc.reduce == "median" else result.mean
        files = {"pred": _write_prediction(out_dir, item.index, "pred", denormalize(summary, item.norm), item.norm)}
        if result.n > 1:
            files["var"] = f"{item.index:05d}_var.npy"
            save_array(out_dir / files["var"], result.variance)
        return files

    return _predict_all(cfg, force, "sample", predict_one, progress)


def cmd_refine(cfg: RunConfig, force: bool = False, progress: bool = True) -> Manifest:
    """Half-resolution sampling followed by patch refinement; also writes the plain bicubic upsample."""
    schedule = cfg.schedule_for_task()
    sc, rc = cfg.sample, cfg.refine

    def predict_one(model, item: DatasetItem, rng, out_dir: Path) -> Dict[str, str]:
        x = item.x
        layout = rc.layout(x.shape[:2])
        refined, base = coarse_to_fine(model, x, layout, rc.time, schedule, rng, task=cfg.task, steps=sc.steps,
                                       clip=sc.clip, use_ema=sc.use_ema)
        bicubic = upsample_prediction(base, layout.frame, cfg.task)
        return {
            "pred": _write_prediction(out_dir, item.index, "pred", denormalize(refined, item.norm), item.norm),
            "bicubic": _write_prediction(out_dir, item.index, "bicubic", denormalize(bicubic, item.norm), item.norm),
        }

    return _predict_all(cfg, force, "refine", predict_one, progress)


def cmd_impute(cfg: RunConfig, force: bool = False, progress: bool = True) -> Manifest:
    """Complete each ground-truth map from its annotated pixels by replacement-guided sampling."""
    schedule = cfg.schedule_for_task()
    sc = cfg.sample

    def predict_one(model, item: DatasetItem, rng, out_dir: Path) -> Dict[str, str]:
        known = normalize(item.target, item.norm)
        guided = sample_with_replacement(model, item.x, known, schedule, steps=sc.steps, rng=rng, clip=sc.clip,
                                         use_ema=sc.use_ema)
        for warning in guided.warnings:
            logger.warning(f"example {item.index}: {warning}")
        values = denormalize(guided.values, item.norm)
        values = np.where(item.target.mask[..., None], item.target.values, values)
        return {"pred": _write_prediction(out_dir, item.index, "pred", values, item.norm)}

    return _predict_all(cfg, force, "impute", predict_one, progress)


def cmd_evaluate(cfg: RunConfig, key: str = "pred", crop: Optional[Crop] = None) -> MetricReport:
    """Score every prediction against the dataset; writes metrics_<key>.jsonl next to the predictions."""
    manifest, items = load_dataset(Path(cfg.paths.data))
    _check_task(cfg, manifest)
    by_index = {item.index: item for item in items}
    out_dir = Path(cfg.paths.output)
    predictions = Manifest.read(out_dir)
    reports, records = [], []
    for entry in predictions.entries:
        if entry.index not in by_index:
            raise ConfigError("paths.output", f"prediction {entry.index} has no ground truth in {cfg.paths.data}")
        item = by_index[entry.index]
        pred = read_prediction(entry.path(out_dir, key), cfg.task)
        if cfg.task == "flow":
            report = flow_metrics(pred, item.target, crop)
        else:
            report = depth_metrics(pred, item.target, cap=item.norm.d_max, crop=crop)
        reports.append(report)
        records.append(report.to_record(index=entry.index))
    total = aggregate(reports)
    records.append(total.to_record(aggregate=True, count=len(reports)))
    path = out_dir / f"metrics_{key}.jsonl"
    with output_lock(out_dir):
        with open(path, "w", encoding="utf-8") as f:
            for record in records:
                f.write(json.dumps(record, sort_keys=True) + "\n")
    logger.info(f"Evaluated {len(reports)} predictions, records in {path}")
    _summary("EVALUATION SUMMARY", [f"Predictions evaluated: {len(reports)} ({key})"]
             + [f"{name}: {value:.6f}" for name, value in total.values.items()]
             + [f"Records: {path}"])
    return total


def cmd_viz(cfg: RunConfig, key: str = "pred") -> List[Path]:
    """Color-coded predictions, ground truth, error maps and (for ensembles) variance heat maps."""
    manifest, items = load_dataset(Path(cfg.paths.data))
    _check_task(cfg, manifest)
    by_index = {item.index: item for item in items}
    out_dir = Path(cfg.paths.output)
    predictions = Manifest.read(out_dir)
    viz_dir = out_dir / VIZ_DIR
    viz_dir.mkdir(parents=True, exist_ok=True)
    written = []
    with output_lock(viz_dir):
        for entry in predictions.entries:
            item = by_index.get(entry.index)
            pred = read_prediction(entry.path(out_dir, key), cfg.task)
            stem = f"{entry.index:05d}"
            if cfg.task == "flow":
                images = {f"{stem}_{key}.png": flow_to_color(pred)}
                if item is not None:
                    images[f"{stem}_gt.png"] = flow_to_color(item.target.values, item.target.mask)
            else:
                d_max = manifest.spec.d_max
                images = {f"{stem}_{key}.png": depth_to_color(pred, d_max)}
                if item is not None:
                    images[f"{stem}_gt.png"] = depth_to_color(item.target.values, d_max, item.target.mask)
            if item is not None:
                images[f"{stem}_{key}_error.png"] = error_to_color(pred, item.target)
            if "var" in entry.files:
                images[f"{stem}_variance.png"] = variance_to_color(load_array(entry.path(out_dir, "var")))
            for name, rgb in images.items():
                written.append(save_png(viz_dir / name, rgb))
    logger.info(f"Wrote {len(written)} images to {viz_dir}")
    _summary("VISUALIZATION SUMMARY", [f"Images written: {len(written)}", f"Directory: {viz_dir}"])
    return written
