import json
import logging
import shutil

import numpy as np
import pytest

from ddvm.cli import commands
from ddvm.cli.config import load_config
from ddvm.cli.formats import read_depth_png, write_depth_png
from ddvm.denoiser.checkpoint import load_checkpoint, save_checkpoint
from ddvm.denoiser.model import DenoiserModel
from ddvm.errors import CheckpointError, ConfigError, OutputError, SceneSpecError
from ddvm.synthgen import MANIFEST_NAME, Manifest, ManifestEntry, SceneSpec

TINY_ARCH = ["arch.base_width=8", "arch.levels=1", "arch.time_dim=8"]


def make_config(tmp_path, task, *extra):
    return load_config(overrides=[
        f"task={task}",
        f"paths.data={tmp_path / 'data'}",
        f"paths.run={tmp_path / 'run'}",
        f"paths.output={tmp_path / 'pred'}",
        "sample.steps=2",
        *TINY_ARCH,
        *extra,
    ])


def make_checkpoint(cfg):
    model = DenoiserModel.create(cfg.arch_for_task(), np.random.default_rng(0))
    return save_checkpoint(model, cfg.paths.checkpoint_path, {"step": 0})


def gen(tmp_path, kind, n=2, **spec):
    return commands.cmd_gen_data(SceneSpec(kind, 16, 16, **spec), n, tmp_path / "data", progress=False)


def test_gen_data_is_byte_reproducible(tmp_path):
    spec = SceneSpec("flow_layers", 16, 16, sparsity=0.3, seed=7)
    commands.cmd_gen_data(spec, 3, tmp_path / "a", progress=False)
    commands.cmd_gen_data(spec, 3, tmp_path / "b", progress=False)
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert MANIFEST_NAME in names and len(names) == 1 + 3 * 3
    assert names == sorted(p.name for p in (tmp_path / "b").iterdir())
    for name in names:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_gen_data_guards(tmp_path):
    with pytest.raises(SceneSpecError):
        SceneSpec("depth_planes", 16, 16, sparsity=1.0)
    with pytest.raises(SceneSpecError):
        commands.cmd_gen_data(SceneSpec("constant", 16, 16), 0, tmp_path / "data", progress=False)
    gen(tmp_path, "constant")
    with pytest.raises(OutputError):
        gen(tmp_path, "constant")
    gen_again = commands.cmd_gen_data(SceneSpec("constant", 16, 16), 1, tmp_path / "data", force=True,
                                      progress=False)
    assert len(gen_again) == 1


def test_load_dataset_units(tmp_path):
    gen(tmp_path, "depth_planes", sparsity=0.2)
    manifest, items = commands.load_dataset(tmp_path / "data")
    assert len(items) == 2
    item = items[0]
    assert item.x.shape == (16, 16, 3)
    assert item.target.values.shape == (16, 16, 1)
    assert item.target.values[item.target.mask].max() <= manifest.spec.d_max


def test_train_writes_run_directory(tmp_path):
    gen(tmp_path, "constant", n=4)
    cfg = make_config(tmp_path, "depth", "train.steps=3", "train.batch_size=2", "train.checkpoint_every=0")
    state, history = commands.cmd_train(cfg, progress=False)
    run = tmp_path / "run"
    assert (run / "final.ddvk").exists()
    assert (run / "metrics.jsonl").exists()
    assert load_config(run / commands.CONFIG_SNAPSHOT) == cfg
    model, meta = load_checkpoint(run / "final.ddvk")
    assert meta["step"] == state.step
    assert (model.arch.ch_in, model.arch.ch_out, model.arch.base_width) == (4, 1, 8)


def test_forced_retrain_starts_a_clean_run_directory(tmp_path):
    gen(tmp_path, "constant", n=2)
    common = ["train.batch_size=2", "train.checkpoint_every=1", "train.log_every=1"]
    commands.cmd_train(make_config(tmp_path, "depth", "train.steps=3", *common), progress=False)
    with pytest.raises(OutputError):
        commands.cmd_train(make_config(tmp_path, "depth", "train.steps=2", *common), progress=False)
    commands.cmd_train(make_config(tmp_path, "depth", "train.steps=2", *common), force=True, progress=False)
    run = tmp_path / "run"
    steps = [json.loads(line)["step"] for line in (run / "metrics.jsonl").read_text().splitlines()]
    assert steps == [1, 2]
    assert sorted(p.name for p in run.glob("step_*.ddvk")) == ["step_0000001.ddvk", "step_0000002.ddvk"]


def test_multiscale_training_adds_half_resolution_copies(tmp_path, caplog):
    gen(tmp_path, "constant", n=2)
    cfg = make_config(tmp_path, "depth", "train.steps=2", "train.batch_size=2", "train.multiscale=true")
    with caplog.at_level(logging.INFO, logger="ddvm"):
        commands.cmd_train(cfg, progress=False)
    assert any("on 4 depth examples" in r.getMessage() for r in caplog.records)


def test_task_mismatch_is_a_config_error(tmp_path):
    gen(tmp_path, "constant")
    with pytest.raises(ConfigError):
        commands.cmd_train(make_config(tmp_path, "flow"), progress=False)


def test_evaluate_ground_truth_as_prediction_scores_zero(tmp_path):
    manifest = gen(tmp_path, "flow_layers", n=2, sparsity=0.3)
    out = tmp_path / "pred"
    out.mkdir()
    entries = []
    for entry in manifest.entries:
        shutil.copy(entry.path(tmp_path / "data", "flow"), out / f"{entry.index:05d}_pred.flo")
        entries.append(ManifestEntry(entry.index, entry.seed, {"pred": f"{entry.index:05d}_pred.flo"}))
    Manifest(manifest.spec, entries).write(out)
    total = commands.cmd_evaluate(make_config(tmp_path, "flow"))
    assert total["aepe"] == 0.0
    assert total["fl_all"] == 0.0
    records = [json.loads(line) for line in (out / "metrics_pred.jsonl").read_text().splitlines()]
    assert len(records) == 3
    assert records[-1]["aggregate"] is True and records[-1]["count"] == 2
    assert [r["index"] for r in records[:2]] == [0, 1]


def test_sample_ensemble_then_viz(tmp_path):
    gen(tmp_path, "depth_planes", n=1)
    cfg = make_config(tmp_path, "depth", "sample.n_samples=8")
    make_checkpoint(cfg)
    result = commands.cmd_sample(cfg, progress=False)
    files = result.entries[0].files
    assert set(files) == {"pred", "var"}
    variance = np.load(tmp_path / "pred" / files["var"])
    assert variance.shape == (16, 16, 1) and np.all(variance >= 0)
    written = commands.cmd_viz(cfg)
    names = {p.name for p in written}
    assert "00000_variance.png" in names
    assert {"00000_pred.png", "00000_gt.png", "00000_pred_error.png"} <= names


def test_median_reduction_writes_no_variance_for_one_chain(tmp_path):
    gen(tmp_path, "constant", n=1)
    cfg = make_config(tmp_path, "depth", "sample.reduce=median")
    make_checkpoint(cfg)
    assert set(commands.cmd_sample(cfg, progress=False).entries[0].files) == {"pred"}


def test_impute_keeps_annotated_pixels_exactly(tmp_path):
    gen(tmp_path, "depth_planes", n=2, sparsity=0.4)
    cfg = make_config(tmp_path, "depth")
    make_checkpoint(cfg)
    result = commands.cmd_impute(cfg, progress=False)
    _, items = commands.load_dataset(tmp_path / "data")
    for entry, item in zip(result.entries, items):
        pred = read_depth_png(entry.path(tmp_path / "pred", "pred"))
        assert pred.mask.all()
        assert np.array_equal(pred.values[item.target.mask], item.target.values[item.target.mask])


def test_impute_with_full_mask_reproduces_target(tmp_path):
    gen(tmp_path, "constant", n=1)
    cfg = make_config(tmp_path, "depth")
    make_checkpoint(cfg)
    entry = commands.cmd_impute(cfg, progress=False).entries[0]
    pred = read_depth_png(entry.path(tmp_path / "pred", "pred"))
    gt = read_depth_png(tmp_path / "data" / "00000_depth.png")
    assert np.array_equal(pred.values, gt.values)


def test_refine_writes_refined_and_bicubic(tmp_path):
    gen(tmp_path, "flow_layers", n=1)
    cfg = make_config(tmp_path, "flow", "refine.preset=kitti", "refine.grid_cols=2", "refine.patch_width=10")
    make_checkpoint(cfg)
    entry = commands.cmd_refine(cfg, progress=False).entries[0]
    assert set(entry.files) == {"pred", "bicubic"}
    for key in ("pred", "bicubic"):
        assert commands.read_prediction(entry.path(tmp_path / "pred", key), "flow").shape == (16, 16, 2)
    assert commands.cmd_evaluate(cfg, key="bicubic").n_valid > 0


def test_missing_checkpoint_fails_before_writing(tmp_path):
    gen(tmp_path, "constant", n=1)
    cfg = make_config(tmp_path, "depth")
    with pytest.raises(CheckpointError, match="not found"):
        commands.cmd_sample(cfg, progress=False)
    assert not (tmp_path / "pred").exists()


def test_read_prediction_depth_units(tmp_path):
    path = tmp_path / "d.png"
    write_depth_png(path, np.full((2, 2), 3.0))
    assert np.all(commands.read_prediction(path, "depth") == 3.0)
