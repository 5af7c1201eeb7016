import numpy as np
import pytest

from ddvm.denoiser import TIME_SCALE, DenoiserArch, DenoiserModel, layers, reinit_io_layers, time_embed
from ddvm.diffusion import NoiseSchedule
from ddvm.errors import ShapeError
from ddvm.numeric import Tensor, group_norm, silu
from ddvm.sparse_data import SparseTarget
from ddvm.training import TrainBatch, TrainConfig, TrainState, train_step


def perturb_output_layer(model, seed=0):
    rng = np.random.default_rng(seed)
    for name in ("out.conv.w", "out.conv.b"):
        p = model.params[name]
        p.data = rng.normal(0.0, 0.1, size=p.shape)


def test_time_embed_at_zero():
    emb = time_embed(0.0, 16)
    assert emb.shape == (16,)
    assert np.all(emb[:8] == 0.0)
    assert np.all(emb[8:] == 1.0)


def test_time_embed_is_deterministic_and_smooth():
    assert np.array_equal(time_embed(0.3, 32), time_embed(0.3, 32))
    assert np.max(np.abs(time_embed(0.3, 32) - time_embed(0.3 + 1e-9, 32))) < 1e-6
    assert np.max(np.abs(time_embed(0.3, 32))) <= 1.0
    # fastest frequency bounds the slope
    assert np.max(np.abs(time_embed(0.5, 32) - time_embed(0.5 + 1e-4, 32))) <= TIME_SCALE * 1e-4


def test_time_embed_batch_and_odd_dim():
    assert time_embed(np.array([0.1, 0.2, 0.3]), 8).shape == (3, 8)
    with pytest.raises(ShapeError):
        time_embed(0.1, 7)


def test_arch_channel_conventions():
    depth = DenoiserArch.for_task("depth")
    flow = DenoiserArch.for_task("flow")
    assert (depth.ch_in, depth.ch_out) == (4, 1)
    assert (flow.ch_in, flow.ch_out) == (8, 2)
    with pytest.raises(ShapeError):
        DenoiserArch(ch_in=4, ch_out=2, task="depth")
    with pytest.raises(ShapeError):
        DenoiserArch.for_task("depth", base_width=12)


def test_zero_initialized_output(tiny_flow_model, rng):
    x = rng.uniform(-1, 1, size=(2, 4, 6, 6))
    y_t = rng.normal(size=(2, 4, 6, 2))
    for use_ema in (False, True):
        out = tiny_flow_model.predict(x, y_t, np.array([0.2, 0.7]), use_ema=use_ema)
        assert out.shape == (2, 4, 6, 2)
        assert np.all(out == 0.0)


def test_output_shape_follows_input(tiny_depth_model, rng):
    out = tiny_depth_model.predict(rng.normal(size=(8, 12, 3)), rng.normal(size=(8, 12, 1)), 0.5)
    assert out.shape == (8, 12, 1)
    with pytest.raises(ShapeError):
        tiny_depth_model.predict(rng.normal(size=(5, 4, 3)), rng.normal(size=(5, 4, 1)), 0.5)


def test_channel_mismatch_raises(tiny_depth_model, rng):
    with pytest.raises(ShapeError):
        tiny_depth_model.predict(rng.normal(size=(4, 4, 2)), rng.normal(size=(4, 4, 1)), 0.5)
    with pytest.raises(ShapeError):
        tiny_depth_model.predict(rng.normal(size=(4, 4, 3)), rng.normal(size=(4, 6, 1)), 0.5)


def test_batch_permutation_permutes_outputs(tiny_depth_model, rng):
    perturb_output_layer(tiny_depth_model)
    x = rng.normal(size=(3, 4, 4, 3))
    y_t = rng.normal(size=(3, 4, 4, 1))
    t = np.array([0.1, 0.5, 0.9])
    order = np.array([2, 0, 1])
    out = tiny_depth_model.predict(x, y_t, t, use_ema=False)
    permuted = tiny_depth_model.predict(x[order], y_t[order], t[order], use_ema=False)
    assert np.allclose(permuted, out[order], atol=1e-12)


def test_time_conditioning_active_after_one_step(tiny_depth_model, rng):
    batch = TrainBatch(rng.uniform(-1, 1, size=(2, 4, 4, 3)),
                       SparseTarget.dense(rng.uniform(-1, 1, size=(2, 4, 4, 1))))
    state = TrainState(tiny_depth_model)
    cfg = TrainConfig(lr=1e-2, warmup_steps=0)
    state, metrics = train_step(state, batch, cfg, NoiseSchedule(), rng)
    assert not metrics.skipped
    x = rng.uniform(-1, 1, size=(4, 4, 3))
    y_t = rng.normal(size=(4, 4, 1))
    early = tiny_depth_model.predict(x, y_t, 0.1, use_ema=False)
    late = tiny_depth_model.predict(x, y_t, 0.9, use_ema=False)
    assert not np.allclose(early, late)


def test_ema_matches_scalar_oracle(tiny_depth_model):
    decay, name = 0.9, "in.conv.w"
    init = tiny_depth_model.params[name].data.copy()
    values = [0.5, -1.0, 2.0, 0.25]
    for v in values:
        for p in tiny_depth_model.params.values():
            p.data = np.full(p.shape, v)
        tiny_depth_model.update_ema(decay)
    k = len(values)
    expected = decay ** k * init + (1 - decay) * sum(decay ** (k - 1 - i) * v for i, v in enumerate(values))
    assert np.allclose(tiny_depth_model.ema_params[name], expected, atol=1e-12)
    assert set(tiny_depth_model.ema_params) == set(tiny_depth_model.params)


def test_ema_decay_must_be_a_fraction(tiny_depth_model):
    with pytest.raises(ValueError):
        tiny_depth_model.update_ema(1.5)


def test_reinit_io_layers_keeps_hidden_weights(tiny_depth_model):
    perturb_output_layer(tiny_depth_model)
    flow = reinit_io_layers(tiny_depth_model, ch_in=8, ch_out=2, rng=np.random.default_rng(1), task="flow")
    assert flow.arch.task == "flow"
    assert flow.params["in.conv.w"].shape == (3, 3, 8, 8)
    assert np.all(flow.params["out.conv.w"].data == 0.0)
    for name, p in tiny_depth_model.params.items():
        if not name.startswith(("in.conv.", "out.conv.")):
            assert np.array_equal(flow.params[name].data, p.data)
            assert np.array_equal(flow.ema_params[name], tiny_depth_model.ema_params[name])
    out = flow.predict(np.zeros((4, 4, 6)), np.zeros((4, 4, 2)), 0.5)
    assert np.all(out == 0.0)


def test_attention_variant_runs(rng):
    arch = DenoiserArch.for_task("depth", base_width=8, levels=1, time_dim=8, attn_at_bottom=True, attn_levels=2)
    assert arch.attention_levels == [0, 1]
    model = DenoiserModel.create(arch, np.random.default_rng(0))
    perturb_output_layer(model)
    out = model.predict(rng.normal(size=(4, 4, 3)), rng.normal(size=(4, 4, 1)), 0.3, use_ema=False)
    assert out.shape == (4, 4, 1)
    assert np.all(np.isfinite(out))


def film_params(rng, c, time_hidden, scale_bias):
    table = {}
    layers.init_film_block(table, "b", rng, c, c, time_hidden)
    for part in ("scale", "shift"):
        table[f"b.{part}.w"] = np.zeros_like(table[f"b.{part}.w"])
    table["b.scale.b"] = np.full(c, scale_bias)
    return {name: Tensor(value) for name, value in table.items()}


def test_film_scale_is_one_plus_the_time_map():
    rng = np.random.default_rng(2)
    x = Tensor(rng.normal(size=(2, 4, 4, 4)))
    temb = Tensor(rng.normal(size=(2, 8)))
    identity = film_params(np.random.default_rng(9), 4, 8, 0.0)
    normalized = group_norm(layers.conv(identity, "b.conv", x), 2)
    expected = silu(normalized).data + x.data
    assert np.allclose(layers.film_block(identity, "b", x, temb, 2).data, expected)

    doubled = film_params(np.random.default_rng(9), 4, 8, 1.0)
    assert np.allclose(layers.film_block(doubled, "b", x, temb, 2).data, silu(normalized * 2.0).data + x.data)
