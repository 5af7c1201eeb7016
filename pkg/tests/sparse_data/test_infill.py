import numpy as np
import pytest

from ddvm.errors import InfillError
from ddvm.sparse_data import SparseTarget, infill, infill_flow_rowcol, infill_nearest


def row(values, valid):
    return SparseTarget(np.array([values], dtype=float)[..., None], np.array([valid]))


def brute_force_nearest(values, mask):
    height, width, _ = values.shape
    out = values.copy()
    valid = [(r, c) for r in range(height) for c in range(width) if mask[r, c]]
    for r in range(height):
        for c in range(width):
            if mask[r, c]:
                continue
            best, best_d = None, None
            # row-major scan with strict < keeps the smallest row, then column, on ties
            for vr, vc in valid:
                d = (vr - r) ** 2 + (vc - c) ** 2
                if best_d is None or d < best_d:
                    best, best_d = (vr, vc), d
            out[r, c] = values[best]
    return out


def two_pass_reference(values, mask):
    height, width, _ = values.shape
    rows_ok = [bool(mask[r].any()) for r in range(height)]
    filled = values.copy()
    for r in range(height):
        if not rows_ok[r]:
            continue
        for c in range(width):
            best, best_d = None, None
            for cc in range(width):
                if mask[r, cc] and (best_d is None or abs(cc - c) < best_d):
                    best, best_d = cc, abs(cc - c)
            filled[r, c] = values[r, best]
    out = filled.copy()
    for r in range(height):
        best, best_d = None, None
        for rr in range(height):
            if rows_ok[rr] and (best_d is None or abs(rr - r) < best_d):
                best, best_d = rr, abs(rr - r)
        out[r] = filled[best]
    return out


def random_case(rng, channels):
    height, width = rng.integers(1, 33, size=2)
    density = rng.uniform(0.02, 0.6)
    mask = rng.uniform(size=(height, width)) < density
    if not mask.any():
        mask[rng.integers(height), rng.integers(width)] = True
    return SparseTarget(rng.normal(size=(height, width, channels)), mask)


def test_nearest_examples():
    assert infill_nearest(row([2, 0, 0, 8], [True, False, False, True])).flat().tolist() == [2, 2, 8, 8]
    assert infill_nearest(row([2, 0, 8], [True, False, True])).flat().tolist() == [2, 2, 8]
    mask = np.zeros((4, 5), dtype=bool)
    mask[2, 3] = True
    values = np.zeros((4, 5, 1))
    values[2, 3] = 4.0
    assert np.all(infill_nearest(SparseTarget(values, mask)).values == 4.0)


def test_nearest_matches_brute_force():
    rng = np.random.default_rng(0)
    for _ in range(100):
        target = random_case(rng, channels=1)
        expected = brute_force_nearest(np.array(target.values), target.mask)
        assert np.array_equal(infill_nearest(target).values, expected)


def test_rowcol_examples():
    values = np.zeros((2, 2, 2))
    values[0, 0] = [3.0, -1.0]
    mask = np.array([[True, False], [False, False]])
    out = infill_flow_rowcol(SparseTarget(values, mask)).values
    assert np.all(out[..., 0] == 3.0)
    assert np.all(out[..., 1] == -1.0)

    values = np.zeros((2, 2, 1))
    values[0, 0], values[1, 1] = 1.0, 5.0
    out = infill_flow_rowcol(SparseTarget(values, np.eye(2, dtype=bool))).values[..., 0]
    assert out.tolist() == [[1.0, 1.0], [5.0, 5.0]]


def test_rowcol_matches_two_pass_reference():
    rng = np.random.default_rng(1)
    for _ in range(100):
        target = random_case(rng, channels=2)
        expected = two_pass_reference(np.array(target.values), target.mask)
        assert np.array_equal(infill_flow_rowcol(target).values, expected)


@pytest.mark.parametrize("mode", ["nearest", "rowcol"])
def test_valid_pixels_preserved_and_no_holes_left(mode):
    rng = np.random.default_rng(2)
    target = random_case(rng, channels=2)
    out = infill(target, mode)
    assert np.array_equal(out[target.mask], target.values[target.mask])
    assert np.all(np.isfinite(out))


@pytest.mark.parametrize("fn", [infill_nearest, infill_flow_rowcol])
def test_dense_target_is_unchanged(fn):
    values = np.random.default_rng(3).normal(size=(5, 7, 2))
    assert np.array_equal(fn(SparseTarget.dense(values)).values, values)


@pytest.mark.parametrize("fn", [infill_nearest, infill_flow_rowcol])
def test_empty_mask_raises(fn):
    with pytest.raises(InfillError):
        fn(SparseTarget(np.zeros((3, 3, 1)), np.zeros((3, 3), dtype=bool)))


def test_batched_infill_and_none_mode():
    rng = np.random.default_rng(4)
    mask = rng.uniform(size=(2, 6, 6)) < 0.3
    mask[:, 0, 0] = True
    batch = SparseTarget(rng.normal(size=(2, 6, 6, 1)), mask)
    out = infill(batch, "nearest")
    assert out.shape == (2, 6, 6, 1)
    assert np.array_equal(out[1], infill_nearest(batch[1]).values)
    assert np.array_equal(infill(batch, "none"), batch.values)
    with pytest.raises(ValueError):
        infill(batch, "bilinear")
