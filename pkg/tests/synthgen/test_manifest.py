import pytest

from ddvm.errors import FormatError
from ddvm.synthgen import MANIFEST_NAME, Manifest, ManifestEntry, SceneSpec, example_seed


def test_write_then_read(tmp_path):
    spec = SceneSpec("flow_layers", 32, 48, sparsity=0.25, seed=3, n_layers=2)
    entries = [
        ManifestEntry(i, example_seed(spec.seed, i),
                      {"frame1": f"{i:05d}_frame1.npy", "frame2": f"{i:05d}_frame2.npy", "flow": f"{i:05d}.flo"})
        for i in range(3)
    ]
    path = Manifest(spec, entries).write(tmp_path)
    assert path.name == MANIFEST_NAME
    loaded = Manifest.read(tmp_path)
    assert loaded.spec == spec
    assert loaded.entries == entries
    assert loaded.entries[1].path(tmp_path, "flow") == tmp_path / "00001.flo"


def test_example_seeds_are_distinct_per_index():
    seeds = {example_seed(7, i) for i in range(100)}
    assert len(seeds) == 100
    assert SceneSpec("constant", seed=7).for_example(2).seed == example_seed(7, 2)


def test_missing_key_and_bad_files(tmp_path):
    entry = ManifestEntry(0, 1, {"image": "00000_image.npy"})
    with pytest.raises(FormatError):
        entry.path(tmp_path, "depth")
    with pytest.raises(FormatError):
        Manifest.read(tmp_path)
    (tmp_path / MANIFEST_NAME).write_text("hello\n")
    with pytest.raises(FormatError):
        Manifest.read(tmp_path)
    (tmp_path / MANIFEST_NAME).write_text('# ddvm-manifest 1\n# spec {"kind": "constant"}\nx\t1\n')
    with pytest.raises(FormatError):
        Manifest.read(tmp_path)
