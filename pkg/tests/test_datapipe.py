import csv

import numpy as np
import pytest

from geonet.datapipe import (
    AugmentConfig,
    augment,
    augmented_batch,
    build_samples,
    crop_side,
    eval_view,
    expand_labels,
    expand_serial,
    load_slices,
    make_split,
    materialize,
    phantom_slices,
    sample_rng,
    synth_phantom,
)
from geonet.orient import enumerate_2d, get_2d
from geonet.pgm import PGMError, write_pgm
from geonet.raster import apply_2d


def test_expand_labels():
    img = np.random.default_rng(0).random((6, 9))
    out = expand_labels(img, "a")
    assert len(out) == 8
    assert sorted(y for _, y in out) == list(range(8))
    assert np.array_equal(out[0][0], img)
    for timg, y in out:
        assert np.array_equal(timg, apply_2d(img, get_2d(y)))
    assert sum(len(expand_labels(img)) for _ in range(174)) == 1392


def test_expand_serial():
    stack = np.random.default_rng(1).random((3, 4, 5))
    out = expand_serial(stack)
    assert len(out) == 16 and sorted(y for _, y in out) == list(range(16))
    assert np.array_equal(out[8][0], stack[::-1])


@pytest.mark.parametrize("n,train", [(174, 139), (5, 4), (200, 160), (7, 5)])
def test_split_sizes(n, train):
    s = make_split(n, seed=3)
    assert len(s.train) == train and len(s.test) == n - train
    assert set(s.train).isdisjoint(s.test)
    assert sorted(s.train + s.test) == list(range(n))
    assert make_split(n, seed=3) == s


def test_split_depends_on_seed_and_rejects_small():
    assert make_split(50, 0).train != make_split(50, 1).train
    with pytest.raises(ValueError):
        make_split(4, 0)


def test_crop_side():
    assert crop_side(256, 256, 0.7) == 214
    assert crop_side(80, 120, 1.0) == 80
    with pytest.raises(ValueError):
        crop_side(1, 1, 0.1)


def test_augment_config_validation():
    for kw in [dict(crop_fraction=0), dict(crop_fraction=1.5), dict(out_size=4),
               dict(max_jitter_degrees=45), dict(max_jitter_degrees=-1)]:
        with pytest.raises(ValueError):
            AugmentConfig(**kw)


def test_augment_identity_and_shape():
    img = np.random.default_rng(2).random((20, 20))
    cfg = AugmentConfig(crop_fraction=1.0, out_size=20, max_jitter_degrees=0)
    np.testing.assert_allclose(augment(img, cfg, np.random.default_rng(0)), img, atol=1e-6)
    cfg = AugmentConfig(out_size=16)
    for shape in [(20, 20), (33, 47), (80, 40)]:
        out = augment(np.random.default_rng(3).random(shape), cfg, np.random.default_rng(1))
        assert out.shape == (16, 16) and out.min() >= 0 and out.max() <= 1
    assert eval_view(img, cfg).shape == (16, 16)


def test_augment_is_deterministic_per_sample():
    img = np.random.default_rng(4).random((40, 40))
    cfg = AugmentConfig(out_size=16)
    a = augment(img, cfg, sample_rng(0, "s1", 3, 2))
    b = augment(img, cfg, sample_rng(0, "s1", 3, 2))
    c = augment(img, cfg, sample_rng(0, "s1", 4, 2))
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_phantom_properties():
    a = synth_phantom(5)
    assert np.array_equal(a, synth_phantom(5))
    assert a.shape == (80, 80) and a.min() >= 0 and a.max() <= 1
    assert synth_phantom(5, 40, 64).shape == (40, 64)
    with pytest.raises(ValueError):
        synth_phantom(0, 16, 16)


def test_phantoms_are_asymmetric_under_every_transform():
    for sid, img in phantom_slices(200, seed=0):
        for t in enumerate_2d()[1:]:
            timg = apply_2d(img, t)
            assert np.abs(timg - img).mean() > 0.01, (sid, t.label)


def test_batches_do_not_depend_on_worker_count():
    slices = phantom_slices(6, seed=1, size=40)
    samples = build_samples(slices, [0, 1], clahe_mode="post", tile_grid=(4, 4))
    cfg = AugmentConfig(out_size=16)
    assert len(samples) == 16
    a = augmented_batch(samples, cfg, epoch=2, workers=1)
    b = augmented_batch(samples, cfg, epoch=2, workers=4)
    assert a.shape == (16, 1, 16, 16) and a.dtype == np.float32
    assert np.array_equal(a, b)


def test_load_slices_sorted(tmp_path):
    write_pgm(tmp_path / "b.pgm", np.zeros((4, 4)))
    write_pgm(tmp_path / "a.pgm", np.ones((4, 4)))
    (tmp_path / "notes.txt").write_text("x")
    slices = load_slices(tmp_path)
    assert [sid for sid, _ in slices] == ["a", "b"]
    assert slices[0][1].max() == 1.0


def test_load_slices_errors(tmp_path):
    with pytest.raises(ValueError):
        load_slices(tmp_path)
    (tmp_path / "bad.pgm").write_bytes(b"P2\n1 1\n255\n0")
    with pytest.raises(PGMError, match="bad.pgm"):
        load_slices(tmp_path)


def test_materialize_tree_and_manifest(tmp_path):
    slices = phantom_slices(10, seed=2, size=32)
    out = materialize(slices, make_split(10, 2), tmp_path / "ds")
    with open(out / "manifest.tsv") as f:
        rows = list(csv.DictReader(f, delimiter="\t"))
    assert len(rows) == 80
    train_ids = {r["source_id"] for r in rows if r["split"] == "train"}
    test_ids = {r["source_id"] for r in rows if r["split"] == "test"}
    assert train_ids.isdisjoint(test_ids) and len(train_ids) == 8 and len(test_ids) == 2
    for y in range(8):
        assert sum(r["label"] == str(y) for r in rows) == 10
    assert all((out / r["path"]).is_file() for r in rows)
    assert len(list(out.rglob("*.pgm"))) == 80
    with pytest.raises(FileExistsError):
        materialize(slices, make_split(10, 2), out)
