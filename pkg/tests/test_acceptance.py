"""Primary acceptance criteria. Each test records one PASS/FAIL line,
printed in the terminal summary."""
import itertools
import math
import time

import numpy as np
import pytest

from conftest import DESK_CFG, record
from geonet.cli import main
from geonet.config import parse_config
from geonet.datapipe import eval_batch, phantom_slices
from geonet.neural import BatchNorm2d, Conv2d, GeoNet, GlobalAvgPool, Linear, MaxPool2x2, ReLU
from geonet.neural import grad_check, load_checkpoint, softmax_xent
from geonet.orient import (
    compose_2d,
    composition_table,
    enumerate_2d,
    enumerate_3d,
    enumerate_3d_candidates,
    enumerate_serial,
    get_2d,
    inverse_2d,
    inverse_serial,
)
from geonet.pgm import read_pgm, write_pgm
from geonet.raster import apply_2d, apply_serial, clahe, entropy, quantize
from geonet.trainer import fix_orientation, prepare_data

LN8 = math.log(8)

SET_T = [
    [[1, 0], [0, 1]], [[0, 1], [-1, 0]], [[-1, 0], [0, -1]], [[0, -1], [1, 0]],
    [[-1, 0], [0, 1]], [[0, -1], [-1, 0]], [[1, 0], [0, -1]], [[0, 1], [1, 0]],
]

# distinct orientations among the 18 flip-then-rotate candidates, found by brute force
DISTINCT_3D = 12


def test_group_algebra():
    t0 = time.perf_counter()
    ts = enumerate_2d()
    verbatim = [t.matrix.tolist() for t in ts] == SET_T
    members = {np.array(m).tobytes(): i for i, m in enumerate(SET_T)}
    table = composition_table()
    closed = all(
        members.get((np.array(a) @ np.array(b)).tobytes()) == table[i, j]
        for (i, a), (j, b) in itertools.product(enumerate(SET_T), repeat=2)
    )
    inverses = all(inverse_2d(t).matrix.tobytes() in members
                   and compose_2d(t, inverse_2d(t)) == ts[0] for t in ts)
    img = np.random.default_rng(0).random((37, 23))
    functorial = all(
        np.array_equal(apply_2d(img, compose_2d(a, b)), apply_2d(apply_2d(img, b), a))
        for a, b in itertools.product(ts, repeat=2)
    )
    secs = time.perf_counter() - t0
    ok = verbatim and closed and inverses and functorial and secs < 1.0
    assert record("group algebra", ok,
                  f"verbatim={verbatim} closed={closed} inverses={inverses} "
                  f"functorial(37x23, 64 pairs)={functorial} {secs:.3f}s < 1s")


def test_round_trip_restoration():
    rng = np.random.default_rng(1)
    img, stack = rng.random((37, 23)), rng.random((5, 37, 23))
    ok2 = sum(np.array_equal(apply_2d(apply_2d(img, t), inverse_2d(t)), img) for t in enumerate_2d())
    oks = sum(np.array_equal(apply_serial(apply_serial(stack, s), inverse_serial(s)), stack)
              for s in enumerate_serial())
    assert record("round-trip restoration", ok2 == 8 and oks == 16,
                  f"2D {ok2}/8 and serial {oks}/16 bit-exact")


def test_3d_enumeration():
    cands = enumerate_3d_candidates()
    valid = all((m.T @ m == np.eye(3, dtype=int)).all() and round(np.linalg.det(m)) == -1
                for _, _, m in cands)
    distinct = len({m.tobytes() for _, _, m in cands})
    enum = enumerate_3d()
    ok = len(cands) == 18 and valid and distinct == DISTINCT_3D == enum.distinct_count
    assert record("3D enumeration", ok,
                  f"18 candidates orthogonal with det -1: {valid}; distinct {distinct} "
                  f"(pinned {DISTINCT_3D}; 18 claimed)")


def _per_layer_errors():
    rng = np.random.default_rng(2)
    f64 = np.float64
    cases = [
        (Conv2d(2, 3, 3, rng=rng, dtype=f64), rng.standard_normal((1, 2, 5, 5))),
        (Conv2d(3, 4, 1, rng=rng, dtype=f64), rng.standard_normal((2, 3, 4, 4))),
        (BatchNorm2d(3, dtype=f64), rng.standard_normal((2, 3, 4, 4))),
        (ReLU(), rng.standard_normal((2, 3, 4, 4))),
        (MaxPool2x2(), rng.standard_normal((2, 3, 4, 4))),
        (GlobalAvgPool(), rng.standard_normal((2, 3, 4, 4))),
        (Linear(6, 8, rng=rng, dtype=f64), rng.standard_normal((3, 6))),
    ]
    return {type(layer).__name__: grad_check(layer, x).max_rel_error for layer, x in cases}


def test_gradient_correctness():
    t0 = time.perf_counter()
    net = GeoNet(input_size=16, seed=0, dtype=np.float64)
    x = np.random.default_rng(3).random((1, 1, 16, 16))
    full = grad_check(net, x, labels=np.array([3]))
    layers = _per_layer_errors()
    secs = time.perf_counter() - t0
    worst = max(layers, key=layers.get)
    ok = full.max_rel_error < 1e-4 and layers[worst] < 1e-5 and secs < 60
    assert record("gradient correctness", ok,
                  f"full model {full.max_rel_error:.2e} < 1e-4 over {full.n_checked} entries; "
                  f"worst layer {worst} {layers[worst]:.2e} < 1e-5; {secs:.1f}s < 60s")


def test_loss_sanity():
    uniform, _ = softmax_xent(np.zeros((8, 8)), np.arange(8))
    cfg = parse_config(DESK_CFG)
    data = prepare_data(cfg)
    x = eval_batch(data.test, cfg.augment)
    y = np.array([s.label for s in data.test])
    losses = []
    for seed in range(3):
        logits = GeoNet(cfg.architecture, cfg.input_size, seed=seed).forward(x, training=True)
        losses.append(softmax_xent(logits.astype(np.float64), y)[0])
    ok = abs(uniform - LN8) <= 1e-6 and all(abs(v - LN8) <= 0.5 for v in losses)
    assert record("loss sanity", ok,
                  f"uniform {uniform:.7f} vs ln8 {LN8:.7f}; untrained "
                  + ", ".join(f"{v:.4f}" for v in losses) + " within ln8 +- 0.5")


@pytest.mark.slow
def test_desk_scale_learning(desk_run):
    m = desk_run.metrics
    final = m[-1].test_accuracy
    ok = len(m) == 32 and final >= 0.95 and desk_run.seconds <= 900
    assert record("desk-scale learning", ok,
                  f"final test accuracy {final:.4f} >= 0.95 after {len(m)} epochs "
                  f"(epoch 1: {m[0].test_accuracy:.4f}); {desk_run.seconds:.0f}s <= 900s")


def test_determinism(tmp_path):
    cfg = tmp_path / "short.cfg"
    cfg.write_text(DESK_CFG.replace("epochs = 32", "epochs = 2"))
    cfg4 = tmp_path / "short4.cfg"
    cfg4.write_text(cfg.read_text() + "workers = 4\n")
    outs = []
    for name, c in [("a", cfg), ("b", cfg), ("c", cfg4)]:
        assert main(["train", "--config", str(c), "--out-dir", str(tmp_path / name)]) == 0
        outs.append(((tmp_path / name / "metrics.csv").read_bytes(),
                     (tmp_path / name / "model.geon").read_bytes()))
    same_runs = outs[0] == outs[1]
    same_workers = outs[0] == outs[2]
    assert record("determinism", same_runs and same_workers,
                  f"repeat run identical={same_runs}; 1 vs 4 workers identical={same_workers} "
                  f"(metrics CSV and checkpoint bytes)")


def test_clahe_property():
    n = 256
    yy, xx = np.mgrid[0:n, 0:n] / (n - 1)
    img = 0.4 + 0.2 * np.clip(np.hypot(yy - 0.5, xx - 0.5) / math.sqrt(0.5), 0, 1)
    before, after = entropy(img), entropy(clahe(img))
    const = np.full((64, 64), 0.37)
    fixed = np.array_equal(clahe(const), const)
    assert record("CLAHE property", after >= before and fixed,
                  f"radial low-contrast gradient entropy {before:.3f} -> {after:.3f} bits; "
                  f"constant image fixed point={fixed}")


@pytest.mark.slow
def test_end_to_end_correction(desk_run, tmp_path):
    cfg = desk_run.config
    model, pre = load_checkpoint(desk_run.checkpoint)
    split = prepare_data(cfg).split
    raw = phantom_slices(cfg.n_slices, cfg.seed, cfg.phantom_size)
    restored = total = 0
    for i in split.test:
        levels = quantize(raw[i][1])
        original = levels / 255.0
        for t in enumerate_2d():
            fixed = fix_orientation(model, apply_2d(original, t), pre)
            restored += np.array_equal(quantize(fixed), levels)
            total += 1
    # one case through the command line, compared byte for byte
    sid, img = raw[split.test[0]]
    write_pgm(tmp_path / "orig.pgm", img)
    write_pgm(tmp_path / "t3.pgm", apply_2d(read_pgm(tmp_path / "orig.pgm"), get_2d(3)))
    assert main(["fix", "--checkpoint", str(desk_run.checkpoint),
                 "--in", str(tmp_path / "t3.pgm"), "--out", str(tmp_path / "fixed.pgm")]) == 0
    cli_ok = (tmp_path / "fixed.pgm").read_bytes() == (tmp_path / "orig.pgm").read_bytes()
    rate = restored / total
    assert record("end-to-end correction", rate >= 0.95 and cli_ok,
                  f"{restored}/{total} held-out transformed phantoms restored bit-exactly "
                  f"({rate:.4f} >= 0.95); CLI fix on label 3 byte-identical={cli_ok}")
