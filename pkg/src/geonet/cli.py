"""``geonet`` command line.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime or data error.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, load_config
from .datapipe import eval_batch, load_slices, make_split, materialize, phantom_slices, write_slices
from .neural import CheckpointError, load_checkpoint, save_checkpoint
from .orient import (
    composition_table,
    enumerate_2d,
    enumerate_3d,
    enumerate_3d_candidates,
    enumerate_serial,
    get_2d,
)
from .pgm import read_image, write_atomic, write_pgm
from .raster import apply_2d, histogram
from .trainer import (
    TrainingError,
    evaluate,
    fix_orientation,
    predict_orientation,
    prepare_data,
    train,
    write_confusion,
    write_metrics,
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _fmt_matrix(m) -> str:
    return "[" + ",".join("[" + ",".join(str(int(v)) for v in row) + "]" for row in m) + "]"


# transforms ---------------------------------------------------------------

def cmd_transforms_list(args):
    if args.dim == "2":
        for t in enumerate_2d():
            print(f"{t.label}\t{_fmt_matrix(t.matrix)}\t{t.name}")
    elif args.dim == "3":
        enum = enumerate_3d()
        dup = dict(enum.duplicates)
        for i, (plane, k, m) in enumerate(enumerate_3d_candidates()):
            note = f"\tsame as candidate {dup[i]}" if i in dup else ""
            print(f"{i}\t{_fmt_matrix(m)}\tR{k}*F_{plane}{note}")
        print(f"# {enum.candidate_count} candidates, {enum.distinct_count} distinct")
    else:
        for s in enumerate_serial():
            order = "reversed" if s.time_reversed else "forward"
            print(f"{s.label}\t{_fmt_matrix(s.planar.matrix)}\t{s.planar.name}\t{order}")


def cmd_transforms_apply(args):
    if not 0 <= args.label < 8:
        raise UsageError(f"--label must be in 0..7, got {args.label}")
    img = read_image(args.input)
    write_pgm(args.output, apply_2d(img, get_2d(args.label)))


def cmd_transforms_table(args):
    for row in composition_table():
        print("\t".join(str(int(v)) for v in row))


# dataset -------------------------------------------------------------------

def cmd_dataset_synth(args):
    if args.n < 5:
        raise UsageError("--n must be >= 5")
    slices = phantom_slices(args.n, args.seed, args.size)
    out = materialize(slices, make_split(len(slices), args.seed), args.out, clahe_mode=args.clahe)
    if args.slices_out:
        write_slices(slices, args.slices_out)
    print(f"wrote {8 * len(slices)} samples to {out}")


def cmd_dataset_prepare(args):
    slices = load_slices(args.input)
    if len(slices) < 5:
        raise ValueError(f"{args.input}: need at least 5 slices, found {len(slices)}")
    out = materialize(slices, make_split(len(slices), args.seed), args.out, clahe_mode=args.clahe)
    print(f"wrote {8 * len(slices)} samples to {out}")


# training and inference ------------------------------------------------------

def _artifact_paths(args):
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ckpt = Path(args.checkpoint) if args.checkpoint else out_dir / "model.geon"
    metrics = Path(args.metrics) if args.metrics else out_dir / "metrics.csv"
    return ckpt, metrics


def cmd_train(args):
    cfg = load_config(args.config)
    ckpt, metrics_path = _artifact_paths(args)

    def report(m):
        print(f"epoch {m.epoch}: train_loss={m.train_loss:.6g} train_acc={m.train_accuracy:.6g} "
              f"test_loss={m.test_loss:.6g} test_acc={m.test_accuracy:.6g}", flush=True)

    model, metrics = train(cfg, callback=report)
    save_checkpoint(ckpt, model, cfg.preprocess)
    write_metrics(metrics_path, metrics)
    print(f"checkpoint {ckpt}\nmetrics {metrics_path}")


def cmd_eval(args):
    cfg = load_config(args.config)
    model, _ = load_checkpoint(args.checkpoint)
    if model.input_size != cfg.input_size:
        raise ValueError(f"checkpoint input size {model.input_size} != config {cfg.input_size}")
    data = prepare_data(cfg)
    samples = data.test or data.train
    ev = evaluate(model, eval_batch(samples, cfg.augment, cfg.workers), [s.label for s in samples])
    print(f"loss={ev.loss:.6g} accuracy={ev.accuracy:.6g} n={len(samples)}")
    if args.confusion:
        write_confusion(args.confusion, ev.confusion)


def cmd_predict(args):
    model, pre = load_checkpoint(args.checkpoint)
    label, probs = predict_orientation(model, read_image(args.input), pre)
    print(f"label {label}")
    print(" ".join(f"{p:.8g}" for p in probs))


def cmd_fix(args):
    model, pre = load_checkpoint(args.checkpoint)
    write_pgm(args.output, fix_orientation(model, read_image(args.input), pre))


def cmd_hist(args):
    counts = histogram(read_image(args.input))
    for i, c in enumerate(counts):
        print(f"{i}\t{int(c)}")
    if args.png_out:
        write_atomic(Path(args.png_out), _bar_chart_png(counts))


def _bar_chart_png(counts, height=128) -> bytes:
    import io

    try:
        from PIL import Image
    except ImportError:
        raise RuntimeError("--png-out needs Pillow (pip install Pillow)") from None
    peak = max(int(counts.max()), 1)
    bars = np.round(counts / peak * height).astype(int)
    canvas = np.full((height, len(counts)), 255, dtype=np.uint8)
    for x, b in enumerate(bars):
        if b:
            canvas[height - b:, x] = 0
    buf = io.BytesIO()
    Image.fromarray(canvas).save(buf, format="PNG")
    return buf.getvalue()


# parser ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="geonet", description="Self-supervised orientation recognition for grayscale slices.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    tr = sub.add_parser("transforms", help="inspect and apply orientation transforms")
    trs = tr.add_subparsers(dest="action", required=True, parser_class=_Parser)
    x = trs.add_parser("list", help="print transforms with their matrices")
    x.add_argument("--dim", choices=["2", "3", "serial"], default="2")
    x.set_defaults(func=cmd_transforms_list)
    x = trs.add_parser("apply", help="apply a 2D transform to an image")
    x.add_argument("--label", type=int, required=True)
    x.add_argument("--in", dest="input", required=True)
    x.add_argument("--out", dest="output", required=True)
    x.set_defaults(func=cmd_transforms_apply)
    x = trs.add_parser("table", help="print the 8x8 composition table (row after column)")
    x.set_defaults(func=cmd_transforms_table)

    ds = sub.add_parser("dataset", help="build labeled datasets")
    dss = ds.add_subparsers(dest="action", required=True, parser_class=_Parser)
    x = dss.add_parser("synth", help="synthetic phantom dataset")
    x.add_argument("--n", type=int, required=True)
    x.add_argument("--seed", type=int, default=0)
    x.add_argument("--size", type=int, default=80)
    x.add_argument("--out", required=True)
    x.add_argument("--slices-out", help="also write the untransformed source slices here")
    x.add_argument("--clahe", choices=["pre", "post", "none"], default="pre")
    x.set_defaults(func=cmd_dataset_synth)
    x = dss.add_parser("prepare", help="dataset from a directory of PGM slices")
    x.add_argument("--in", dest="input", required=True)
    x.add_argument("--out", required=True)
    x.add_argument("--seed", type=int, default=0)
    x.add_argument("--clahe", choices=["pre", "post", "none"], default="pre")
    x.set_defaults(func=cmd_dataset_prepare)

    x = sub.add_parser("train", help="train from a config file")
    x.add_argument("--config", required=True)
    x.add_argument("--out-dir", default=".")
    x.add_argument("--checkpoint")
    x.add_argument("--metrics")
    x.set_defaults(func=cmd_train)

    x = sub.add_parser("eval", help="evaluate a checkpoint on the config's test split")
    x.add_argument("--config", required=True)
    x.add_argument("--checkpoint", required=True)
    x.add_argument("--confusion", help="write the 8x8 confusion matrix here")
    x.set_defaults(func=cmd_eval)

    x = sub.add_parser("predict", help="predict the transform of one image")
    x.add_argument("--checkpoint", required=True)
    x.add_argument("--in", dest="input", required=True)
    x.set_defaults(func=cmd_predict)

    x = sub.add_parser("fix", help="undo the predicted transform of one image")
    x.add_argument("--checkpoint", required=True)
    x.add_argument("--in", dest="input", required=True)
    x.add_argument("--out", dest="output", required=True)
    x.set_defaults(func=cmd_fix)

    x = sub.add_parser("hist", help="256-bin intensity histogram")
    x.add_argument("--in", dest="input", required=True)
    x.add_argument("--png-out")
    x.set_defaults(func=cmd_hist)
    return p


def _one_line(e: BaseException) -> str:
    return " ".join(str(e).split()) or type(e).__name__


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        args.func(args)
    except UsageError as e:
        print(f"error: {_one_line(e)}", file=sys.stderr)
        return 1
    except ConfigError as e:
        where = f" (key {e.key})" if e.key else ""
        print(f"config error{where}: {_one_line(e)}", file=sys.stderr)
        return 1
    except (OSError, ValueError, RuntimeError, CheckpointError, TrainingError) as e:
        print(f"error: {_one_line(e)}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
