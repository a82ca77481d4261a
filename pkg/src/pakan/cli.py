"""Command-line surface: synth / train / eval-reduced / eval-full / infer /
gradcheck / ablate.

Exit codes: 0 success, 1 numerical failure (gradient check failure or a
non-finite training loss), 2 usage errors (bad flags, missing files, invalid
configs).
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import fields, replace
from pathlib import Path

import numpy as np

from . import ablate as ablate_mod
from .backend import backend_name
from .data import export_png, export_residual_png, make_dataset, pktn_read, \
    pktn_write, read_manifest
from .errors import PakanError
from .eval import eval_full, eval_reduced
from .gradcheck import run_suite
from .optim import TrainConfig, parse_bool, parse_config_text
from .tiling import tile_infer
from .train import load_checkpoint, train


def _parse_args(argv):
    ap = argparse.ArgumentParser(
        prog="pakan",
        description="Pixel-adaptive spline-activation pansharpening toolkit "
                    f"(kernel backend: {backend_name()})")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=64)
    p.add_argument("--bands", type=int, default=4)
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("train", help="train a network from a config file")
    p.add_argument("--config", help="key = value file with TrainConfig fields")
    p.add_argument("--out-dir", default="train_out")
    for f in fields(TrainConfig):
        p.add_argument(f"--{f.name}", default=None,
                       help=f"override config key {f.name}")

    p = sub.add_parser("eval-reduced", help="ground-truth metrics on a split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--out", default=None, help="report path (default stdout)")

    p = sub.add_parser("eval-full", help="no-reference metrics on a split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--out", default=None)

    p = sub.add_parser("infer", help="fuse one stored sample")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--sample", required=True, help="PKTN file with lr_ms/pan")
    p.add_argument("--out-prefix", required=True)
    p.add_argument("--rgb-bands", default="2,1,0",
                   help="comma-separated band triplet for the PNG composite")

    p = sub.add_parser("gradcheck", help="finite-difference gradient suite")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("ablate", help="train the variant grid and tabulate")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--epochs", type=int, default=60)
    p.add_argument("--seeds", default="0,1,2")

    return ap.parse_args(argv)


def _coerce(name: str, kind: str, raw: str):
    if kind == "bool":
        return parse_bool(raw)
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    return raw


def _train_config(args) -> TrainConfig:
    cfg = TrainConfig()
    if args.config:
        cfg = parse_config_text(Path(args.config).read_text(encoding="utf-8"))
    overrides = {}
    for f in fields(TrainConfig):
        raw = getattr(args, f.name)
        if raw is not None:
            overrides[f.name] = _coerce(f.name, f.type, raw)
    if overrides:
        cfg = replace(cfg, **overrides)
    return cfg


def _emit(text: str, out_path):
    if out_path:
        Path(out_path).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


def _cmd_synth(args) -> int:
    manifest = make_dataset(args.out_dir, args.seed, args.count, args.bands,
                            args.height, args.width)
    counts = manifest.counts()
    print(f"wrote {len(manifest.entries)} samples to {args.out_dir} "
          f"(splits: {counts})")
    return 0


def _cmd_train(args) -> int:
    cfg = _train_config(args)
    result = train(cfg, args.out_dir, progress=print)
    if not np.isfinite(result.final_val):
        print("training diverged: non-finite validation loss", file=sys.stderr)
        return 1
    print(f"best val_l1 {result.best_val!r} at epoch {result.best_epoch}; "
          f"checkpoint: {result.checkpoint_path}")
    return 0


def _cmd_eval(args, full: bool) -> int:
    net = load_checkpoint(args.checkpoint)
    manifest = read_manifest(args.dataset)
    report = (eval_full if full else eval_reduced)(net, manifest, args.split)
    _emit("\n".join(report.format_lines()), args.out)
    return 0


def _cmd_infer(args) -> int:
    net = load_checkpoint(args.checkpoint)
    entries = dict(pktn_read(args.sample))
    if "lr_ms" not in entries or "pan" not in entries:
        raise PakanError(f"{args.sample} lacks lr_ms/pan entries")
    lr_ms = np.asarray(entries["lr_ms"], dtype=np.float64)
    pan = np.asarray(entries["pan"], dtype=np.float64)
    fused = tile_infer(net, lr_ms, pan)
    prefix = Path(args.out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    pktn_write(f"{prefix}.pktn", [("fused", fused)])
    bands = tuple(int(b) for b in args.rgb_bands.split(","))
    export_png(fused, bands, f"{prefix}_rgb.png")
    outputs = [f"{prefix}.pktn", f"{prefix}_rgb.png"]
    if "gt" in entries:
        residual = np.asarray(entries["gt"], dtype=np.float64) - fused
        export_residual_png(residual.mean(axis=0), f"{prefix}_residual.png")
        outputs.append(f"{prefix}_residual.png")
    print("wrote " + ", ".join(outputs))
    return 0


def _cmd_gradcheck(args) -> int:
    ok = True
    for res in run_suite(args.seed):
        status = "PASS" if res.passed else "FAIL"
        print(f"{res.name}\t{res.max_err:.3e}\t{status}")
        ok = ok and res.passed
    return 0 if ok else 1


def _cmd_ablate(args) -> int:
    seeds = tuple(int(s) for s in args.seeds.split(","))
    runs = ablate_mod.run_grid(args.dataset, args.out_dir, seeds=seeds,
                               epochs=args.epochs, progress=print)
    table = ablate_mod.format_table(runs)
    (Path(args.out_dir) / "ablate_results.tsv").write_text(
        table + "\n", encoding="utf-8")
    print(table)
    return 0


def main(argv=None) -> int:
    args = _parse_args(argv)
    try:
        if args.cmd == "synth":
            return _cmd_synth(args)
        if args.cmd == "train":
            return _cmd_train(args)
        if args.cmd == "eval-reduced":
            return _cmd_eval(args, full=False)
        if args.cmd == "eval-full":
            return _cmd_eval(args, full=True)
        if args.cmd == "infer":
            return _cmd_infer(args)
        if args.cmd == "gradcheck":
            return _cmd_gradcheck(args)
        if args.cmd == "ablate":
            return _cmd_ablate(args)
        raise AssertionError(f"unhandled command {args.cmd}")
    except (PakanError, FileNotFoundError, NotADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
