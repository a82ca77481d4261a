"""Parameter-matched variant grid: train each variant over several seeds.

Variants mirror the two ablation axes: adaptive weight generation on/off
(``pa``) with spline activation on/off (``kan``), and the 2D/1D branch
toggles.  Every variant registers identical parameter shapes, so counts
match exactly.  Comparisons use the final-epoch validation L1 plus the
validation SAM of the final model.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .data import load_pair, read_manifest
from .eval import predict
from .metrics import sam
from .optim import TrainConfig
from .train import train

VARIANTS = {
    "full": dict(pa=True, kan=True, use_1d=True, use_2d=True),
    "baseline": dict(pa=False, kan=False, use_1d=True, use_2d=True),
    "kan_1d_only": dict(pa=True, kan=True, use_1d=True, use_2d=False),
    "kan_2d_only": dict(pa=True, kan=True, use_1d=False, use_2d=True),
}


@dataclass
class VariantRun:
    variant: str
    seed: int
    final_val_l1: float
    best_val_l1: float
    val_sam: float
    param_count: int


def _val_sam(net, manifest) -> float:
    vals = []
    for _, path in manifest.paths("val"):
        pair = load_pair(path)
        vals.append(sam(predict(net, pair.lr_ms, pair.pan), pair.gt))
    return float(np.mean(vals))


def run_grid(dataset, out_dir, seeds=(0, 1, 2), epochs: int = 60,
             base: TrainConfig | None = None, progress=None):
    """Train every variant for every seed; returns a list of VariantRun."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    base = base if base is not None else TrainConfig()
    manifest = read_manifest(dataset)
    runs = []
    for variant, flags in VARIANTS.items():
        for seed in seeds:
            cfg = replace(base, dataset=str(dataset), epochs=epochs,
                          seed=seed, **flags)
            run_dir = out / f"{variant}_seed{seed}"
            if progress is not None:
                progress(f"training {variant} seed {seed}")
            result = train(cfg, run_dir)
            runs.append(VariantRun(
                variant=variant, seed=seed,
                final_val_l1=result.final_val,
                best_val_l1=result.best_val,
                val_sam=_val_sam(result.net, manifest),
                param_count=result.net.params.num_values()))
    return runs


def by_variant(runs):
    table = {}
    for r in runs:
        table.setdefault(r.variant, {})[r.seed] = r
    return table


def wins(runs, better: str, worse: str, metric: str) -> int:
    """Seeds on which `better` strictly beats `worse` on the given metric."""
    table = by_variant(runs)
    count = 0
    for seed, run in table[better].items():
        other = table[worse][seed]
        if getattr(run, metric) < getattr(other, metric):
            count += 1
    return count


def format_table(runs) -> str:
    lines = ["variant\tseed\tfinal_val_l1\tbest_val_l1\tval_sam\tparams"]
    for r in runs:
        lines.append(f"{r.variant}\t{r.seed}\t{r.final_val_l1!r}\t"
                     f"{r.best_val_l1!r}\t{r.val_sam!r}\t{r.param_count}")
    table = by_variant(runs)
    for variant, per_seed in table.items():
        l1 = np.mean([r.final_val_l1 for r in per_seed.values()])
        sm = np.mean([r.val_sam for r in per_seed.values()])
        lines.append(f"{variant}\tmean\t{float(l1)!r}\t-\t{float(sm)!r}\t-")
    return "\n".join(lines)
