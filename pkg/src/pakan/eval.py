"""Dataset-level metric evaluation at reduced and full resolution."""

from __future__ import annotations

import numpy as np

from .data import DatasetManifest, load_pair
from .errors import ConfigError
from .metrics import MetricReport, d_lambda, d_s, ergas, hqnr, psnr, q2n, sam
from .network import PansharpNet
from .tensorgraph import Tensor, no_grad
from .tiling import TileSpec, tile_infer


def predict(net: PansharpNet, lr_ms: np.ndarray, pan: np.ndarray) -> np.ndarray:
    """Single-sample whole-image forward pass."""
    with no_grad():
        out = net.forward(Tensor(lr_ms[None]), Tensor(pan[None]))
    return out.data[0]


def eval_reduced(net: PansharpNet, manifest: DatasetManifest,
                 split: str = "test") -> MetricReport:
    """Ground-truth metrics on a split: PSNR, SAM, ERGAS, Q2n."""
    paths = manifest.paths(split)
    if not paths:
        raise ConfigError(f"dataset has an empty {split!r} split")
    report = MetricReport(resolution="reduced")
    for sid, path in paths:
        pair = load_pair(path)
        pred = predict(net, pair.lr_ms, pair.pan)
        report.add(sid, {
            "psnr": psnr(pred, pair.gt),
            "sam": sam(pred, pair.gt),
            "ergas": ergas(pred, pair.gt),
            "q2n": q2n(pred, pair.gt),
        })
    return report


def eval_full(net: PansharpNet, manifest: DatasetManifest,
              split: str = "test", spec: TileSpec = TileSpec()) -> MetricReport:
    """No-reference metrics on a split, fusing with tiled inference."""
    paths = manifest.paths(split)
    if not paths:
        raise ConfigError(f"dataset has an empty {split!r} split")
    report = MetricReport(resolution="full")
    for sid, path in paths:
        pair = load_pair(path)
        fused = tile_infer(net, pair.lr_ms, pair.pan, spec)
        dl = d_lambda(fused, pair.lr_ms)
        ds = d_s(fused, pair.lr_ms, pair.pan)
        report.add(sid, {"d_lambda": dl, "d_s": ds, "hqnr": hqnr(dl, ds)})
    return report
