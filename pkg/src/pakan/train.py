"""Training loop: seeded shuffling, per-epoch logging, best-val checkpoint."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import load_pair, pktn_read, pktn_write, read_manifest
from .errors import ConfigError, ValidationError
from .network import NetworkConfig, PansharpNet, build_network, l1_loss
from .optim import AdamState, TrainConfig, adam_step, lr_at_epoch
from .tensorgraph import Tensor, backward, no_grad

CONFIG_ENTRY = "__config__"


def network_config(cfg: TrainConfig) -> NetworkConfig:
    return NetworkConfig(bands=cfg.bands, feature_width=cfg.feature_width,
                         depth=cfg.depth, pa=cfg.pa, kan=cfg.kan,
                         use_1d=cfg.use_1d, use_2d=cfg.use_2d, seed=cfg.seed)


def save_checkpoint(path, net: PansharpNet) -> None:
    """All parameters plus a config line (stored as UTF-8 byte values)."""
    line = np.frombuffer(net.cfg.to_line().encode("utf-8"), dtype=np.uint8)
    entries = [(CONFIG_ENTRY, line.astype(np.float32))]
    entries += [(name, p.data) for name, p in net.params.items()]
    pktn_write(path, entries)


def load_checkpoint(path) -> PansharpNet:
    entries = dict(pktn_read(path))
    if CONFIG_ENTRY not in entries:
        raise ValidationError(f"checkpoint {path} has no {CONFIG_ENTRY} entry")
    line = bytes(np.rint(entries.pop(CONFIG_ENTRY)).astype(np.uint8)).decode("utf-8")
    net = build_network(NetworkConfig.from_line(line))
    missing = set(net.params.names()) - set(entries)
    extra = set(entries) - set(net.params.names())
    if missing or extra:
        raise ValidationError(
            f"checkpoint/parameter mismatch: missing {sorted(missing)}, "
            f"unexpected {sorted(extra)}")
    for name, arr in entries.items():
        p = net.params[name]
        if tuple(arr.shape) != p.data.shape:
            raise ValidationError(
                f"checkpoint entry {name!r} has shape {arr.shape}, "
                f"expected {p.data.shape}")
        p.data[:] = arr.astype(np.float64)
    return net


def _stack(pairs, idx):
    ms = np.stack([pairs[i].lr_ms for i in idx])
    pan = np.stack([pairs[i].pan for i in idx])
    gt = np.stack([pairs[i].gt for i in idx])
    return Tensor(ms), Tensor(pan), Tensor(gt)


def _epoch_val_loss(net, pairs, batch_size):
    total = 0.0
    with no_grad():
        for lo in range(0, len(pairs), batch_size):
            idx = range(lo, min(lo + batch_size, len(pairs)))
            ms, pan, gt = _stack(pairs, idx)
            loss = l1_loss(net.forward(ms, pan), gt)
            total += float(loss.data) * len(idx)
    return total / len(pairs)


@dataclass
class TrainResult:
    net: PansharpNet           # parameters at the final epoch
    checkpoint_path: Path      # best-validation parameters
    log_lines: list
    best_epoch: int
    best_val: float
    final_val: float
    final_train: float


def train(cfg: TrainConfig, out_dir, progress=None) -> TrainResult:
    """Run the full loop; writes checkpoint.pktn and train_log.tsv."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = read_manifest(cfg.dataset)
    train_pairs = [load_pair(p) for _, p in manifest.paths("train")]
    val_pairs = [load_pair(p) for _, p in manifest.paths("val")]
    if not train_pairs:
        raise ConfigError("dataset has an empty train split")
    if not val_pairs:
        raise ConfigError("dataset has an empty val split")

    net = build_network(network_config(cfg))
    state = AdamState.for_params(net.params, cfg.beta1, cfg.beta2,
                                 weight_decay=cfg.weight_decay)
    shuffle_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 1]))

    log_lines = []
    best_val = np.inf
    best_epoch = -1
    best_params = None
    train_l1 = val_l1 = np.inf
    for epoch in range(cfg.epochs):
        lr = lr_at_epoch(cfg, epoch)
        order = shuffle_rng.permutation(len(train_pairs))
        total = 0.0
        for lo in range(0, len(order), cfg.batch_size):
            idx = order[lo:lo + cfg.batch_size]
            ms, pan, gt = _stack(train_pairs, idx)
            loss = l1_loss(net.forward(ms, pan), gt)
            backward(loss)
            adam_step(net.params, state, lr)
            total += float(loss.data) * len(idx)
        train_l1 = total / len(train_pairs)
        val_l1 = _epoch_val_loss(net, val_pairs, cfg.batch_size)
        log_lines.append(f"{epoch}\t{train_l1!r}\t{val_l1!r}\t{lr!r}")
        if progress is not None:
            progress(log_lines[-1])
        if val_l1 < best_val:
            best_val = val_l1
            best_epoch = epoch
            best_params = {n: p.data.copy() for n, p in net.params.items()}

    (out / "train_log.tsv").write_text("\n".join(log_lines) + "\n",
                                       encoding="utf-8")
    final_params = {n: p.data.copy() for n, p in net.params.items()}
    for name, arr in best_params.items():
        net.params[name].data[:] = arr
    ckpt = out / "checkpoint.pktn"
    save_checkpoint(ckpt, net)
    for name, arr in final_params.items():
        net.params[name].data[:] = arr
    return TrainResult(net=net, checkpoint_path=ckpt, log_lines=log_lines,
                       best_epoch=best_epoch, best_val=best_val,
                       final_val=val_l1, final_train=train_l1)
