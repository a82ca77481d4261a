"""Compact pansharpening network exercising both adaptive blocks.

Layout: both inputs are lifted to a shared feature width by a 3x3 conv + tanh
stem (the MS stream after bilinear 4x upsampling, so fusion happens at PAN
resolution), fused by one 2to1 block, refined by ``depth`` repetitions of
{1to1 block, 3x3 conv + tanh}, and projected back to the band count by a
zero-initialized 3x3 head conv.  The upsampled MS image is added as a global
residual, so a fresh network is exactly the bilinear upsampler.

Variant flags (ablation grid):
  pa=False     freeze both weight generators at their zero initialization,
               i.e. constant 0.5 coefficients (static activations).
  kan=False    replace the basis expansion by a gate * tanh nonlinearity,
               where the gate is the mean of the generated coefficients.
  use_2d/use_1d=False
               disable one branch of every block (treated as all-ones in the
               products); its parameters stay allocated but frozen.

All variants therefore register identical parameter shapes, which keeps the
total parameter count exactly matched across the grid.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .blocks import Pakan1to1Block, Pakan2to1Block
from .errors import ConfigError, ShapeError
from .splines import SplineBasisSpec
from .tensorgraph import (ParamStore, Tensor, abs_, add, conv2d, mean_all,
                          resample, sub, tanh)

SCALE = 4  # PAN-to-MS resolution ratio


@dataclass(frozen=True)
class NetworkConfig:
    bands: int = 4
    feature_width: int = 16
    depth: int = 2
    pa: bool = True
    kan: bool = True
    use_1d: bool = True
    use_2d: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.bands < 1 or self.feature_width < 1:
            raise ConfigError("bands and feature_width must be positive")
        if self.depth < 0:
            raise ConfigError("depth must be >= 0")
        if not (self.use_1d or self.use_2d):
            raise ConfigError("at least one of use_1d/use_2d must be enabled")

    def to_line(self) -> str:
        parts = []
        for f in fields(self):
            v = getattr(self, f.name)
            parts.append(f"{f.name}={int(v) if isinstance(v, bool) else v}")
        return " ".join(parts)

    @classmethod
    def from_line(cls, line: str) -> "NetworkConfig":
        kw = {}
        for item in line.split():
            key, _, val = item.partition("=")
            kw[key] = val
        typed = {}
        for f in fields(cls):
            if f.name not in kw:
                raise ConfigError(f"checkpoint config line misses {f.name!r}")
            raw = kw.pop(f.name)
            typed[f.name] = bool(int(raw)) if f.type == "bool" else int(raw)
        if kw:
            raise ConfigError(f"unknown keys in checkpoint config line: {sorted(kw)}")
        return cls(**typed)


def _register_conv(store, name, c_out, c_in, k, rng, zero=False):
    if zero:
        w = np.zeros((c_out, c_in, k, k))
        b = np.zeros(c_out)
    else:
        bound = 1.0 / np.sqrt(c_in * k * k)
        w = rng.uniform(-bound, bound, (c_out, c_in, k, k))
        b = rng.uniform(-bound, bound, c_out)
    return store.register(f"{name}.weight", w), store.register(f"{name}.bias", b)


class PansharpNet:
    def __init__(self, cfg: NetworkConfig):
        self.cfg = cfg
        self.params = ParamStore()
        rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
        basis = SplineBasisSpec("cubic_bspline", 5)
        C, Cf = cfg.bands, cfg.feature_width
        block_kw = dict(spline=cfg.kan, gen_trainable=cfg.pa,
                        use_2d=cfg.use_2d, use_1d=cfg.use_1d)

        self.stem_ms = _register_conv(self.params, "stem_ms", Cf, C, 3, rng)
        self.stem_pan = _register_conv(self.params, "stem_pan", Cf, 1, 3, rng)
        self.fuse = Pakan2to1Block(self.params, "fuse", Cf, basis, rng, **block_kw)
        self.refine = []
        for r in range(cfg.depth):
            blk = Pakan1to1Block(self.params, f"refine{r}.block", Cf, basis,
                                 rng, **block_kw)
            cw, cb = _register_conv(self.params, f"refine{r}.conv", Cf, Cf, 3, rng)
            self.refine.append((blk, cw, cb))
        self.head = _register_conv(self.params, "head", C, Cf, 3, rng, zero=True)

        expected = _param_count(cfg)
        got = self.params.num_values()
        if abs(got - expected) > 0.05 * expected:
            raise ConfigError(
                f"variant parameter count {got} deviates from the full "
                f"model's {expected} by more than 5%")

    def forward(self, ms: Tensor, pan: Tensor,
                ms_up: Tensor | None = None) -> Tensor:
        """Fuse (ms, pan); ``ms_up`` optionally supplies the upsampled MS.

        Tiled inference precomputes the bilinear upsampling over the whole
        scene and passes aligned slices here, so tile boundaries see true
        interpolation context instead of edge clamping.
        """
        C = self.cfg.bands
        if pan.data.ndim != 4:
            raise ShapeError("network inputs must be rank-4 tensors")
        if pan.shape[1] != 1:
            raise ShapeError("PAN input must have one channel")
        if ms_up is None:
            if ms.data.ndim != 4:
                raise ShapeError("network inputs must be rank-4 tensors")
            if ms.shape[1] != C:
                raise ShapeError(
                    f"MS input has {ms.shape[1]} bands, expected {C}")
            if (pan.shape[2] != SCALE * ms.shape[2]
                    or pan.shape[3] != SCALE * ms.shape[3]):
                raise ShapeError(
                    f"PAN spatial dims {pan.dims[2:]} must be exactly {SCALE}x "
                    f"the MS dims {ms.dims[2:]}")
            up = resample(ms, "bilinear_up", SCALE)
        else:
            if ms_up.shape[1] != C or ms_up.shape[2:] != pan.shape[2:]:
                raise ShapeError(
                    f"upsampled MS dims {ms_up.dims} must match PAN {pan.dims}")
            up = ms_up
        fm = tanh(conv2d(up, *self.stem_ms, padding=1))
        fp = tanh(conv2d(pan, *self.stem_pan, padding=1))
        f = self.fuse.forward(fm, fp)
        for blk, cw, cb in self.refine:
            f = tanh(conv2d(blk.forward(f), cw, cb, padding=1))
        out = conv2d(f, *self.head, padding=1)
        return add(out, up)


def _param_count(cfg: NetworkConfig) -> int:
    """Parameter count of the full model (identical for every variant)."""
    C, Cf, K = cfg.bands, cfg.feature_width, 8
    stems = Cf * C * 9 + Cf + Cf * 1 * 9 + Cf
    block2 = (Cf * 2 * Cf + K * 2 * Cf + K) + (Cf * 2 * Cf + 2 * 2 * Cf * K)
    block1 = (Cf * Cf + K * Cf + K) + (Cf * Cf + 2 * Cf * K)
    refine = cfg.depth * (block1 + Cf * Cf * 9 + Cf)
    head = C * Cf * 9 + C
    return stems + block2 + refine + head


def build_network(cfg: NetworkConfig) -> PansharpNet:
    """Deterministically initialized network for the given variant flags."""
    return PansharpNet(cfg)


def network_forward(net: PansharpNet, ms: Tensor, pan: Tensor) -> Tensor:
    return net.forward(ms, pan)


def l1_loss(pred: Tensor, target: Tensor) -> Tensor:
    """Mean absolute error over all elements (batch included)."""
    if pred.shape != target.shape:
        raise ShapeError(
            f"l1_loss shapes differ: {pred.dims} vs {target.dims}")
    return mean_all(abs_(sub(pred, target)))
