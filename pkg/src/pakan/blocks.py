"""Assembled blocks: multiplicative coupling of the two adaptive operators.

The refinement block (1to1) maps C -> C channels as the elementwise product
of the spatially and spectrally adaptive branch outputs; the fusion block
(2to1) concatenates its two aligned inputs to 2C channels, reduces each
branch back to C, multiplies the branches, and adds both inputs back as a
residual path.  A disabled branch behaves as an all-ones tensor inside the
product.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError, ShapeError
from .kan import AdaptiveKanOperator, KanLayerConfig
from .splines import SplineBasisSpec
from .tensorgraph import ParamStore, Tensor, add, concat_channels, mul


class _PakanBlock:
    def __init__(self, store: ParamStore, prefix: str, c_in: int, c_out: int,
                 mode: str, basis: SplineBasisSpec, rng: np.random.Generator,
                 spline: bool = True, gen_trainable: bool = True,
                 use_2d: bool = True, use_1d: bool = True):
        if not (use_2d or use_1d):
            raise ConfigError("at least one of the 2D/1D branches must be enabled")
        cfg = KanLayerConfig(c_in, c_out, basis, mode)
        self.channels = c_out
        self.use_2d = use_2d
        self.use_1d = use_1d
        # Parameters for both branches always exist (parameter parity across
        # ablation variants); a disabled branch is frozen and skipped.
        self.psi2d = AdaptiveKanOperator(
            store, f"{prefix}.psi2d", cfg, "2d", rng, spline,
            gen_trainable and use_2d)
        self.psi1d = AdaptiveKanOperator(
            store, f"{prefix}.psi1d", cfg, "1d", rng, spline,
            gen_trainable and use_1d)
        if not use_2d:
            store.set_trainable(f"{prefix}.psi2d.edge", False)
        if not use_1d:
            store.set_trainable(f"{prefix}.psi1d.edge", False)

    def _coupled(self, u: Tensor) -> Tensor:
        if self.use_2d and self.use_1d:
            return mul(self.psi2d.forward(u), self.psi1d.forward(u))
        if self.use_2d:
            return self.psi2d.forward(u)
        return self.psi1d.forward(u)


class Pakan1to1Block(_PakanBlock):
    """Channel-preserving refinement block (C -> C)."""

    def __init__(self, store, prefix, channels, basis, rng, **kw):
        super().__init__(store, prefix, channels, channels, "one_to_one",
                         basis, rng, **kw)

    def forward(self, x: Tensor) -> Tensor:
        return pakan_1to1(x, self)


class Pakan2to1Block(_PakanBlock):
    """Fusion block: two aligned C-channel inputs -> one C-channel output."""

    def __init__(self, store, prefix, channels, basis, rng, **kw):
        super().__init__(store, prefix, 2 * channels, channels, "two_to_one",
                         basis, rng, **kw)

    def forward(self, x: Tensor, y: Tensor) -> Tensor:
        return pakan_2to1(x, y, self)


def couple(F: Tensor, block: Pakan1to1Block) -> Tensor:
    """Elementwise product of the 2D- and 1D-adaptive responses to F."""
    return block._coupled(F)


def pakan_1to1(x: Tensor, block: Pakan1to1Block) -> Tensor:
    if x.data.ndim != 4 or x.shape[1] != block.channels:
        raise ShapeError(
            f"pakan_1to1 expects [B,{block.channels},H,W], got {x.dims}")
    return couple(x, block)


def pakan_2to1(x: Tensor, y: Tensor, block: Pakan2to1Block) -> Tensor:
    if x.shape != y.shape:
        raise ShapeError(f"pakan_2to1 inputs differ: {x.dims} vs {y.dims}")
    if x.data.ndim != 4 or x.shape[1] != block.channels:
        raise ShapeError(
            f"pakan_2to1 expects [B,{block.channels},H,W] inputs, got {x.dims}")
    u = concat_channels(x, y)
    core = block._coupled(u)
    return add(add(core, x), y)
