"""Static KAN layer semantics and the two adaptive operators.

A static layer computes, per spatial position,
``z_j = sum_i sum_k w[j,i,k] * Bk(tanh(u_i))`` with a fixed trainable
coefficient tensor.  The adaptive operators factorize the coefficient tensor
into a static edge-mixing matrix ``a[j,i]`` times K dynamically generated
basis weights: per pixel (2D operator, weights shared across channels at each
location) or per input channel (1D operator, weights shared across space).
Generated weights pass through a sigmoid, so they stay strictly inside
(0, 1).

Generators start with zero weights, so their initial coefficients are
input-independent constants and every adaptive operator begins as an exact
static layer; freezing a generator reproduces the corresponding static layer
exactly.  The bias initialization pins those constants to a pass-through
pattern: the coefficient vector is the least-squares fit of 0.5 + 0.4*v in
the basis, which makes each branch's initial edge function an affine
squashed ramp rather than the constant that uniform coefficients would
produce (the basis sums to one, so equal coefficients erase the input).
All ablation variants therefore start from functionally matched,
feature-passing blocks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError
from .splines import (SplineBasisSpec, basis_eval, basis_stack,
                      spline_mix_1d, spline_mix_2d)
from .tensorgraph import (ParamStore, Tensor, add, conv2d, global_avg_pool,
                          mean_axis, mul, reshape, sigmoid, tanh)

MODES = ("one_to_one", "two_to_one")

_INIT_CACHE: dict = {}


def passthrough_biases(basis: SplineBasisSpec) -> np.ndarray:
    """Generator bias init: coefficients fitting phi(v) = 0.5 + 0.4*v.

    Returned in logit space so sigmoid(bias) gives the fitted coefficients.
    """
    key = (basis.family, basis.grid_size)
    if key not in _INIT_CACHE:
        grid = np.linspace(-1.0, 1.0, 201)
        design = np.stack([basis_eval(v, basis) for v in grid])
        target = 0.5 + 0.4 * grid
        coeffs, *_ = np.linalg.lstsq(design, target, rcond=None)
        coeffs = np.clip(coeffs, 1e-3, 1.0 - 1e-3)
        _INIT_CACHE[key] = np.log(coeffs / (1.0 - coeffs))
    return _INIT_CACHE[key].copy()


@dataclass(frozen=True)
class KanLayerConfig:
    c_in: int
    c_out: int
    basis: SplineBasisSpec
    mode: str = "one_to_one"

    def __post_init__(self):
        if self.c_in < 1 or self.c_out < 1:
            raise ConfigError("channel counts must be positive")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mode == "one_to_one" and self.c_in != self.c_out:
            raise ConfigError(
                f"one_to_one requires c_in == c_out, got {self.c_in} -> {self.c_out}")
        if self.mode == "two_to_one" and self.c_in != 2 * self.c_out:
            raise ConfigError(
                f"two_to_one requires c_in == 2*c_out, got {self.c_in} -> {self.c_out}")


def _check_input(F: Tensor, cfg: KanLayerConfig, opname: str):
    if F.data.ndim != 4:
        raise ShapeError(f"{opname} expects a rank-4 input, got {F.dims}")
    if F.shape[1] != cfg.c_in:
        raise ShapeError(
            f"{opname}: input has {F.shape[1]} channels (axis 1), "
            f"configured for {cfg.c_in}")


class StaticKanWeights:
    """Trainable per-edge coefficient tensor w[c_out, c_in, K]."""

    def __init__(self, store: ParamStore, prefix: str, cfg: KanLayerConfig,
                 rng: np.random.Generator):
        K = cfg.basis.coeff_count
        bound = 1.0 / np.sqrt(cfg.c_in * K)
        self.w = store.register(
            f"{prefix}.w", rng.uniform(-bound, bound, (cfg.c_out, cfg.c_in, K)))


def static_kan_forward(u: Tensor, weights: StaticKanWeights,
                       cfg: KanLayerConfig) -> Tensor:
    """Reference static layer: spline-only edge functions, summed over inputs."""
    _check_input(u, cfg, "static_kan_forward")
    K = cfg.basis.coeff_count
    stack = basis_stack(tanh(u), cfg.basis)  # [B, c_in*K, H, W]
    kern = reshape(weights.w, (cfg.c_out, cfg.c_in * K, 1, 1))
    return conv2d(stack, kern)


class WeightGenerator2D:
    """Per-pixel coefficient generator: 1x1 conv over channels, then sigmoid.

    Emits K coefficients at every spatial position, shared by all edges at
    that position.  Zero-initialized, so the initial output is 0.5 everywhere.
    """

    def __init__(self, store: ParamStore, prefix: str, c_in: int, K: int,
                 trainable: bool = True, bias_init=None):
        bias = np.zeros(K) if bias_init is None else np.asarray(bias_init)
        self.weight = store.register(f"{prefix}.weight",
                                     np.zeros((K, c_in, 1, 1)), trainable)
        self.bias = store.register(f"{prefix}.bias", bias.copy(), trainable)

    def forward(self, F: Tensor) -> Tensor:
        return sigmoid(conv2d(F, self.weight, self.bias))

    def freeze_to_constants(self, consts: np.ndarray) -> None:
        """Pin the generated coefficients to fixed values in (0, 1)."""
        consts = np.asarray(consts, dtype=float)
        if np.any(consts <= 0.0) or np.any(consts >= 1.0):
            raise ConfigError("frozen coefficients must lie strictly in (0, 1)")
        self.weight.data[:] = 0.0
        self.bias.data[:] = np.log(consts / (1.0 - consts))


class WeightGenerator1D:
    """Per-channel coefficient generator: global mean pool, then a per-channel
    affine map to K values, then sigmoid.

    The pooled descriptor makes the output invariant to any spatial
    permutation of the input.  Zero-initialized (constant 0.5 output).
    """

    def __init__(self, store: ParamStore, prefix: str, c_in: int, K: int,
                 trainable: bool = True, bias_init=None):
        self.c_in = c_in
        self.K = K
        bias = (np.zeros((c_in, K)) if bias_init is None
                else np.broadcast_to(np.asarray(bias_init), (c_in, K)).copy())
        self.weight = store.register(f"{prefix}.weight",
                                     np.zeros((c_in, K)), trainable)
        self.bias = store.register(f"{prefix}.bias", bias, trainable)

    def forward(self, F: Tensor) -> Tensor:
        pooled = reshape(global_avg_pool(F), (F.shape[0], self.c_in, 1))
        w = reshape(self.weight, (1, self.c_in, self.K))
        b = reshape(self.bias, (1, self.c_in, self.K))
        return sigmoid(add(mul(pooled, w), b))  # [B, c_in, K]

    def freeze_to_constants(self, consts: np.ndarray) -> None:
        """Pin coefficients per (channel, k); accepts [K] or [c_in, K]."""
        consts = np.broadcast_to(np.asarray(consts, dtype=float),
                                 (self.c_in, self.K))
        if np.any(consts <= 0.0) or np.any(consts >= 1.0):
            raise ConfigError("frozen coefficients must lie strictly in (0, 1)")
        self.weight.data[:] = 0.0
        self.bias.data[:] = np.log(consts / (1.0 - consts))


def gen2d_weights(F: Tensor, gen: WeightGenerator2D) -> Tensor:
    """Coefficient maps [B,K,H,W] for the spatially adaptive operator."""
    return gen.forward(F)


def gen1d_weights(F: Tensor, gen: WeightGenerator1D) -> Tensor:
    """Coefficient table [B,c_in,K] for the spectrally adaptive operator."""
    return gen.forward(F)


class AdaptiveKanOperator:
    """One adaptive operator: edge-mix matrix + weight generator + basis.

    ``kind`` selects spatial ('2d') or spectral ('1d') weight generation.
    With ``spline=False`` the basis expansion is replaced by a fixed tanh
    nonlinearity gated by the mean of the generated weights (the no-KAN
    ablation variant); the parameter shapes are unchanged.
    """

    def __init__(self, store: ParamStore, prefix: str, cfg: KanLayerConfig,
                 kind: str, rng: np.random.Generator, spline: bool = True,
                 gen_trainable: bool = True):
        if kind not in ("2d", "1d"):
            raise ConfigError(f"kind must be '2d' or '1d', got {kind!r}")
        self.cfg = cfg
        self.kind = kind
        self.spline = spline
        K = cfg.basis.coeff_count
        bound = 1.0 / np.sqrt(cfg.c_in * K)
        self.edge = store.register(
            f"{prefix}.edge",
            rng.uniform(-bound, bound, (cfg.c_out, cfg.c_in)))
        bias0 = passthrough_biases(cfg.basis)
        if kind == "2d":
            self.gen = WeightGenerator2D(store, f"{prefix}.gen", cfg.c_in, K,
                                         gen_trainable, bias0)
        else:
            self.gen = WeightGenerator1D(store, f"{prefix}.gen", cfg.c_in, K,
                                         gen_trainable, bias0)

    def forward(self, F: Tensor) -> Tensor:
        cfg = self.cfg
        _check_input(F, cfg, f"adaptive_kan{self.kind}_forward")
        v = tanh(F)
        w = self.gen.forward(F)
        if self.kind == "2d":
            if self.spline:
                s = spline_mix_2d(v, w, cfg.basis)
            else:
                s = mul(v, mean_axis(w, axis=1))  # gated fixed nonlinearity
        else:
            if self.spline:
                s = spline_mix_1d(v, w, cfg.basis)
            else:
                gate = reshape(mean_axis(w, axis=2), (F.shape[0], cfg.c_in, 1, 1))
                s = mul(v, gate)
        kern = reshape(self.edge, (cfg.c_out, cfg.c_in, 1, 1))
        return conv2d(s, kern)


def adaptive_kan2d_forward(F: Tensor, op: AdaptiveKanOperator) -> Tensor:
    if op.kind != "2d":
        raise ConfigError("operator is not spatially adaptive")
    return op.forward(F)


def adaptive_kan1d_forward(F: Tensor, op: AdaptiveKanOperator) -> Tensor:
    if op.kind != "1d":
        raise ConfigError("operator is not spectrally adaptive")
    return op.forward(F)


def static_param_count(cfg: KanLayerConfig) -> int:
    return cfg.c_out * cfg.c_in * cfg.basis.coeff_count


def adaptive_param_count(cfg: KanLayerConfig, kind: str) -> int:
    K = cfg.basis.coeff_count
    gen = K * cfg.c_in + K if kind == "2d" else 2 * cfg.c_in * K
    return cfg.c_out * cfg.c_in + gen
