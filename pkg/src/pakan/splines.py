"""Univariate basis families for spline activations, plus their taped ops.

Two families over the fixed range [-1, 1]:

* ``cubic_bspline`` -- degree-3 B-splines on a uniform knot grid with G
  intervals, extended by 3 knots per side, K = G + 3 functions.
* ``triangular`` -- K = G hat functions with uniformly spaced centers and
  half-width equal to the center spacing; values are normalized by their sum
  at each point.

Both families are nonnegative and sum to 1 everywhere in range.  Arguments
outside [-1, 1] are clamped to the boundary before evaluation, and the
derivative there is 0.  Upstream code squashes activations through tanh, so
clamping only ever fires for raw out-of-range queries.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .backend import kernels
from .errors import ConfigError, ShapeError
from .tensorgraph import Tensor, _make

_FAMILY_CODE = {"cubic_bspline": 0, "triangular": 1}


@dataclass(frozen=True)
class SplineBasisSpec:
    """Configuration of one basis family.

    ``coeff_count`` (the number of basis functions, and of summation weights
    per edge) is G + 3 for cubic B-splines and G for the triangular family.
    """

    family: str = "cubic_bspline"
    grid_size: int = 5
    degree: int = field(init=False, default=3)

    def __post_init__(self):
        if self.family not in _FAMILY_CODE:
            raise ConfigError(f"unknown basis family {self.family!r}")
        if self.grid_size < 2:
            raise ConfigError(
                f"grid_size must be >= 2, got {self.grid_size}")
        object.__setattr__(
            self, "degree", 3 if self.family == "cubic_bspline" else 1)

    @property
    def coeff_count(self) -> int:
        if self.family == "cubic_bspline":
            return self.grid_size + 3
        return self.grid_size

    @property
    def family_code(self) -> int:
        return _FAMILY_CODE[self.family]


def basis_eval(u: float, spec: SplineBasisSpec) -> np.ndarray:
    """All K basis values at scalar u (clamped into [-1, 1])."""
    return kernels.basis_stack(np.asarray([float(u)]),
                               spec.family_code, spec.grid_size)[0]


def basis_grad(u: float, spec: SplineBasisSpec) -> np.ndarray:
    """Derivatives dBk/du at scalar u; zero where u is clamped."""
    k = spec.coeff_count
    out = np.empty(k)
    ua = np.asarray([float(u)])
    for i in range(k):
        g = np.zeros((1, k))
        g[0, i] = 1.0
        out[i] = kernels.basis_stack_grad_dot(ua, g, spec.family_code,
                                              spec.grid_size)[0]
    return out


def basis_stack(u: Tensor, spec: SplineBasisSpec) -> Tensor:
    """Taped op: evaluate the basis at every element of u.

    Input [B,C,H,W] yields [B, C*K, H, W] where slice (b, c*K + k, h, w)
    holds Bk(u[b,c,h,w]).  Also accepts lower ranks; K slots always expand
    the channel-like axis position.
    """
    fam, G = spec.family_code, spec.grid_size
    K = spec.coeff_count
    shp = u.shape
    if len(shp) == 4:
        B, C, H, W = shp
        out_shape = (B, C * K, H, W)
    elif len(shp) == 1:
        B, C, H, W = 1, shp[0], 1, 1
        out_shape = (shp[0], K)
    else:
        raise ShapeError(f"basis_stack expects rank 1 or 4, got {u.dims}")

    flat = u.data.reshape(-1)
    vals = kernels.basis_stack(flat, fam, G)  # [N, K]
    if len(shp) == 4:
        out = (vals.reshape(B, C, H * W, K).transpose(0, 1, 3, 2)
               .reshape(out_shape))
    else:
        out = vals

    def bwd(g):
        g = np.ascontiguousarray(g)
        if len(shp) == 4:
            gk = np.ascontiguousarray(
                g.reshape(B, C, K, H * W).transpose(0, 1, 3, 2)
                .reshape(-1, K))
        else:
            gk = g
        du = kernels.basis_stack_grad_dot(flat, gk, fam, G)
        return (du.reshape(shp),)

    return _make(np.ascontiguousarray(out), (u,), bwd)


def _as3d(t: Tensor):
    B, C, H, W = t.shape
    return t.data.reshape(B, C, H * W), (B, C, H, W)


def spline_mix_2d(v: Tensor, w: Tensor, spec: SplineBasisSpec) -> Tensor:
    """Taped op: per-pixel coefficient mixing of the basis expansion.

    v is the (already squashed) activation tensor [B,C,H,W]; w holds K
    coefficients per spatial position [B,K,H,W], shared across channels.
    Output[b,c,p] = sum_k w[b,k,p] * Bk(v[b,c,p]).
    """
    fam, G = spec.family_code, spec.grid_size
    if v.data.ndim != 4 or w.data.ndim != 4:
        raise ShapeError("spline_mix_2d expects rank-4 tensors")
    if w.shape[0] != v.shape[0] or w.shape[2:] != v.shape[2:]:
        raise ShapeError(
            f"spline_mix_2d: coefficient dims {w.dims} do not match "
            f"activations {v.dims} on axes 0, 2, 3")
    if w.shape[1] != spec.coeff_count:
        raise ShapeError(
            f"spline_mix_2d: expected {spec.coeff_count} coefficients, "
            f"got {w.shape[1]} (axis 1)")
    v3, vshape = _as3d(v)
    w3, wshape = _as3d(w)
    out = kernels.mix2d_fwd(v3, w3, fam, G)

    def bwd(g):
        g3 = np.ascontiguousarray(g).reshape(v3.shape)
        gv, gw = kernels.mix2d_bwd(v3, w3, g3, fam, G,
                                   v.requires_grad, w.requires_grad)
        return (gv.reshape(vshape) if gv is not None else None,
                gw.reshape(wshape) if gw is not None else None)

    return _make(out.reshape(vshape), (v, w), bwd)


def spline_mix_1d(v: Tensor, w: Tensor, spec: SplineBasisSpec) -> Tensor:
    """Taped op: per-channel coefficient mixing of the basis expansion.

    v is the squashed activation tensor [B,C,H,W]; w holds K coefficients per
    (batch, channel) [B,C,K], broadcast over all spatial positions.
    Output[b,c,p] = sum_k w[b,c,k] * Bk(v[b,c,p]).
    """
    fam, G = spec.family_code, spec.grid_size
    if v.data.ndim != 4 or w.data.ndim != 3:
        raise ShapeError("spline_mix_1d expects v rank 4 and w rank 3")
    if w.shape[:2] != v.shape[:2]:
        raise ShapeError(
            f"spline_mix_1d: coefficient dims {w.dims} do not match "
            f"activations {v.dims} on axes 0, 1")
    if w.shape[2] != spec.coeff_count:
        raise ShapeError(
            f"spline_mix_1d: expected {spec.coeff_count} coefficients, "
            f"got {w.shape[2]} (axis 2)")
    v3, vshape = _as3d(v)
    w3 = w.data
    out = kernels.mix1d_fwd(v3, w3, fam, G)

    def bwd(g):
        g3 = np.ascontiguousarray(g).reshape(v3.shape)
        gv, gw = kernels.mix1d_bwd(v3, w3, g3, fam, G,
                                   v.requires_grad, w.requires_grad)
        return (gv.reshape(vshape) if gv is not None else None, gw)

    return _make(out.reshape(vshape), (v, w), bwd)
