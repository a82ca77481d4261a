"""Pure-numpy kernels for spline basis evaluation and fused coefficient mixing.

Drop-in fallback for the compiled extension (see ``_kernels.pyx``); the
``backend`` module picks one implementation at import time.  All functions
take/return C-contiguous float64 arrays.

Basis families (over the fixed range [-1, 1], arguments clamped to it):
  family 0: uniform cubic B-spline, G grid intervals, K = G + 3 functions,
            4 active per point.
  family 1: normalized triangular (hat) basis, K = G centers with half-width
            equal to the center spacing, 2 active per point; raw hat values
            are divided by their sum at each point.
"""

import numpy as np

CUBIC = 0
TRIANGULAR = 1


def n_coeffs(family, grid_size):
    return grid_size + 3 if family == CUBIC else grid_size


def _cubic_active(v, G):
    """Active-tap decomposition for the cubic family.

    Returns (first tap index [..], 4 weight arrays, 4 weight-derivative
    arrays, in-range mask).  Derivatives are zero where v is clamped.
    """
    inside = (v >= -1.0) & (v <= 1.0)
    vc = np.clip(v, -1.0, 1.0)
    h = 2.0 / G
    pos = (vc + 1.0) / h
    s = pos.astype(np.int64)
    np.clip(s, 0, G - 1, out=s)
    t = pos - s
    omt = 1.0 - t
    t2 = t * t
    t3 = t2 * t
    w0 = omt * omt * omt * (1.0 / 6.0)
    w1 = (3.0 * t3 - 6.0 * t2 + 4.0) * (1.0 / 6.0)
    w2 = (-3.0 * t3 + 3.0 * t2 + 3.0 * t + 1.0) * (1.0 / 6.0)
    w3 = t3 * (1.0 / 6.0)
    live = inside / h  # 0 where clamped, 1/h elsewhere
    d0 = -0.5 * omt * omt * live
    d1 = (1.5 * t2 - 2.0 * t) * live
    d2 = (-1.5 * t2 + t + 0.5) * live
    d3 = 0.5 * t2 * live
    return s, (w0, w1, w2, w3), (d0, d1, d2, d3)


def _tri_active(v, G):
    """Active-tap decomposition for the triangular family (2 taps)."""
    inside = (v >= -1.0) & (v <= 1.0)
    vc = np.clip(v, -1.0, 1.0)
    h = 2.0 / (G - 1)
    pos = (vc + 1.0) / h
    s = pos.astype(np.int64)
    np.clip(s, 0, G - 2, out=s)
    t = pos - s
    raw_sum = (1.0 - t) + t
    w0 = (1.0 - t) / raw_sum
    w1 = t / raw_sum
    # Exact center hits (t == 0 or 1) take derivative 0: the hat peak is a
    # symmetric kink and the neighboring hat sits at the edge of its support.
    live = (inside & (t != 0.0) & (t != 1.0)) / (h * raw_sum)
    d0 = -live
    d1 = live
    return s, (w0, w1), (d0, d1)


def _active(v, family, G):
    if family == CUBIC:
        return _cubic_active(v, G)
    return _tri_active(v, G)


def basis_stack(u, family, G):
    """Evaluate all K basis functions at each entry of flat array u -> [N, K]."""
    s, ws, _ = _active(u, family, G)
    N = u.shape[0]
    K = n_coeffs(family, G)
    out = np.zeros((N, K))
    rows = np.arange(N)
    for m, wm in enumerate(ws):
        out[rows, s + m] = wm
    return out

def basis_stack_grad_dot(u, gstack, family, G):
    """Chain upstream gradients through the basis: du[n] = sum_k g[n,k]*Bk'(u_n)."""
    s, _, ds = _active(u, family, G)
    rows = np.arange(u.shape[0])
    du = np.zeros_like(u)
    for m, dm in enumerate(ds):
        du += gstack[rows, s + m] * dm
    return du

def mix2d_fwd(v, w, family, G):
    """s[b,c,p] = sum_k w[b,k,p] * Bk(v[b,c,p]) for v in [B,C,P], w in [B,K,P]."""
    Bn, C, P = v.shape
    s, ws, _ = _active(v, family, G)
    bI = np.arange(Bn)[:, None, None]
    pI = np.arange(P)[None, None, :]
    out = np.zeros_like(v)
    for m, wm in enumerate(ws):
        out += wm * w[bI, s + m, pI]
    return out


def mix2d_bwd(v, w, gs, family, G, need_gv=True, need_gw=True):
    """Gradients of mix2d_fwd w.r.t. v and w (either side skippable)."""
    Bn, C, P = v.shape
    K = w.shape[1]
    s, ws, ds = _active(v, family, G)
    bI = np.arange(Bn)[:, None, None]
    pI = np.arange(P)[None, None, :]
    gv = np.zeros_like(v) if need_gv else None
    gw_flat = np.zeros(Bn * K * P) if need_gw else None
    for wm, dm, m in zip(ws, ds, range(len(ws))):
        tap = s + m
        if need_gv:
            gv += gs * dm * w[bI, tap, pI]
        if need_gw:
            flat = ((bI * K + tap) * P + pI).ravel()
            gw_flat += np.bincount(flat, weights=(gs * wm).ravel(),
                                   minlength=Bn * K * P)
    return gv, (gw_flat.reshape(Bn, K, P) if need_gw else None)


def mix1d_fwd(v, w, family, G):
    """s[b,c,p] = sum_k w[b,c,k] * Bk(v[b,c,p]) for v in [B,C,P], w in [B,C,K]."""
    Bn, C, P = v.shape
    s, ws, _ = _active(v, family, G)
    bI = np.arange(Bn)[:, None, None]
    cI = np.arange(C)[None, :, None]
    out = np.zeros_like(v)
    for m, wm in enumerate(ws):
        out += wm * w[bI, cI, s + m]
    return out


def mix1d_bwd(v, w, gs, family, G, need_gv=True, need_gw=True):
    """Gradients of mix1d_fwd w.r.t. v and w (either side skippable)."""
    Bn, C, P = v.shape
    K = w.shape[2]
    s, ws, ds = _active(v, family, G)
    bI = np.arange(Bn)[:, None, None]
    cI = np.arange(C)[None, :, None]
    gv = np.zeros_like(v) if need_gv else None
    gw_flat = np.zeros(Bn * C * K) if need_gw else None
    for wm, dm, m in zip(ws, ds, range(len(ws))):
        tap = s + m
        if need_gv:
            gv += gs * dm * w[bI, cI, tap]
        if need_gw:
            flat = ((bI * C + cI) * K + tap).ravel()
            gw_flat += np.bincount(flat, weights=(gs * wm).ravel(),
                                   minlength=Bn * C * K)
    return gv, (gw_flat.reshape(Bn, C, K) if need_gw else None)


def _acc_gemm(k2, src, acc, off, scratch):
    # acc[:, :N-off] += k2 @ src[:, off:]
    if off == 0:
        np.matmul(k2, src, out=scratch)
        acc += scratch
    else:
        np.matmul(k2, src[:, off:], out=scratch[:, :-off])
        acc[:, :-off] += scratch[:, :-off]


def conv2d_fwd(xp, k, Ho, Wo):
    """Convolution over a pre-padded input via one GEMM per kernel offset.

    Uses a channels-leading flat view [C, B*Hp*Wp]; offsets whose windows
    wrap across rows or batch items only pollute positions that the final
    crop discards.
    """
    B, Cin, Hp, Wp = xp.shape
    Cout, _, kh, kw = k.shape
    xcb = np.ascontiguousarray(xp.transpose(1, 0, 2, 3)).reshape(Cin, B * Hp * Wp)
    wide = np.zeros((Cout, B * Hp * Wp))
    scratch = np.empty_like(wide)
    for a in range(kh):
        for d in range(kw):
            _acc_gemm(k[:, :, a, d], xcb, wide, a * Wp + d, scratch)
    return np.ascontiguousarray(
        wide.reshape(Cout, B, Hp, Wp)[:, :, :Ho, :Wo].transpose(1, 0, 2, 3))


def conv2d_bwd_k(xp, g, kh, kw):
    """Kernel gradient: correlate the upstream gradient with the padded input."""
    B, Cin, Hp, Wp = xp.shape
    Cout, Ho, Wo = g.shape[1], g.shape[2], g.shape[3]
    xcb = np.ascontiguousarray(xp.transpose(1, 0, 2, 3)).reshape(Cin, B * Hp * Wp)
    gwide = np.zeros((Cout, B, Hp, Wp))
    gwide[:, :, :Ho, :Wo] = g.transpose(1, 0, 2, 3)
    gcb = gwide.reshape(Cout, B * Hp * Wp)
    dk = np.empty((Cout, Cin, kh, kw))
    for a in range(kh):
        for d in range(kw):
            off = a * Wp + d
            if off == 0:
                np.matmul(gcb, xcb.T, out=dk[:, :, a, d])
            else:
                np.matmul(gcb[:, :-off], xcb[:, off:].T, out=dk[:, :, a, d])
    return dk


def conv2d_bwd_x(k, g, Hp, Wp):
    """Input gradient in padded coordinates [B,Cin,Hp,Wp]."""
    B, Cout, Ho, Wo = g.shape
    Cin, kh, kw = k.shape[1], k.shape[2], k.shape[3]
    gwide = np.zeros((Cout, B, Hp, Wp))
    gwide[:, :, :Ho, :Wo] = g.transpose(1, 0, 2, 3)
    gcb = gwide.reshape(Cout, B * Hp * Wp)
    gxp = np.zeros((Cin, B * Hp * Wp))
    scratch = np.empty_like(gxp)
    kt = np.ascontiguousarray(k.transpose(1, 0, 2, 3))
    for a in range(kh):
        for d in range(kw):
            off = a * Wp + d
            if off == 0:
                np.matmul(kt[:, :, a, d], gcb, out=scratch)
                gxp += scratch
            else:
                np.matmul(kt[:, :, a, d], gcb[:, :-off], out=scratch[:, off:])
                gxp[:, off:] += scratch[:, off:]
    return np.ascontiguousarray(
        gxp.reshape(Cin, B, Hp, Wp).transpose(1, 0, 2, 3))


def tanh_bwd(g, y):
    """g * (1 - y*y) with minimal temporaries."""
    out = np.multiply(y, y)
    np.subtract(1.0, out, out=out)
    out *= g
    return out
