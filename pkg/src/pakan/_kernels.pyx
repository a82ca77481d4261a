# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernels for spline basis evaluation and fused coefficient mixing.

Same contract as the pure-numpy module ``_kernels_np``; see its docstring for
the basis-family conventions.  These loops are the training hot path.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

CUBIC = 0
TRIANGULAR = 1

DEF MAXTAPS = 4


def n_coeffs(family, grid_size):
    return grid_size + 3 if family == CUBIC else grid_size


cdef inline double _inv_h(int family, int G) noexcept nogil:
    # reciprocal of the knot/center spacing; hoisted out of the hot loops
    return (G if family == 0 else G - 1) * 0.5


cdef inline int _taps(double v, int family, int G, double inv_h,
                      double* w, double* d, long* k0) noexcept nogil:
    """Fill active basis weights/derivatives at v; returns the tap count.

    Derivatives are zero where v falls outside [-1, 1] (clamp rule) and, for
    the triangular family, at exact center hits.
    """
    cdef double vc, pos, t, omt, t2, t3, live, rs, inv_rs
    cdef long s, smax
    cdef bint inside = (v >= -1.0) and (v <= 1.0)
    vc = v
    if vc < -1.0:
        vc = -1.0
    elif vc > 1.0:
        vc = 1.0
    pos = (vc + 1.0) * inv_h
    s = <long>pos
    if family == 0:  # cubic B-spline
        if s > G - 1:
            s = G - 1
        t = pos - s
        omt = 1.0 - t
        t2 = t * t
        t3 = t2 * t
        w[0] = omt * omt * omt * (1.0 / 6.0)
        w[1] = (3.0 * t3 - 6.0 * t2 + 4.0) * (1.0 / 6.0)
        w[2] = (-3.0 * t3 + 3.0 * t2 + 3.0 * t + 1.0) * (1.0 / 6.0)
        w[3] = t3 * (1.0 / 6.0)
        live = inv_h if inside else 0.0
        d[0] = -0.5 * omt * omt * live
        d[1] = (1.5 * t2 - 2.0 * t) * live
        d[2] = (-1.5 * t2 + t + 0.5) * live
        d[3] = 0.5 * t2 * live
        k0[0] = s
        return 4
    else:
        if s > G - 2:
            s = G - 2
        t = pos - s
        rs = (1.0 - t) + t
        inv_rs = 1.0 / rs
        w[0] = (1.0 - t) * inv_rs
        w[1] = t * inv_rs
        if inside and t != 0.0 and t != 1.0:
            live = inv_h * inv_rs
        else:
            live = 0.0
        d[0] = -live
        d[1] = live
        k0[0] = s
        return 2


def basis_stack(double[::1] u, int family, int G):
    """Evaluate all K basis functions at each entry of flat array u -> [N, K]."""
    cdef Py_ssize_t N = u.shape[0]
    cdef int K = G + 3 if family == CUBIC else G
    out_arr = np.zeros((N, K))
    cdef double[:, ::1] out = out_arr
    cdef double w[MAXTAPS]
    cdef double d[MAXTAPS]
    cdef double inv_h = _inv_h(family, G)
    cdef long k0
    cdef int nt, m
    cdef Py_ssize_t n
    with nogil:
        for n in range(N):
            nt = _taps(u[n], family, G, inv_h, w, d, &k0)
            for m in range(nt):
                out[n, k0 + m] = w[m]
    return out_arr


def basis_stack_grad_dot(double[::1] u, double[:, ::1] gstack, int family, int G):
    """Chain upstream gradients through the basis: du[n] = sum_k g[n,k]*Bk'(u_n)."""
    cdef Py_ssize_t N = u.shape[0]
    du_arr = np.zeros(N)
    cdef double[::1] du = du_arr
    cdef double w[MAXTAPS]
    cdef double d[MAXTAPS]
    cdef double inv_h = _inv_h(family, G)
    cdef long k0
    cdef int nt, m
    cdef double acc
    cdef Py_ssize_t n
    with nogil:
        for n in range(N):
            nt = _taps(u[n], family, G, inv_h, w, d, &k0)
            acc = 0.0
            for m in range(nt):
                acc += gstack[n, k0 + m] * d[m]
            du[n] = acc
    return du_arr


def mix2d_fwd(double[:, :, ::1] v, double[:, :, ::1] w2, int family, int G):
    """s[b,c,p] = sum_k w2[b,k,p] * Bk(v[b,c,p])."""
    cdef Py_ssize_t B = v.shape[0], C = v.shape[1], P = v.shape[2]
    out_arr = np.empty((B, C, P))
    cdef double[:, :, ::1] out = out_arr
    cdef double w[MAXTAPS]
    cdef double d[MAXTAPS]
    cdef double inv_h = _inv_h(family, G)
    cdef long k0
    cdef int nt, m
    cdef double acc
    cdef Py_ssize_t b, c, p
    with nogil:
        for b in range(B):
            for c in range(C):
                for p in range(P):
                    nt = _taps(v[b, c, p], family, G, inv_h, w, d, &k0)
                    acc = 0.0
                    for m in range(nt):
                        acc += w[m] * w2[b, k0 + m, p]
                    out[b, c, p] = acc
    return out_arr


def mix2d_bwd(double[:, :, ::1] v, double[:, :, ::1] w2, double[:, :, ::1] gs,
              int family, int G, bint need_gv=True, bint need_gw=True):
    """Gradients of mix2d_fwd w.r.t. v and w2 (either side skippable)."""
    cdef Py_ssize_t B = v.shape[0], C = v.shape[1], P = v.shape[2]
    cdef Py_ssize_t K = w2.shape[1]
    gv_arr = np.empty((B, C, P))
    gw_arr = np.zeros((B, K, P))
    cdef double[:, :, ::1] gv = gv_arr
    cdef double[:, :, ::1] gw = gw_arr
    cdef double w[MAXTAPS]
    cdef double d[MAXTAPS]
    cdef double inv_h = _inv_h(family, G)
    cdef long k0
    cdef int nt, m
    cdef double acc, g
    cdef Py_ssize_t b, c, p
    with nogil:
        for b in range(B):
            for c in range(C):
                for p in range(P):
                    nt = _taps(v[b, c, p], family, G, inv_h, w, d, &k0)
                    g = gs[b, c, p]
                    acc = 0.0
                    for m in range(nt):
                        if need_gv:
                            acc += d[m] * w2[b, k0 + m, p]
                        if need_gw:
                            gw[b, k0 + m, p] += g * w[m]
                    gv[b, c, p] = g * acc
    return (gv_arr if need_gv else None), (gw_arr if need_gw else None)


def mix1d_fwd(double[:, :, ::1] v, double[:, :, ::1] w1, int family, int G):
    """s[b,c,p] = sum_k w1[b,c,k] * Bk(v[b,c,p])."""
    cdef Py_ssize_t B = v.shape[0], C = v.shape[1], P = v.shape[2]
    out_arr = np.empty((B, C, P))
    cdef double[:, :, ::1] out = out_arr
    cdef double w[MAXTAPS]
    cdef double d[MAXTAPS]
    cdef double inv_h = _inv_h(family, G)
    cdef long k0
    cdef int nt, m
    cdef double acc
    cdef Py_ssize_t b, c, p
    with nogil:
        for b in range(B):
            for c in range(C):
                for p in range(P):
                    nt = _taps(v[b, c, p], family, G, inv_h, w, d, &k0)
                    acc = 0.0
                    for m in range(nt):
                        acc += w[m] * w1[b, c, k0 + m]
                    out[b, c, p] = acc
    return out_arr


def mix1d_bwd(double[:, :, ::1] v, double[:, :, ::1] w1, double[:, :, ::1] gs,
              int family, int G, bint need_gv=True, bint need_gw=True):
    """Gradients of mix1d_fwd w.r.t. v and w1 (either side skippable)."""
    cdef Py_ssize_t B = v.shape[0], C = v.shape[1], P = v.shape[2]
    cdef Py_ssize_t K = w1.shape[2]
    gv_arr = np.empty((B, C, P))
    gw_arr = np.zeros((B, C, K))
    cdef double[:, :, ::1] gv = gv_arr
    cdef double[:, :, ::1] gw = gw_arr
    cdef double w[MAXTAPS]
    cdef double d[MAXTAPS]
    cdef double inv_h = _inv_h(family, G)
    cdef long k0
    cdef int nt, m
    cdef double acc, g
    cdef Py_ssize_t b, c, p
    with nogil:
        for b in range(B):
            for c in range(C):
                for p in range(P):
                    nt = _taps(v[b, c, p], family, G, inv_h, w, d, &k0)
                    g = gs[b, c, p]
                    acc = 0.0
                    for m in range(nt):
                        if need_gv:
                            acc += d[m] * w1[b, c, k0 + m]
                        if need_gw:
                            gw[b, c, k0 + m] += g * w[m]
                    gv[b, c, p] = g * acc
    return (gv_arr if need_gv else None), (gw_arr if need_gw else None)


def conv2d_fwd(double[:, :, :, ::1] xp, double[:, :, :, ::1] k,
               Py_ssize_t Ho, Py_ssize_t Wo):
    """Direct convolution over a pre-padded input [B,Cin,Hp,Wp]."""
    cdef Py_ssize_t B = xp.shape[0], Cin = xp.shape[1]
    cdef Py_ssize_t Cout = k.shape[0], kh = k.shape[2], kw = k.shape[3]
    out_arr = np.empty((B, Cout, Ho, Wo))
    cdef double[:, :, :, ::1] out = out_arr
    cdef double kv, k0, k1, k2
    cdef double *po
    cdef const double *px
    cdef Py_ssize_t b, co, ci, a, dd, i, j
    if kh == 3 and kw == 3:
        # fused row pass: each loaded input element feeds all three taps
        with nogil:
            for b in range(B):
                for co in range(Cout):
                    for ci in range(Cin):
                        for a in range(3):
                            k0 = k[co, ci, a, 0]
                            k1 = k[co, ci, a, 1]
                            k2 = k[co, ci, a, 2]
                            if ci == 0 and a == 0:
                                for i in range(Ho):
                                    po = &out[b, co, i, 0]
                                    px = &xp[b, ci, i + a, 0]
                                    for j in range(Wo):
                                        po[j] = (k0 * px[j] + k1 * px[j + 1]
                                                 + k2 * px[j + 2])
                            else:
                                for i in range(Ho):
                                    po = &out[b, co, i, 0]
                                    px = &xp[b, ci, i + a, 0]
                                    for j in range(Wo):
                                        po[j] += (k0 * px[j] + k1 * px[j + 1]
                                                  + k2 * px[j + 2])
        return out_arr
    with nogil:
        for b in range(B):
            for co in range(Cout):
                for ci in range(Cin):
                    for a in range(kh):
                        for dd in range(kw):
                            kv = k[co, ci, a, dd]
                            if ci == 0 and a == 0 and dd == 0:
                                for i in range(Ho):
                                    po = &out[b, co, i, 0]
                                    px = &xp[b, ci, i + a, dd]
                                    for j in range(Wo):
                                        po[j] = kv * px[j]
                            else:
                                for i in range(Ho):
                                    po = &out[b, co, i, 0]
                                    px = &xp[b, ci, i + a, dd]
                                    for j in range(Wo):
                                        po[j] += kv * px[j]
    return out_arr


def conv2d_bwd_k(double[:, :, :, ::1] xp, double[:, :, :, ::1] g,
                 Py_ssize_t kh, Py_ssize_t kw):
    """Kernel gradient: correlate upstream gradient with the padded input."""
    cdef Py_ssize_t B = xp.shape[0], Cin = xp.shape[1]
    cdef Py_ssize_t Cout = g.shape[1], Ho = g.shape[2], Wo = g.shape[3]
    dk_arr = np.zeros((Cout, Cin, kh, kw))
    cdef double[:, :, :, ::1] dk = dk_arr
    cdef double acc, a0, a1, a2
    cdef const double *pg
    cdef const double *px
    cdef Py_ssize_t b, co, ci, a, dd, i, j
    if kh == 3 and kw == 3:
        with nogil:
            for b in range(B):
                for co in range(Cout):
                    for ci in range(Cin):
                        for a in range(3):
                            a0 = 0.0
                            a1 = 0.0
                            a2 = 0.0
                            for i in range(Ho):
                                pg = &g[b, co, i, 0]
                                px = &xp[b, ci, i + a, 0]
                                for j in range(Wo):
                                    a0 += pg[j] * px[j]
                                    a1 += pg[j] * px[j + 1]
                                    a2 += pg[j] * px[j + 2]
                            dk[co, ci, a, 0] += a0
                            dk[co, ci, a, 1] += a1
                            dk[co, ci, a, 2] += a2
        return dk_arr
    with nogil:
        for b in range(B):
            for co in range(Cout):
                for ci in range(Cin):
                    for a in range(kh):
                        for dd in range(kw):
                            acc = 0.0
                            for i in range(Ho):
                                pg = &g[b, co, i, 0]
                                px = &xp[b, ci, i + a, dd]
                                for j in range(Wo):
                                    acc += pg[j] * px[j]
                            dk[co, ci, a, dd] += acc
    return dk_arr


def conv2d_bwd_x(double[:, :, :, ::1] k, double[:, :, :, ::1] g,
                 Py_ssize_t Hp, Py_ssize_t Wp):
    """Input gradient, returned in padded coordinates [B,Cin,Hp,Wp]."""
    cdef Py_ssize_t B = g.shape[0], Cout = g.shape[1]
    cdef Py_ssize_t Ho = g.shape[2], Wo = g.shape[3]
    cdef Py_ssize_t Cin = k.shape[1], kh = k.shape[2], kw = k.shape[3]
    dxp_arr = np.zeros((B, Cin, Hp, Wp))
    cdef double[:, :, :, ::1] dxp = dxp_arr
    cdef double kv, k0, k1, k2
    cdef double *pd
    cdef const double *pg
    cdef Py_ssize_t b, co, ci, a, dd, i, j
    if kh == 3 and kw == 3:
        # gather form (correlation with the flipped kernel row): one store
        # per element keeps the inner loop vectorizable
        with nogil:
            for b in range(B):
                for ci in range(Cin):
                    for co in range(Cout):
                        for a in range(3):
                            k0 = k[co, ci, a, 0]
                            k1 = k[co, ci, a, 1]
                            k2 = k[co, ci, a, 2]
                            for i in range(Ho):
                                pd = &dxp[b, ci, i + a, 0]
                                pg = &g[b, co, i, 0]
                                pd[0] += k0 * pg[0]
                                pd[1] += k0 * pg[1] + k1 * pg[0]
                                for j in range(2, Wo):
                                    pd[j] += (k0 * pg[j] + k1 * pg[j - 1]
                                              + k2 * pg[j - 2])
                                pd[Wo] += k1 * pg[Wo - 1] + k2 * pg[Wo - 2]
                                pd[Wo + 1] += k2 * pg[Wo - 1]
        return dxp_arr
    with nogil:
        for b in range(B):
            for ci in range(Cin):
                for co in range(Cout):
                    for a in range(kh):
                        for dd in range(kw):
                            kv = k[co, ci, a, dd]
                            for i in range(Ho):
                                pd = &dxp[b, ci, i + a, dd]
                                pg = &g[b, co, i, 0]
                                for j in range(Wo):
                                    pd[j] += kv * pg[j]
    return dxp_arr


def tanh_bwd(double[::1] g, double[::1] y):
    """Single-pass g * (1 - y*y) for flat arrays."""
    cdef Py_ssize_t n = g.shape[0]
    out_arr = np.empty(n)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            out[i] = g[i] * (1.0 - y[i] * y[i])
    return out_arr
