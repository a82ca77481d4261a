"""Central finite-difference verification of every analytic gradient.

Each check projects the op output onto a fixed random direction to get a
scalar, computes analytic gradients via the tape, then compares against
(f(x+eps) - f(x-eps)) / (2 eps) elementwise over every leaf entry.  The
relative error uses max(|analytic|, |numeric|, 1e-8) as denominator.  Inputs
are drawn within |x| <= 2 and nudged away from the isolated kinks of relu,
|.|, the triangular basis, and the clamp boundary, where one-sided
derivatives would make the comparison meaningless.

Resolution bound: a central difference of a float64 scalar of magnitude |f|
cannot resolve derivatives below about |f| * 2^-52 / (2 eps) (rounding of the
two evaluations).  In deep composites some true gradients sit under that
floor (e.g. cubic-spline tail cells), so elementwise comparisons where both
sides are smaller than the bound scaled by the tolerance are skipped; those
entries are still covered by a per-tensor directional-derivative comparison,
whose aggregate magnitude is well above the floor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensorgraph as tg
from .blocks import Pakan1to1Block, Pakan2to1Block, pakan_1to1, pakan_2to1
from .kan import (AdaptiveKanOperator, KanLayerConfig, StaticKanWeights,
                  static_kan_forward)
from .network import NetworkConfig, build_network, l1_loss
from .splines import SplineBasisSpec, basis_stack, spline_mix_1d, spline_mix_2d
from .tensorgraph import ParamStore, Tensor, backward, no_grad

EPS = 1e-5
TOL = 1e-4


def rel_err(a: float, n: float) -> float:
    return abs(a - n) / max(abs(a), abs(n), 1e-8)


def fd_check(leaves, forward_fn, seed: int = 0, eps: float = EPS,
             richardson: bool = False) -> float:
    """Max relative error between taped and finite-difference gradients.

    ``leaves`` maps names to Tensors with requires_grad=True; ``forward_fn``
    re-runs the op on their current data.  Elementwise comparisons under the
    FD resolution bound are skipped (see module docstring); each leaf tensor
    additionally gets a directional-derivative comparison along a fixed
    random unit direction.

    ``richardson=True`` extrapolates two central differences (eps, eps/2) to
    cancel the O(eps^2) truncation term; used with a larger eps for deep
    composites, where it lowers the roundoff floor without losing accuracy.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xFD]))
    with no_grad():
        probe = forward_fn()
    R = rng.standard_normal(probe.data.shape)
    proj = Tensor(R)

    def scalar() -> float:
        with no_grad():
            out = forward_fn()
        return float((out.data * R).sum())

    def central(bump, step) -> float:
        bump(step)
        f_hi = scalar()
        bump(-2.0 * step)
        f_lo = scalar()
        bump(step)
        d = (f_hi - f_lo) / (2.0 * step)
        if not richardson:
            return d
        bump(0.5 * step)
        f_hi = scalar()
        bump(-step)
        f_lo = scalar()
        bump(0.5 * step)
        return (4.0 * (f_hi - f_lo) / step - d) / 3.0

    f0 = scalar()
    # derivatives under this bound are not resolvable by the FD reference
    # (25x headroom over the single-ulp bound: rounding accumulates through
    # the forward pass, so realized noise can exceed one ulp severalfold)
    floor = 25.0 * max(1.0, abs(f0)) * 2.0 ** -52 / eps / TOL

    for t in leaves.values():
        t.zero_grad()
    loss = tg.sum_all(tg.mul(forward_fn(), proj))
    backward(loss)

    worst = 0.0
    for t in leaves.values():
        flat = t.data.reshape(-1)
        gflat = t.grad.reshape(-1)
        for i in range(flat.size):
            def bump(step, i=i, flat=flat):
                flat[i] += step

            num = central(bump, eps)
            if max(abs(gflat[i]), abs(num)) < floor:
                continue
            worst = max(worst, rel_err(gflat[i], num))
        # directional derivative along a unit vector: an aggregate that sits
        # well above the resolution floor even when single entries do not
        u = rng.standard_normal(t.data.shape)
        u /= np.linalg.norm(u.reshape(-1))
        a_dir = float((t.grad * u).sum())

        def bump_dir(step, t=t, u=u):
            t.data += step * u

        n_dir = central(bump_dir, eps)
        if max(abs(a_dir), abs(n_dir)) >= floor:
            worst = max(worst, rel_err(a_dir, n_dir))
    return worst


def _leaf(rng, shape, lo=-2.0, hi=2.0, avoid_zero=0.0):
    data = rng.uniform(lo, hi, shape)
    if avoid_zero:
        data = np.where(np.abs(data) < avoid_zero,
                        np.sign(data) * avoid_zero + (data == 0) * avoid_zero,
                        data)
    return Tensor(data, requires_grad=True)


def _safe_spline_arg(rng, shape, spec: SplineBasisSpec, margin=5e-3):
    """Arguments in (-1, 1) kept away from basis knots/kinks and the boundary."""
    G = spec.grid_size
    cells = G if spec.family == "cubic_bspline" else G - 1
    data = rng.uniform(-1.0 + margin, 1.0 - margin, shape)
    pos = (data + 1.0) * cells / 2.0
    near = np.abs(pos - np.rint(pos)) < margin
    data[near] += 2 * margin
    return data


@dataclass
class CheckResult:
    name: str
    max_err: float

    @property
    def passed(self) -> bool:
        return self.max_err < TOL


def _check_conv(seed):
    rng = np.random.default_rng(seed)
    x = _leaf(rng, (1, 2, 5, 5))
    k = _leaf(rng, (3, 2, 3, 3))
    b = _leaf(rng, (3,))
    return fd_check({"x": x, "k": k, "b": b},
                    lambda: tg.conv2d(x, k, b, padding=1), seed)


def _check_conv1x1(seed):
    rng = np.random.default_rng(seed)
    x = _leaf(rng, (2, 3, 4, 4))
    k = _leaf(rng, (2, 3, 1, 1))
    b = _leaf(rng, (2,))
    return fd_check({"x": x, "k": k, "b": b},
                    lambda: tg.conv2d(x, k, b), seed)


def _check_elementwise(seed):
    rng = np.random.default_rng(seed)
    x = _leaf(rng, (1, 3, 4, 4), avoid_zero=1e-2)
    y = _leaf(rng, (1, 3, 1, 1))

    def fwd():
        z = tg.mul(x, y)
        z = tg.add(z, tg.relu(x))
        z = tg.sub(tg.sigmoid(z), tg.tanh(x))
        return z

    return fd_check({"x": x, "y": y}, fwd, seed)


def _check_concat_slice(seed):
    rng = np.random.default_rng(seed)
    x = _leaf(rng, (1, 2, 3, 3))
    y = _leaf(rng, (1, 3, 3, 3))
    return fd_check({"x": x, "y": y},
                    lambda: tg.slice_channels(tg.concat_channels(x, y), 1, 4),
                    seed)


def _check_pool(seed):
    rng = np.random.default_rng(seed)
    x = _leaf(rng, (2, 3, 4, 4))
    return fd_check({"x": x}, lambda: tg.global_avg_pool(x), seed)


def _check_mean_axis(seed):
    rng = np.random.default_rng(seed)
    x = _leaf(rng, (2, 4, 3, 3))
    return fd_check({"x": x}, lambda: tg.mean_axis(x, axis=1), seed)


def _check_resample_up(seed):
    rng = np.random.default_rng(seed)
    x = _leaf(rng, (1, 2, 3, 3))
    return fd_check({"x": x}, lambda: tg.resample(x, "bilinear_up", 2), seed)


def _check_resample_down(seed):
    rng = np.random.default_rng(seed)
    x = _leaf(rng, (1, 2, 4, 4))
    return fd_check({"x": x}, lambda: tg.resample(x, "box_down", 2), seed)


def _check_l1(seed):
    rng = np.random.default_rng(seed)
    x = _leaf(rng, (1, 2, 3, 3))
    y = Tensor(rng.uniform(3.0, 4.0, (1, 2, 3, 3)))  # keep |x - y| off zero
    return fd_check({"x": x}, lambda: l1_loss(x, y), seed)


def _check_basis_stack(family):
    def run(seed):
        rng = np.random.default_rng(seed)
        spec = SplineBasisSpec(family, 5)
        u = Tensor(_safe_spline_arg(rng, (1, 2, 3, 3), spec),
                   requires_grad=True)
        return fd_check({"u": u}, lambda: basis_stack(u, spec), seed)

    return run


def _check_mix(kind, family):
    def run(seed):
        rng = np.random.default_rng(seed)
        spec = SplineBasisSpec(family, 5)
        K = spec.coeff_count
        v = Tensor(_safe_spline_arg(rng, (2, 3, 4, 4), spec),
                   requires_grad=True)
        if kind == "2d":
            w = _leaf(rng, (2, K, 4, 4), lo=0.05, hi=0.95)
            fwd = lambda: spline_mix_2d(v, w, spec)
        else:
            w = _leaf(rng, (2, 3, K), lo=0.05, hi=0.95)
            fwd = lambda: spline_mix_1d(v, w, spec)
        return fd_check({"v": v, "w": w}, fwd, seed)

    return run


def _check_static_kan(seed):
    rng = np.random.default_rng(seed)
    cfg = KanLayerConfig(2, 2, SplineBasisSpec("cubic_bspline", 5))
    store = ParamStore()
    weights = StaticKanWeights(store, "static", cfg, rng)
    u = _leaf(rng, (1, 2, 4, 4))
    leaves = {"u": u, "w": weights.w}
    return fd_check(leaves, lambda: static_kan_forward(u, weights, cfg), seed)


def _check_adaptive(kind):
    def run(seed):
        rng = np.random.default_rng(seed)
        cfg = KanLayerConfig(2, 2, SplineBasisSpec("cubic_bspline", 5))
        store = ParamStore()
        op = AdaptiveKanOperator(store, "op", cfg, kind, rng)
        # move the generator off its zero init so its gradients are generic
        for name, p in store.items():
            if ".gen." in name:
                p.data[:] = rng.uniform(-0.5, 0.5, p.data.shape)
        F = _leaf(rng, (1, 2, 4, 4))
        leaves = {"F": F}
        leaves.update(store.items())
        return fd_check(leaves, lambda: op.forward(F), seed)

    return run


def _check_block(which):
    def run(seed):
        rng = np.random.default_rng(seed)
        basis = SplineBasisSpec("cubic_bspline", 5)
        store = ParamStore()
        if which == "1to1":
            blk = Pakan1to1Block(store, "blk", 2, basis, rng)
        else:
            blk = Pakan2to1Block(store, "blk", 2, basis, rng)
        for name, p in store.items():
            if ".gen." in name:
                p.data[:] = rng.uniform(-0.5, 0.5, p.data.shape)
        x = _leaf(rng, (1, 2, 4, 4))
        leaves = {"x": x}
        leaves.update(store.items())
        if which == "1to1":
            return fd_check(leaves, lambda: pakan_1to1(x, blk), seed)
        y = _leaf(rng, (1, 2, 4, 4))
        leaves["y"] = y
        return fd_check(leaves, lambda: pakan_2to1(x, y, blk), seed)

    return run


def _check_network(seed, **flags):
    rng = np.random.default_rng(seed)
    cfg = NetworkConfig(bands=2, feature_width=4, depth=1, seed=seed, **flags)
    net = build_network(cfg)
    # generic parameter values: the zero head and zero generators would
    # otherwise leave most upstream gradients identically zero
    for name, p in net.params.items():
        p.data[:] = rng.uniform(-0.4, 0.4, p.data.shape)
    ms = Tensor(rng.uniform(0, 1, (1, 2, 4, 4)))
    pan = Tensor(rng.uniform(0, 1, (1, 1, 16, 16)))
    leaves = dict(net.params.trainable_items())
    # deep composite: larger step + Richardson keeps FD noise under control
    return fd_check(leaves, lambda: net.forward(ms, pan), seed,
                    eps=1e-3, richardson=True)


SUITE = [
    ("conv2d_3x3", _check_conv),
    ("conv2d_1x1", _check_conv1x1),
    ("elementwise_chain", _check_elementwise),
    ("concat_slice_channels", _check_concat_slice),
    ("global_avg_pool", _check_pool),
    ("mean_axis", _check_mean_axis),
    ("resample_bilinear_up", _check_resample_up),
    ("resample_box_down", _check_resample_down),
    ("l1_loss", _check_l1),
    ("basis_stack_cubic", _check_basis_stack("cubic_bspline")),
    ("basis_stack_triangular", _check_basis_stack("triangular")),
    ("spline_mix_2d_cubic", _check_mix("2d", "cubic_bspline")),
    ("spline_mix_1d_cubic", _check_mix("1d", "cubic_bspline")),
    ("spline_mix_2d_triangular", _check_mix("2d", "triangular")),
    ("spline_mix_1d_triangular", _check_mix("1d", "triangular")),
    ("static_kan", _check_static_kan),
    ("adaptive_kan_2d", _check_adaptive("2d")),
    ("adaptive_kan_1d", _check_adaptive("1d")),
    ("pakan_1to1", _check_block("1to1")),
    ("pakan_2to1", _check_block("2to1")),
    ("network_micro", _check_network),
]


def run_suite(seed: int = 0, names=None):
    """Run all checks (or a named subset); returns CheckResult list."""
    results = []
    for name, fn in SUITE:
        if names is not None and name not in names:
            continue
        results.append(CheckResult(name, fn(seed)))
    return results
