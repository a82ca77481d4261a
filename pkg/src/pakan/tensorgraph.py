"""Dense tensors with taped, analytically differentiated primitive ops.

Everything higher in the package (spline layers, fusion blocks, the
pansharpening network) is composed from the primitives here.  Each op records
its parents and a closure that maps the upstream gradient to parent
gradients, so ``backward`` on a scalar loss fills the gradient buffers of all
reachable leaf parameters.  Training math is float64 throughout; gradients of
every primitive are checked against central finite differences in the test
suite and by the ``gradcheck`` CLI subcommand.

Shape convention: up to 4 axes in the order (batch, channel, height, width).
"""

from __future__ import annotations

import threading
from functools import lru_cache

import numpy as np

from .backend import kernels
from .errors import ContractError, ShapeError

DTYPE = np.float64

_state = threading.local()


def _grad_enabled() -> bool:
    return getattr(_state, "grad_enabled", True)


class no_grad:
    """Context manager that disables tape recording (for evaluation)."""

    def __enter__(self):
        self._saved = _grad_enabled()
        _state.grad_enabled = False

    def __exit__(self, *exc):
        _state.grad_enabled = self._saved
        return False


class Tensor:
    """A dense float array plus autodiff bookkeeping.

    ``data`` is always a C-contiguous float64 ndarray with at most 4 axes.
    ``grad`` is a persistent accumulation buffer allocated for leaf tensors
    registered as parameters (see ``ParamStore``); intermediate gradients are
    transient.
    """

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_bwd",
                 "_grad_fresh")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=DTYPE)
        if not arr.flags["C_CONTIGUOUS"]:
            # note: ascontiguousarray would promote 0-dim scalars to rank 1
            arr = np.ascontiguousarray(arr)
        if arr.ndim > 4:
            raise ShapeError(f"tensors are rank <= 4, got shape {arr.shape}")
        self.data = arr
        self.requires_grad = requires_grad
        self.grad = None
        self._parents = ()
        self._bwd = None
        self._grad_fresh = False

    @property
    def dims(self):
        return list(self.data.shape)

    @property
    def shape(self):
        return self.data.shape

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy(), requires_grad=False)

    def alloc_grad(self):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)

    def zero_grad(self):
        self.alloc_grad()
        self.grad.fill(0.0)
        self._grad_fresh = False

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return mul(self, other)
        return scale(self, float(other))

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)


def tensor(data, requires_grad: bool = False) -> Tensor:
    return Tensor(data, requires_grad=requires_grad)


def _make(data, parents, bwd) -> Tensor:
    """Wrap op output; records the tape edge only when grads are live."""
    out = Tensor(data)
    if _grad_enabled() and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._bwd = bwd
    return out


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Sum-reduce g over axes that were broadcast relative to ``shape``."""
    if g.shape == tuple(shape):
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# elementwise ops

def _binary(x: Tensor, y: Tensor, fwd, bwd_x, bwd_y, opname: str) -> Tensor:
    try:
        data = fwd(x.data, y.data)
    except ValueError:
        raise ShapeError(
            f"{opname}: dims {x.dims} and {y.dims} are not broadcastable "
            "(each axis must match or be 1)") from None

    def bwd(g):
        gx = _unbroadcast(bwd_x(g), x.shape) if x.requires_grad else None
        gy = _unbroadcast(bwd_y(g), y.shape) if y.requires_grad else None
        return gx, gy

    return _make(data, (x, y), bwd)


def add(x: Tensor, y: Tensor) -> Tensor:
    return _binary(x, y, np.add, lambda g: g, lambda g: g, "add")


def sub(x: Tensor, y: Tensor) -> Tensor:
    return _binary(x, y, np.subtract, lambda g: g, lambda g: -g, "sub")


def mul(x: Tensor, y: Tensor) -> Tensor:
    return _binary(x, y, np.multiply,
                   lambda g: g * y.data, lambda g: g * x.data, "mul")


_SIG_LO = np.nextafter(0.0, 1.0)
_SIG_HI = np.nextafter(1.0, 0.0)


def sigmoid(x: Tensor) -> Tensor:
    # tanh form is overflow-safe; saturated values are nudged to the nearest
    # representable interior point so outputs stay strictly inside (0, 1)
    out = np.multiply(x.data, 0.5)
    np.tanh(out, out=out)
    out += 1.0
    out *= 0.5
    np.clip(out, _SIG_LO, _SIG_HI, out=out)

    def bwd(g):
        r = np.subtract(1.0, out)
        r *= out
        r *= g
        return (r,)

    return _make(out, (x,), bwd)


def tanh(x: Tensor) -> Tensor:
    out = np.tanh(x.data)

    def bwd(g):
        g = np.ascontiguousarray(g)
        return (kernels.tanh_bwd(g.reshape(-1), out.reshape(-1))
                .reshape(out.shape),)

    return _make(out, (x,), bwd)


def relu(x: Tensor) -> Tensor:
    out = np.maximum(x.data, 0.0)
    return _make(out, (x,), lambda g: (g * (x.data > 0.0),))


def abs_(x: Tensor) -> Tensor:
    return _make(np.abs(x.data), (x,), lambda g: (g * np.sign(x.data),))


def scale(x: Tensor, c: float) -> Tensor:
    return _make(x.data * c, (x,), lambda g: (g * c,))


_UNARY = {"sigmoid": sigmoid, "tanh": tanh, "relu": relu}
_BINARY = {"add": add, "sub": sub, "mul": mul}


def elementwise(x: Tensor, kind: str, y: Tensor | None = None) -> Tensor:
    """Pointwise op dispatcher: add/sub/mul (broadcasting) or sigmoid/tanh/relu."""
    if kind in _UNARY:
        if y is not None:
            raise ContractError(f"elementwise({kind}) is unary")
        return _UNARY[kind](x)
    if kind in _BINARY:
        if y is None:
            raise ContractError(f"elementwise({kind}) needs a second operand")
        return _BINARY[kind](x, y)
    raise ContractError(f"unknown elementwise kind {kind!r}")


# ---------------------------------------------------------------------------
# shape ops

def reshape(x: Tensor, shape) -> Tensor:
    shape = tuple(shape)
    data = np.reshape(x.data, shape)
    return _make(data, (x,), lambda g: (np.reshape(g, x.shape),))


def concat_channels(x: Tensor, y: Tensor) -> Tensor:
    """Stack y's channels after x's; batch and spatial axes must agree."""
    if x.data.ndim != 4 or y.data.ndim != 4:
        raise ShapeError("concat_channels expects rank-4 tensors")
    if x.shape[0] != y.shape[0] or x.shape[2:] != y.shape[2:]:
        raise ShapeError(
            f"concat_channels: batch/spatial axes differ: {x.dims} vs {y.dims}"
            " (axes 0, 2, 3 must match)")
    c1 = x.shape[1]
    data = np.concatenate([x.data, y.data], axis=1)
    return _make(data, (x, y),
                 lambda g: (np.ascontiguousarray(g[:, :c1]),
                            np.ascontiguousarray(g[:, c1:])))


def slice_channels(x: Tensor, start: int, stop: int) -> Tensor:
    if x.data.ndim != 4:
        raise ShapeError("slice_channels expects a rank-4 tensor")
    if not (0 <= start <= stop <= x.shape[1]):
        raise ShapeError(
            f"slice_channels: [{start}:{stop}] out of range for {x.shape[1]} channels")
    data = np.ascontiguousarray(x.data[:, start:stop])

    def bwd(g):
        gx = np.zeros_like(x.data)
        gx[:, start:stop] = g
        return (gx,)

    return _make(data, (x,), bwd)


# ---------------------------------------------------------------------------
# reductions

def sum_all(x: Tensor) -> Tensor:
    return _make(np.asarray(x.data.sum()), (x,),
                 lambda g: (np.broadcast_to(g, x.shape),))


def mean_all(x: Tensor) -> Tensor:
    n = x.data.size
    return _make(np.asarray(x.data.mean()), (x,),
                 lambda g: (np.broadcast_to(g / n, x.shape),))


def mean_axis(x: Tensor, axis: int) -> Tensor:
    """Mean over one axis, keeping it as size 1."""
    n = x.shape[axis]
    data = x.data.mean(axis=axis, keepdims=True)
    return _make(data, (x,),
                 lambda g: (np.broadcast_to(g / n, x.shape),))


def global_avg_pool(x: Tensor) -> Tensor:
    """Spatial mean per (batch, channel): [B,C,H,W] -> [B,C,1,1]."""
    if x.data.ndim != 4:
        raise ShapeError("global_avg_pool expects a rank-4 tensor")
    n = x.shape[2] * x.shape[3]
    data = x.data.mean(axis=(2, 3), keepdims=True)
    return _make(data, (x,),
                 lambda g: (np.broadcast_to(g / n, x.shape),))


# ---------------------------------------------------------------------------
# convolution (stride 1, zero padding)

def conv2d(x: Tensor, kernel: Tensor, bias: Tensor | None = None,
           padding: int = 0) -> Tensor:
    """2D convolution: x [B,Cin,H,W] * kernel [Cout,Cin,kh,kw] (+ bias [Cout]).

    Stride is fixed at 1 and padding is zero-fill.  Implemented as one GEMM
    per kernel offset on flat-shifted views, which avoids materializing an
    im2col buffer.
    """
    if x.data.ndim != 4:
        raise ShapeError(f"conv2d input must be rank 4, got {x.dims}")
    if kernel.data.ndim != 4:
        raise ShapeError(f"conv2d kernel must be rank 4, got {kernel.dims}")
    B, Cin, H, W = x.shape
    Cout, Ck, kh, kw = kernel.shape
    if Ck != Cin:
        raise ShapeError(
            f"conv2d: input channels (axis 1) = {Cin} but kernel expects {Ck}")
    if kh % 2 == 0 or kw % 2 == 0:
        raise ShapeError(f"conv2d kernel sides must be odd, got {kh}x{kw}")
    if padding < 0:
        raise ShapeError("conv2d padding must be >= 0")
    if bias is not None and bias.shape != (Cout,):
        raise ShapeError(
            f"conv2d bias must have shape ({Cout},), got {bias.dims}")
    Ho, Wo = H + 2 * padding - kh + 1, W + 2 * padding - kw + 1
    if Ho < 1 or Wo < 1:
        raise ShapeError(
            f"conv2d: kernel {kh}x{kw} with padding {padding} exceeds "
            f"input {H}x{W}")

    if kh == 1 and kw == 1 and padding == 0:
        # pointwise conv: one BLAS call per batch item on contiguous views
        xf = x.data.reshape(B, Cin, H * W)
        out = np.ascontiguousarray(
            np.matmul(kernel.data[:, :, 0, 0], xf).reshape(B, Cout, H, W))
        if bias is not None:
            out += bias.data[None, :, None, None]

        def bwd1(g):
            gx = gk = gb = None
            if bias is not None and bias.requires_grad:
                gb = g.sum(axis=(0, 2, 3))
            gf = np.ascontiguousarray(g).reshape(B, Cout, H * W)
            if kernel.requires_grad:
                gk = np.matmul(gf, xf.transpose(0, 2, 1)).sum(axis=0)
                gk = gk.reshape(Cout, Cin, 1, 1)
            if x.requires_grad:
                gx = np.matmul(kernel.data[:, :, 0, 0].T, gf).reshape(x.shape)
            if bias is None:
                return gx, gk
            return gx, gk, gb

        parents = (x, kernel) if bias is None else (x, kernel, bias)
        return _make(out, parents, bwd1)

    # General kernels run through the backend (compiled direct loops or the
    # numpy shifted-GEMM fallback) on a zero-padded copy of the input.
    Hp, Wp = H + 2 * padding, W + 2 * padding
    if padding:
        xp = np.zeros((B, Cin, Hp, Wp))
        xp[:, :, padding:padding + H, padding:padding + W] = x.data
    else:
        xp = x.data
    out = kernels.conv2d_fwd(xp, kernel.data, Ho, Wo)
    if bias is not None:
        out += bias.data[None, :, None, None]

    def bwd(g):
        gx = gk = gb = None
        g = np.ascontiguousarray(g)
        if bias is not None and bias.requires_grad:
            gb = g.sum(axis=(0, 2, 3))
        if kernel.requires_grad:
            gk = kernels.conv2d_bwd_k(xp, g, kh, kw)
        if x.requires_grad:
            gxp = kernels.conv2d_bwd_x(kernel.data, g, Hp, Wp)
            gx = gxp[:, :, padding:padding + H, padding:padding + W] \
                if padding else gxp
        if bias is None:
            return gx, gk
        return gx, gk, gb

    parents = (x, kernel) if bias is None else (x, kernel, bias)
    return _make(out, parents, bwd)


# ---------------------------------------------------------------------------
# resampling

@lru_cache(maxsize=64)
def _interp_matrix(n_in: int, factor: int) -> np.ndarray:
    """Dense 1D bilinear-upsampling operator (align-corners disabled)."""
    n_out = n_in * factor
    U = np.zeros((n_out, n_in))
    for y in range(n_out):
        src = (y + 0.5) / factor - 0.5
        i0 = int(np.floor(src))
        f = src - i0
        lo = min(max(i0, 0), n_in - 1)
        hi = min(max(i0 + 1, 0), n_in - 1)
        U[y, lo] += 1.0 - f
        U[y, hi] += f
    return U


def resample(x: Tensor, mode: str, factor: int) -> Tensor:
    """Spatial resampling of [B,C,H,W]: 'bilinear_up' or 'box_down' by factor."""
    if x.data.ndim != 4:
        raise ShapeError("resample expects a rank-4 tensor")
    if factor < 2:
        raise ShapeError(f"resample factor must be >= 2, got {factor}")
    B, C, H, W = x.shape
    if mode == "bilinear_up":
        Uh = _interp_matrix(H, factor)
        Uw = _interp_matrix(W, factor)
        out = np.matmul(np.matmul(Uh, x.data), Uw.T)

        def bwd(g):
            return (np.ascontiguousarray(np.matmul(np.matmul(Uh.T, g), Uw)),)

        return _make(np.ascontiguousarray(out), (x,), bwd)
    if mode == "box_down":
        if H % factor or W % factor:
            raise ShapeError(
                f"box_down: spatial dims {H}x{W} (axes 2, 3) not divisible "
                f"by factor {factor}")
        h, w = H // factor, W // factor
        out = x.data.reshape(B, C, h, factor, w, factor).mean(axis=(3, 5))

        def bwd(g):
            gx = np.broadcast_to(
                g[:, :, :, None, :, None] / (factor * factor),
                (B, C, h, factor, w, factor))
            return (gx.reshape(x.shape),)

        return _make(out, (x,), bwd)
    raise ShapeError(f"unknown resample mode {mode!r}")


# ---------------------------------------------------------------------------
# backward pass

def backward(loss: Tensor) -> None:
    """Reverse sweep from a 0-dim loss; accumulates into leaf grad buffers.

    Repeated calls without ``zero_grad`` keep accumulating.  Parameters not
    reachable from the loss simply receive nothing (zero contribution).
    """
    if loss.data.shape != ():
        raise ContractError(
            f"backward needs a scalar (0-dim) loss, got shape {loss.data.shape}")

    topo: list[Tensor] = []
    visiting: list[tuple[Tensor, bool]] = [(loss, False)]
    seen: set[int] = set()
    while visiting:
        node, expanded = visiting.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        visiting.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                visiting.append((p, False))

    grads: dict[int, np.ndarray] = {id(loss): np.asarray(1.0)}
    for node in reversed(topo):
        g = grads.pop(id(node), None)
        if g is None:
            node._bwd = None
            node._parents = ()
            continue
        if node._bwd is None:
            # leaf: accumulate into the persistent buffer if present
            if node.requires_grad:
                node.alloc_grad()
                node.grad += g
                node._grad_fresh = True
            continue
        for parent, pg in zip(node._parents, node._bwd(g)):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = pg
        # free the closure (and the forward buffers it captured) eagerly;
        # large graphs otherwise hold every intermediate until the sweep ends
        node._bwd = None
        node._parents = ()


# ---------------------------------------------------------------------------
# parameter registry

class ParamStore:
    """Named parameter tensors with paired gradient buffers.

    Iteration order is insertion order, which makes optimizer sweeps and
    serialization deterministic.  Parameters registered with
    ``trainable=False`` keep their gradient buffer but are skipped by the
    optimizer (used for frozen generator variants).
    """

    def __init__(self):
        self._params: dict[str, Tensor] = {}
        self._trainable: dict[str, bool] = {}

    def register(self, name: str, value: np.ndarray, trainable: bool = True) -> Tensor:
        if name in self._params:
            raise ContractError(f"parameter {name!r} registered twice")
        # frozen parameters keep their (zero) gradient buffer but are left
        # off the tape entirely, so no backward work is spent on them
        t = Tensor(value, requires_grad=trainable)
        t.alloc_grad()
        self._params[name] = t
        self._trainable[name] = trainable
        return t

    def set_trainable(self, name: str, trainable: bool) -> None:
        self._trainable[name] = trainable
        self._params[name].requires_grad = trainable

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self):
        return list(self._params)

    def items(self):
        return self._params.items()

    def is_trainable(self, name: str) -> bool:
        return self._trainable[name]

    def trainable_items(self):
        return [(n, t) for n, t in self._params.items() if self._trainable[n]]

    def num_values(self) -> int:
        return sum(t.data.size for t in self._params.values())

    def zero_grad(self) -> None:
        for t in self._params.values():
            t.zero_grad()

    def has_fresh_grads(self) -> bool:
        return any(t._grad_fresh for n, t in self.trainable_items())

    def clear_fresh(self) -> None:
        for t in self._params.values():
            t._grad_fresh = False
