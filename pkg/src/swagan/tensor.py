"""Reverse-mode autodiff over NumPy arrays with an explicit tape.

Design notes:

* Operations are free functions producing new ``Tensor`` objects.  When a
  ``Tape`` is active and an input requires gradients, a node holding a
  vector-Jacobian closure is recorded.
* VJP closures are themselves written in terms of these operations, so a
  backward pass run with ``create_graph=True`` records differentiable
  nodes and supports gradient-of-gradient (used by the R1 penalty).
* Gradients accumulate in fixed tape order, which makes backward passes
  bitwise reproducible.
* float32 is the working precision; every op also accepts float64 for
  tight finite-difference checks.
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .errors import ContractError, DimensionError

_LEAKY_SLOPE = 0.2


class Tensor:
    """N-dimensional float array, optionally tracked for differentiation."""

    __slots__ = ("data", "requires_grad", "name", "grad", "node")

    def __init__(self, data, requires_grad=False, name=None, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float32)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.name = name
        self.grad = None
        self.node = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def item(self):
        return float(self.data)

    def detach(self):
        return Tensor(self.data, requires_grad=False)

    def astype(self, dtype):
        return Tensor(self.data.astype(dtype), requires_grad=self.requires_grad,
                      name=self.name)

    def __repr__(self):
        tag = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}{tag})"

    # arithmetic sugar; all graph logic lives in the free functions
    def __add__(self, other):
        if isinstance(other, Tensor):
            return add(self, other)
        return add_scalar(self, float(other))

    __radd__ = __add__

    def __neg__(self):
        return scale(self, -1.0)

    def __sub__(self, other):
        if isinstance(other, Tensor):
            return add(self, scale(other, -1.0))
        return add_scalar(self, -float(other))

    def __rsub__(self, other):
        return add_scalar(scale(self, -1.0), float(other))

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return mul(self, other)
        return scale(self, float(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise TypeError("tensor/tensor division is not provided; use reciprocal")
        return scale(self, 1.0 / float(other))

    def sum(self):
        return tsum(self)

    def mean(self):
        return scale(tsum(self), 1.0 / self.data.size)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)


class _Node:
    __slots__ = ("out", "inputs", "vjp", "op")

    def __init__(self, out, inputs, vjp, op):
        self.out = out
        self.inputs = inputs
        self.vjp = vjp
        self.op = op


class Tape:
    """Ordered record of differentiable operations.

    Nodes appear in execution order, so every node follows the producers of
    its inputs; one backward pass visits each node at most once.
    """

    def __init__(self):
        self.nodes = []
        self.watched = {}  # id(tensor) -> leaf tensor with requires_grad

    def __enter__(self):
        _TAPES.append(self)
        return self

    def __exit__(self, *exc):
        _TAPES.pop()
        return False


_TAPES: list = [None]  # stack; None entries disable recording


class _no_tape:
    def __enter__(self):
        _TAPES.append(None)

    def __exit__(self, *exc):
        _TAPES.pop()
        return False


def _tape():
    return _TAPES[-1]


def _tracked(t):
    return isinstance(t, Tensor) and (t.requires_grad or t.node is not None)


def record(out, inputs, vjp, op=""):
    """Attach a node for ``out`` to the active tape, if any input is tracked.

    ``vjp(grad_out, needs)`` must return one gradient (or None) per input,
    computing entries only where ``needs`` is True.
    """
    tape = _tape()
    if tape is None:
        return out
    if not any(_tracked(t) for t in inputs):
        return out
    node = _Node(out, inputs, vjp, op)
    out.requires_grad = True
    out.node = node
    tape.nodes.append(node)
    for t in inputs:
        if isinstance(t, Tensor) and t.requires_grad and t.node is None:
            tape.watched.setdefault(id(t), t)
    return out


def _same_dtype(*tensors):
    dt = tensors[0].dtype
    for t in tensors[1:]:
        if t.dtype != dt:
            raise ContractError(f"mixed dtypes {dt} and {t.dtype}")
    return dt


# ---------------------------------------------------------------------------
# elementwise / structural primitives


def add(a, b):
    if a.shape != b.shape:
        raise DimensionError(f"add: shape {a.shape} vs {b.shape}")
    _same_dtype(a, b)
    out = Tensor(a.data + b.data)

    def vjp(g, needs):
        return (g if needs[0] else None, g if needs[1] else None)

    return record(out, (a, b), vjp, "add")


def mul(a, b):
    if a.shape != b.shape:
        raise DimensionError(f"mul: shape {a.shape} vs {b.shape}")
    _same_dtype(a, b)
    out = Tensor(a.data * b.data)

    def vjp(g, needs):
        ga = mul(g, b) if needs[0] else None
        gb = mul(g, a) if needs[1] else None
        return ga, gb

    return record(out, (a, b), vjp, "mul")


def scale(a, s):
    s = float(s)
    out = Tensor(a.data * a.dtype.type(s))

    def vjp(g, needs):
        return (scale(g, s),)

    return record(out, (a,), vjp, "scale")


def add_scalar(a, s):
    out = Tensor(a.data + a.dtype.type(s))

    def vjp(g, needs):
        return (g,)

    return record(out, (a,), vjp, "add_scalar")


def cmul(a, const):
    """Multiply by a constant array (no gradient path through the constant)."""
    const = np.asarray(const, dtype=a.dtype)
    out = Tensor(a.data * const)

    def vjp(g, needs):
        return (cmul(g, const),)

    return record(out, (a,), vjp, "cmul")


def tsum(a):
    out = Tensor(np.asarray(a.data.sum(), dtype=a.dtype))

    def vjp(g, needs):
        return (broadcast_to(g, a.shape),)

    return record(out, (a,), vjp, "sum")


def sum_axes(a, axes):
    axes = tuple(sorted(ax % a.data.ndim for ax in axes))
    out = Tensor(a.data.sum(axis=axes))

    def vjp(g, needs):
        keep = reshape(g, tuple(1 if i in axes else s for i, s in enumerate(a.shape)))
        return (broadcast_to(keep, a.shape),)

    return record(out, (a,), vjp, "sum_axes")


def broadcast_to(a, shape):
    out = Tensor(np.broadcast_to(a.data, shape).copy())
    axes = _broadcast_axes(a.shape, shape)

    def vjp(g, needs):
        red = sum_axes(g, axes) if axes else g
        return (reshape(red, a.shape),)

    return record(out, (a,), vjp, "broadcast")


def _broadcast_axes(src, dst):
    src = (1,) * (len(dst) - len(src)) + tuple(src)
    return tuple(i for i, (s, d) in enumerate(zip(src, dst)) if s == 1 and d != 1)


def reshape(a, shape):
    out = Tensor(a.data.reshape(shape))
    orig = a.shape

    def vjp(g, needs):
        return (reshape(g, orig),)

    return record(out, (a,), vjp, "reshape")


def transpose2d(a):
    if a.data.ndim != 2:
        raise DimensionError(f"transpose2d: expected 2-D, got {a.shape}")
    out = Tensor(np.ascontiguousarray(a.data.T))

    def vjp(g, needs):
        return (transpose2d(g),)

    return record(out, (a,), vjp, "transpose2d")


def matmul(a, b):
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: {a.shape} @ {b.shape} (inner axis mismatch)")
    _same_dtype(a, b)
    out = Tensor(a.data @ b.data)

    def vjp(g, needs):
        ga = matmul(g, transpose2d(b)) if needs[0] else None
        gb = matmul(transpose2d(a), g) if needs[1] else None
        return ga, gb

    return record(out, (a, b), vjp, "matmul")


def bias_add(x, b):
    """Add a per-channel bias: axis 1 of 4-D input, axis 1 of 2-D input."""
    if b.data.ndim != 1:
        raise DimensionError(f"bias_add: bias must be 1-D, got {b.shape}")
    if x.data.ndim == 4:
        if x.shape[1] != b.shape[0]:
            raise DimensionError(f"bias_add: channel axis {x.shape[1]} vs bias {b.shape[0]}")
        out = Tensor(x.data + b.data[None, :, None, None])
        red = (0, 2, 3)
    elif x.data.ndim == 2:
        if x.shape[1] != b.shape[0]:
            raise DimensionError(f"bias_add: feature axis {x.shape[1]} vs bias {b.shape[0]}")
        out = Tensor(x.data + b.data[None, :])
        red = (0,)
    else:
        raise DimensionError(f"bias_add: expected 2-D or 4-D input, got {x.shape}")
    _same_dtype(x, b)

    def vjp(g, needs):
        gx = g if needs[0] else None
        gb = sum_axes(g, red) if needs[1] else None
        return gx, gb

    return record(out, (x, b), vjp, "bias_add")


def channel_scale(x, s):
    """Scale each (sample, channel) plane of a 4-D tensor by s[N, C]."""
    if x.data.ndim != 4 or s.data.ndim != 2 or x.shape[:2] != s.shape:
        raise DimensionError(f"channel_scale: {x.shape} vs scales {s.shape}")
    _same_dtype(x, s)
    out = Tensor(x.data * s.data[:, :, None, None])

    def vjp(g, needs):
        gx = channel_scale(g, s) if needs[0] else None
        gs = sum_axes(mul(g, x), (2, 3)) if needs[1] else None
        return gx, gs

    return record(out, (x, s), vjp, "channel_scale")


def sqrt(a):
    out = Tensor(np.sqrt(a.data))

    def vjp(g, needs):
        # d sqrt(x) = 0.5 / sqrt(x)
        return (mul(g, scale(reciprocal(out), 0.5)),)

    return record(out, (a,), vjp, "sqrt")


def reciprocal(a):
    out = Tensor(1.0 / a.data)

    def vjp(g, needs):
        return (scale(mul(g, mul(out, out)), -1.0),)

    return record(out, (a,), vjp, "reciprocal")


# ---------------------------------------------------------------------------
# nonlinearities


def leaky_relu(x, slope=_LEAKY_SLOPE):
    """x for x >= 0 else slope*x; the subgradient at 0 is defined as 1."""
    mask = np.where(x.data >= 0, x.dtype.type(1), x.dtype.type(slope))
    out = Tensor(x.data * mask)

    def vjp(g, needs):
        return (cmul(g, mask),)

    return record(out, (x,), vjp, "leaky_relu")


def softplus(x):
    """ln(1 + exp(x)) with the overflow-safe branch x + ln(1+exp(-x)) for x > 20."""
    d = x.data
    big = d > 20
    out_data = np.where(big, d + np.log1p(np.exp(-np.abs(d))), np.log1p(np.exp(np.minimum(d, 20))))
    out = Tensor(out_data.astype(x.dtype, copy=False))
    # stable logistic for the gradient
    sig = np.empty_like(d)
    pos = d >= 0
    sig[pos] = 1.0 / (1.0 + np.exp(-d[pos]))
    ex = np.exp(d[~pos])
    sig[~pos] = ex / (1.0 + ex)

    def vjp(g, needs):
        return (cmul(g, sig),)

    return record(out, (x,), vjp, "softplus")


# ---------------------------------------------------------------------------
# convolution


def _conv_out_hw(H, W, k, stride, padding):
    return (H + 2 * padding - k) // stride + 1, (W + 2 * padding - k) // stride + 1


def _check_conv_args(x, w, stride, padding):
    if x.data.ndim != 4:
        raise DimensionError(f"conv2d: input must be 4-D (N,C,H,W), got {x.shape}")
    if w.data.ndim != 4 or w.shape[2] != w.shape[3]:
        raise DimensionError(f"conv2d: weight must be (Cout,Cin,k,k), got {w.shape}")
    k = w.shape[2]
    if k not in (1, 3):
        raise ContractError(f"conv2d: kernel size {k} not in {{1, 3}}")
    if stride not in (1, 2):
        raise ContractError(f"conv2d: stride {stride} not in {{1, 2}}")
    if padding != k // 2:
        raise ContractError(f"conv2d: padding {padding} must equal k//2 = {k // 2}")
    if x.shape[1] != w.shape[1]:
        raise DimensionError(
            f"conv2d: input channel axis {x.shape[1]} vs weight Cin {w.shape[1]}")


def conv2d_raw(x, w, stride=1, padding=None):
    """Cross-correlation without bias; see conv2d for the full contract."""
    if padding is None:
        padding = w.shape[2] // 2
    _check_conv_args(x, w, stride, padding)
    _same_dtype(x, w)
    out = Tensor(kernels.conv2d_forward(x.data, w.data, stride, padding))
    H, W = x.shape[2], x.shape[3]
    k = w.shape[2]

    def vjp(g, needs):
        gx = conv2d_input_grad(g, w, stride, padding, (H, W)) if needs[0] else None
        gw = conv2d_weight_grad(x, g, stride, padding, k) if needs[1] else None
        return gx, gw

    return record(out, (x, w), vjp, "conv2d")


def conv2d_input_grad(gy, w, stride, padding, in_hw):
    """Adjoint of conv2d_raw in its input argument (a transposed convolution).

    Linear in both arguments; its own VJPs close over conv2d_raw and
    conv2d_weight_grad, which is what makes double backward work.
    """
    H, W = in_hw
    out = Tensor(kernels.conv2d_grad_input(gy.data, w.data, stride, padding, H, W))
    k = w.shape[2]

    def vjp(g, needs):
        gg = conv2d_raw(g, w, stride, padding) if needs[0] else None
        gw = conv2d_weight_grad(g, gy, stride, padding, k) if needs[1] else None
        return gg, gw

    return record(out, (gy, w), vjp, "conv2d_input_grad")


def conv2d_weight_grad(x, gy, stride, padding, k):
    """Adjoint of conv2d_raw in its weight argument."""
    out = Tensor(kernels.conv2d_grad_weight(x.data, gy.data, stride, padding, k))
    H, W = x.shape[2], x.shape[3]

    def vjp(g, needs):
        gx = conv2d_input_grad(gy, g, stride, padding, (H, W)) if needs[0] else None
        ggy = conv2d_raw(x, g, stride, padding) if needs[1] else None
        return gx, ggy

    return record(out, (x, gy), vjp, "conv2d_weight_grad")


def conv2d(x, w, b=None, stride=1, padding=None):
    """2-D cross-correlation with optional per-output-channel bias.

    k in {1, 3}; padding = k // 2; stride in {1, 2}.  Output spatial size is
    (H + 2*padding - k) // stride + 1.
    """
    y = conv2d_raw(x, w, stride, padding)
    if b is not None:
        if b.shape != (w.shape[0],):
            raise DimensionError(f"conv2d: bias shape {b.shape} vs Cout {w.shape[0]}")
        y = bias_add(y, b)
    return y


def linear(x, w, b=None):
    """Affine map x @ w.T + b for x[N, Din], w[Dout, Din], b[Dout]."""
    if x.data.ndim != 2 or w.data.ndim != 2 or x.shape[1] != w.shape[1]:
        raise DimensionError(f"linear: input {x.shape} vs weight {w.shape}")
    y = matmul(x, transpose2d(w))
    if b is not None:
        y = bias_add(y, b)
    return y


# ---------------------------------------------------------------------------
# bilinear resize (align-corners-false; factors 2 and 1/2 only)

_UP_TABLES: dict = {}


def _up_table(L, dtype):
    key = (L, np.dtype(dtype).str)
    tab = _UP_TABLES.get(key)
    if tab is None:
        # output i samples input coordinate (i + 0.5)/2 - 0.5, clamped
        coord = np.clip((np.arange(2 * L) + 0.5) / 2.0 - 0.5, 0, L - 1)
        i0 = np.floor(coord).astype(np.intp)
        i1 = np.minimum(i0 + 1, L - 1)
        f = (coord - i0).astype(dtype)
        tab = (i0, i1, (1 - f), f)
        _UP_TABLES[key] = tab
    return tab


def _up2_axis(d, axis):
    i0, i1, w0, w1 = _up_table(d.shape[axis], d.dtype)
    a = np.take(d, i0, axis=axis)
    b = np.take(d, i1, axis=axis)
    shape = [1] * d.ndim
    shape[axis] = -1
    return a * w0.reshape(shape) + b * w1.reshape(shape)


def _up2_adjoint_axis(g, axis, L):
    i0, i1, w0, w1 = _up_table(L, g.dtype)
    shape = [1] * g.ndim
    shape[axis] = -1
    out = np.zeros(g.shape[:axis] + (L,) + g.shape[axis + 1:], dtype=g.dtype)
    gm = np.moveaxis(out, axis, -1)
    np.add.at(gm, (..., i0), np.moveaxis(g * w0.reshape(shape), axis, -1))
    np.add.at(gm, (..., i1), np.moveaxis(g * w1.reshape(shape), axis, -1))
    return out


def bilinear_up2(x):
    if x.data.ndim != 4:
        raise DimensionError(f"bilinear resize expects 4-D input, got {x.shape}")
    out = Tensor(_up2_axis(_up2_axis(x.data, 2), 3))
    H, W = x.shape[2], x.shape[3]

    def vjp(g, needs):
        return (_up2_adjoint(g, (H, W)),)

    return record(out, (x,), vjp, "bilinear_up2")


def _up2_adjoint(g, in_hw):
    H, W = in_hw
    out = Tensor(_up2_adjoint_axis(_up2_adjoint_axis(g.data, 3, W), 2, H))

    def vjp(gg, needs):
        return (bilinear_up2(gg),)

    return record(out, (g,), vjp, "bilinear_up2_adjoint")


def bilinear_down2(x):
    if x.data.ndim != 4:
        raise DimensionError(f"bilinear resize expects 4-D input, got {x.shape}")
    H, W = x.shape[2], x.shape[3]
    if H % 2 or W % 2:
        raise DimensionError(f"bilinear_down2: odd spatial dims {H}x{W}")
    d = x.data
    out_data = (d[:, :, 0::2, 0::2] + d[:, :, 0::2, 1::2]
                + d[:, :, 1::2, 0::2] + d[:, :, 1::2, 1::2]) * d.dtype.type(0.25)
    out = Tensor(out_data)

    def vjp(g, needs):
        return (_down2_adjoint(g),)

    return record(out, (x,), vjp, "bilinear_down2")


def _down2_adjoint(g):
    out = Tensor(np.repeat(np.repeat(g.data, 2, axis=2), 2, axis=3)
                 * g.dtype.type(0.25))

    def vjp(gg, needs):
        return (bilinear_down2(gg),)

    return record(out, (g,), vjp, "bilinear_down2_adjoint")


def bilinear_resize(x, factor):
    """Resize by 2 or 1/2 under the align-corners-false convention.

    Output sample centers map to input coordinates (i + 0.5)/factor - 0.5
    clamped to the border; for factor 1/2 this reduces to 2x2 averaging.
    """
    if factor == 2:
        return bilinear_up2(x)
    if factor == 0.5:
        return bilinear_down2(x)
    raise ContractError(f"bilinear_resize: factor {factor} not in {{2, 1/2}}")


# ---------------------------------------------------------------------------
# Haar analysis/synthesis (orthonormal; channel blocks [LL, LH, HL, HH])


def dwt2(x):
    """Single-level orthonormal Haar analysis of an (N, C, 2H, 2W) tensor.

    For each disjoint 2x2 block [[a, b], [c, d]]:
        LL = (a+b+c+d)/2,  LH = (a+b-c-d)/2,
        HL = (a-b+c-d)/2,  HH = (a-b-c+d)/2
    Output is (N, 4C, H, W) with channel blocks ordered [LL, LH, HL, HH].
    """
    if x.data.ndim != 4:
        raise DimensionError(f"dwt2: expected 4-D input, got {x.shape}")
    H, W = x.shape[2], x.shape[3]
    if H % 2 or W % 2:
        raise DimensionError(f"dwt2: spatial dims must be even, got {H}x{W}")
    d = x.data
    a = d[:, :, 0::2, 0::2]
    b = d[:, :, 0::2, 1::2]
    c = d[:, :, 1::2, 0::2]
    e = d[:, :, 1::2, 1::2]
    half = d.dtype.type(0.5)
    out = Tensor(np.concatenate(
        [(a + b + c + e), (a + b - c - e), (a - b + c - e), (a - b - c + e)],
        axis=1) * half)

    def vjp(g, needs):
        return (iwt2(g),)

    return record(out, (x,), vjp, "dwt2")


def iwt2(x):
    """Exact inverse of dwt2: (N, 4C, H, W) -> (N, C, 2H, 2W)."""
    if x.data.ndim != 4:
        raise DimensionError(f"iwt2: expected 4-D input, got {x.shape}")
    if x.shape[1] % 4:
        raise DimensionError(f"iwt2: channel count {x.shape[1]} not divisible by 4")
    C = x.shape[1] // 4
    d = x.data
    ll, lh, hl, hh = d[:, :C], d[:, C:2 * C], d[:, 2 * C:3 * C], d[:, 3 * C:]
    half = d.dtype.type(0.5)
    N, _, H, W = d.shape
    out_data = np.empty((N, C, 2 * H, 2 * W), dtype=d.dtype)
    out_data[:, :, 0::2, 0::2] = (ll + lh + hl + hh) * half
    out_data[:, :, 0::2, 1::2] = (ll + lh - hl - hh) * half
    out_data[:, :, 1::2, 0::2] = (ll - lh + hl - hh) * half
    out_data[:, :, 1::2, 1::2] = (ll - lh - hl + hh) * half
    out = Tensor(out_data)

    def vjp(g, needs):
        return (dwt2(g),)

    return record(out, (x,), vjp, "iwt2")


# ---------------------------------------------------------------------------
# backward


def backward(tape, loss, wrt=None, create_graph=False):
    """Propagate gradients of a scalar ``loss`` through a tape.

    Returns a dict name -> gradient Tensor for every named leaf watched by
    the tape (zeros where the loss does not reach the leaf); also stores
    gradients on ``tensor.grad``.  With ``wrt`` (a sequence of tensors), the
    traversal is pruned to paths reaching those tensors and the return value
    is a list of gradients in ``wrt`` order instead.

    ``create_graph=True`` records the backward computation on the same tape
    so the result is itself differentiable.
    """
    if loss.data.ndim != 0 and loss.data.size != 1:
        raise ContractError(f"backward: loss must be scalar, got shape {loss.shape}")
    if loss.node is None:
        raise ContractError("backward: loss was not produced under an active tape")

    nodes = list(tape.nodes)
    if wrt is not None:
        targets = {id(t) for t in wrt}
        # a node is needed if any input is a target or feeds one transitively
        needed_out = set()
        for node in nodes:
            if any(id(t) in targets or id(t) in needed_out for t in node.inputs):
                needed_out.add(id(node.out))
        is_needed = lambda t: id(t) in targets or id(t) in needed_out
    else:
        is_needed = _tracked

    grads = {id(loss): Tensor(np.ones((), dtype=loss.dtype))}
    guard = _use_tape(tape) if create_graph else _no_tape()
    with guard:
        for node in reversed(nodes):
            g = grads.pop(id(node.out), None)
            if g is None or not is_needed(node.out):
                continue
            if g.shape != node.out.shape:
                g = broadcast_to(g, node.out.shape)
            needs = tuple(_tracked(t) and is_needed(t) for t in node.inputs)
            if not any(needs):
                continue
            in_grads = node.vjp(g, needs)
            for t, gt in zip(node.inputs, in_grads):
                if gt is None:
                    continue
                prev = grads.get(id(t))
                grads[id(t)] = gt if prev is None else add(prev, gt)

    if wrt is not None:
        out = []
        for t in wrt:
            gt = grads.get(id(t))
            if gt is None:
                gt = Tensor(np.zeros(t.shape, dtype=t.dtype))
            out.append(gt)
        return out

    named = {}
    for leaf in tape.watched.values():
        gt = grads.get(id(leaf))
        if gt is None:
            gt = Tensor(np.zeros(leaf.shape, dtype=leaf.dtype))
        leaf.grad = gt
        if leaf.name is not None:
            named[leaf.name] = gt
    return named


class _use_tape:
    def __init__(self, tape):
        self.tape = tape

    def __enter__(self):
        _TAPES.append(self.tape)

    def __exit__(self, *exc):
        _TAPES.pop()
        return False
