"""Dense tensors with taped reverse-mode differentiation.

The operation set covers exactly what the reconstruction network needs:
elementwise arithmetic, matmul, convolution, normalisation layers, the
activations, shape manipulation, and a handful of custom-gradient ops
registered by other modules through :func:`apply_op`.

Tensors are immutable values once created; forward ops are pure. The tape
is a module-level record of executed differentiable operations, replayed in
exact reverse execution order by :func:`backward`. Gradient accumulation is
additive across fan-out; callers zero parameter grads between steps.
"""
from __future__ import annotations

import contextlib
from typing import Callable, Sequence

import numpy as np

from .errors import ContractError, DimensionError

DEFAULT_DTYPE = np.float64


class Tensor:
    """N-dimensional real array with optional gradient-tape participation."""

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data)
        if dtype is not None:
            arr = arr.astype(dtype, copy=False)
        elif arr.dtype != np.float32:  # keep single precision, default to double
            arr = arr.astype(DEFAULT_DTYPE, copy=False)
        self.data = np.ascontiguousarray(arr)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(()))

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def __repr__(self) -> str:
        req = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}{req})"

    # arithmetic sugar
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, p):
        return pow_scalar(self, p)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return getitem(self, idx)

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes) -> "Tensor":
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes)

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        return sum_(self, axis, keepdims)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        return mean(self, axis, keepdims)


class _Node:
    __slots__ = ("inputs", "outputs", "vjp")

    def __init__(self, inputs, outputs, vjp):
        self.inputs = inputs
        self.outputs = outputs
        self.vjp = vjp


class Tape:
    """Ordered record of executed differentiable operations."""

    def __init__(self):
        self._nodes: list[_Node] = []

    def __len__(self) -> int:
        return len(self._nodes)

    def record(self, node: _Node) -> None:
        self._nodes.append(node)

    def clear(self) -> None:
        self._nodes.clear()


_ACTIVE_TAPE = Tape()
_GRAD_ENABLED = True


def active_tape() -> Tape:
    return _ACTIVE_TAPE


@contextlib.contextmanager
def no_grad():
    """Suspend tape recording (inference / Monte-Carlo passes)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def grad_enabled() -> bool:
    return _GRAD_ENABLED


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def apply_op(
    inputs: Sequence[Tensor],
    out_data,
    vjp: Callable,
) -> Tensor | tuple[Tensor, ...]:
    """Wrap op outputs and record the node when gradients are live.

    ``out_data`` is one ndarray or a list of ndarrays (multi-output ops).
    ``vjp`` maps the list of output-gradient arrays (``None`` for unused
    outputs) to a tuple of input-gradient arrays (``None`` to skip one).
    """
    multi = isinstance(out_data, (list, tuple))
    arrays = list(out_data) if multi else [out_data]
    track = _GRAD_ENABLED and any(t.requires_grad for t in inputs)
    outs = []
    for a in arrays:
        t = Tensor.__new__(Tensor)
        t.data = a if isinstance(a, np.ndarray) else np.asarray(a, dtype=DEFAULT_DTYPE)
        t.requires_grad = track
        t.grad = None
        outs.append(t)
    if track:
        _ACTIVE_TAPE.record(_Node(tuple(inputs), tuple(outs), vjp))
    return tuple(outs) if multi else outs[0]


def backward(loss: Tensor) -> None:
    """Accumulate gradients of a scalar loss into requires_grad tensors.

    Replays the active tape in reverse execution order, touching each
    recorded op exactly once, then clears the tape.
    """
    if loss.data.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.data.shape}")
    tape = _ACTIVE_TAPE
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    owned = {id(grads[id(loss)])}
    for node in reversed(tape._nodes):
        gouts = [grads.get(id(o)) for o in node.outputs]
        if all(g is None for g in gouts):
            continue
        gins = node.vjp(gouts if len(node.outputs) > 1 else gouts[0])
        if not isinstance(gins, tuple):
            gins = (gins,)
        for t, g in zip(node.inputs, gins):
            if g is None:
                continue
            buf = grads.get(id(t))
            if buf is None:
                # own the buffer: vjps may hand back views or shared arrays
                if g.base is not None or id(g) in owned:
                    g = np.array(g)
                grads[id(t)] = g
                owned.add(id(g))
            else:
                buf += g
    for node in tape._nodes:
        for t in node.inputs:
            if t.requires_grad and id(t) in grads:
                g = grads.pop(id(t))
                t.grad = g if t.grad is None else t.grad + g
    if loss.requires_grad and id(loss) in grads:
        loss.grad = grads[id(loss)]
    tape.clear()


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum gradient over axes that numpy broadcasting expanded."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# elementwise arithmetic

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data + b.data

    def vjp(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return apply_op((a, b), out, vjp)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data - b.data

    def vjp(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape)

    return apply_op((a, b), out, vjp)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data * b.data

    def vjp(g):
        return (
            _unbroadcast(g * b.data, a.data.shape),
            _unbroadcast(g * a.data, b.data.shape),
        )

    return apply_op((a, b), out, vjp)


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data / b.data

    def vjp(g):
        return (
            _unbroadcast(g / b.data, a.data.shape),
            _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape),
        )

    return apply_op((a, b), out, vjp)


def neg(a) -> Tensor:
    a = as_tensor(a)
    return apply_op((a,), -a.data, lambda g: (-g,))


def pow_scalar(a, p: float) -> Tensor:
    a = as_tensor(a)
    out = a.data ** p

    def vjp(g):
        return (g * p * a.data ** (p - 1),)

    return apply_op((a,), out, vjp)


def exp(a) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)
    return apply_op((a,), out, lambda g: (g * out,))


def log(a) -> Tensor:
    a = as_tensor(a)
    return apply_op((a,), np.log(a.data), lambda g: (g / a.data,))


def sqrt(a) -> Tensor:
    a = as_tensor(a)
    out = np.sqrt(a.data)
    return apply_op((a,), out, lambda g: (g / (2.0 * out),))


def abs_(a) -> Tensor:
    a = as_tensor(a)
    return apply_op((a,), np.abs(a.data), lambda g: (g * np.sign(a.data),))


# ---------------------------------------------------------------------------
# activations

def _sigmoid(x: np.ndarray) -> np.ndarray:
    # stable for both signs via the saturating tanh identity
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    out = _sigmoid(a.data)
    return apply_op((a,), out, lambda g: (g * out * (1.0 - out),))


def silu(a) -> Tensor:
    """x * sigmoid(x)."""
    a = as_tensor(a)
    s = _sigmoid(a.data)
    out = a.data * s

    def vjp(g):
        return (g * (s + a.data * s * (1.0 - s)),)

    return apply_op((a,), out, vjp)


def softplus(a) -> Tensor:
    """log(1 + e^x), evaluated stably; keeps timescale outputs positive."""
    a = as_tensor(a)
    out = np.maximum(a.data, 0.0) + np.log1p(np.exp(-np.abs(a.data)))

    def vjp(g):
        return (g * _sigmoid(a.data),)

    return apply_op((a,), out, vjp)


def softmax(a, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def vjp(g):
        dot = (g * out).sum(axis=axis, keepdims=True)
        return (out * (g - dot),)

    return apply_op((a,), out, vjp)


# ---------------------------------------------------------------------------
# reductions and shape ops

def sum_(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is None:
            return (np.broadcast_to(g, a.data.shape),)
        ax = axis if isinstance(axis, tuple) else (axis,)
        if not keepdims:
            g = np.expand_dims(g, ax)
        return (np.broadcast_to(g, a.data.shape),)

    return apply_op((a,), out, vjp)


def mean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    out = a.data.mean(axis=axis, keepdims=keepdims)
    scale = a.data.size / out.size

    def vjp(g):
        if axis is None:
            gg = np.broadcast_to(g, a.data.shape)
        else:
            ax = axis if isinstance(axis, tuple) else (axis,)
            gg = g if keepdims else np.expand_dims(g, ax)
            gg = np.broadcast_to(gg, a.data.shape)
        return (gg / scale,)

    return apply_op((a,), out, vjp)


def reshape(a, shape: tuple[int, ...]) -> Tensor:
    a = as_tensor(a)
    out = a.data.reshape(shape)
    return apply_op((a,), out, lambda g: (g.reshape(a.data.shape),))


def transpose(a, axes: tuple[int, ...]) -> Tensor:
    a = as_tensor(a)
    inv = tuple(np.argsort(axes))
    out = np.ascontiguousarray(a.data.transpose(axes))
    return apply_op((a,), out, lambda g: (g.transpose(inv),))


def flip(a, axis: int) -> Tensor:
    a = as_tensor(a)
    out = np.ascontiguousarray(np.flip(a.data, axis=axis))
    return apply_op((a,), out, lambda g: (np.flip(g, axis=axis),))


def getitem(a, idx) -> Tensor:
    a = as_tensor(a)
    out = np.ascontiguousarray(a.data[idx])

    def vjp(g):
        buf = np.zeros_like(a.data)
        buf[idx] = g
        return (buf,)

    return apply_op((a,), out, vjp)


def concat(tensors: Sequence[Tensor], axis: int) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def vjp(g):
        return tuple(np.split(g, splits, axis=axis))

    return apply_op(tuple(tensors), out, vjp)


def stack(tensors: Sequence[Tensor], axis: int) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    out = np.stack([t.data for t in tensors], axis=axis)

    def vjp(g):
        parts = np.split(g, len(tensors), axis=axis)
        return tuple(np.squeeze(p, axis=axis) for p in parts)

    return apply_op(tuple(tensors), out, vjp)


def pad(a, pad_width, mode: str = "constant") -> Tensor:
    """Pad with zeros or reflection; pad_width follows numpy convention."""
    a = as_tensor(a)
    out = np.pad(a.data, pad_width, mode=mode)
    inner = tuple(slice(lo, lo + s) for (lo, _), s in zip(pad_width, a.data.shape))
    if mode == "constant":
        def vjp(g):
            return (g[inner],)
    elif mode == "reflect":
        # scatter-add: each padded entry mirrors one interior entry
        idx_maps = []
        for (lo, hi), s in zip(pad_width, a.data.shape):
            src = np.pad(np.arange(s), (lo, hi), mode="reflect")
            idx_maps.append(src)
        grids = np.meshgrid(*idx_maps, indexing="ij")

        def vjp(g):
            buf = np.zeros_like(a.data)
            np.add.at(buf, tuple(grids), g)
            return (buf,)
    else:
        raise ContractError(f"unsupported pad mode {mode!r}")
    return apply_op((a,), out, vjp)


# ---------------------------------------------------------------------------
# linear algebra

def matmul(a, b) -> Tensor:
    """Matrix product, optionally stacked over identical leading axes.

    2-D @ 2-D, or (..., m, k) @ (k, n), or (..., m, k) @ (..., k, n).
    Backward produces dA = dY.Bᵀ and dB = Aᵀ.dY.
    """
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim < 2 or b.data.ndim < 2:
        raise DimensionError(
            f"matmul needs 2-D or stacked operands, got {a.data.shape} @ {b.data.shape}"
        )
    if a.data.shape[-1] != b.data.shape[-2]:
        raise DimensionError(
            f"matmul inner dimensions disagree: {a.data.shape} @ {b.data.shape}"
        )
    out = np.matmul(a.data, b.data)

    def vjp(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return _unbroadcast(ga, a.data.shape), _unbroadcast(gb, b.data.shape)

    return apply_op((a, b), out, vjp)


# ---------------------------------------------------------------------------
# convolution

def conv2d(x, w, bias=None, stride: int = 1, padding: int = 0, groups: int = 1) -> Tensor:
    """Cross-correlation of NCHW input with (Cout, Cin/groups, kh, kw) kernels.

    Dense convolutions run as one im2col matmul; the depthwise case
    (groups == Cin) runs as kh*kw shifted multiply-adds instead, which
    avoids materialising the window matrix.
    """
    x, w = as_tensor(x), as_tensor(w)
    B, C, H, W = x.data.shape
    Cout, Cg, kh, kw = w.data.shape
    if kh % 2 != 1 or kw % 2 != 1:
        raise DimensionError(f"kernel extents must be odd, got {kh}x{kw}")
    if C != Cg * groups or Cout % groups != 0:
        raise DimensionError(
            f"channel mismatch: input C={C}, kernel expects {Cg}*groups={Cg * groups}, "
            f"Cout={Cout} with groups={groups}"
        )
    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    OH = (H + 2 * padding - kh) // stride + 1
    OW = (W + 2 * padding - kw) // stride + 1
    inputs = [x, w]
    if bias is not None:
        bias = as_tensor(bias)
        inputs.append(bias)

    def col2im(dcols):
        # dcols: (B, C, kh, kw, OH, OW) gradient of each window tap
        gxp = np.zeros_like(xp)
        for u in range(kh):
            for v in range(kw):
                gxp[:, :, u : u + stride * OH : stride,
                    v : v + stride * OW : stride] += dcols[:, :, u, v]
        return gxp[:, :, padding : padding + H, padding : padding + W]

    if groups == C and Cg == 1 and Cout == C:
        # depthwise: kh*kw shifted broadcast multiply-adds
        wd = w.data[:, 0]  # (C, kh, kw)
        out = np.zeros((B, C, OH, OW))
        for u in range(kh):
            for v in range(kw):
                patch = xp[:, :, u : u + stride * OH : stride, v : v + stride * OW : stride]
                out += patch * wd[:, u, v][None, :, None, None]

        def vjp(g):
            gw = np.empty_like(w.data)
            dcols = np.empty((B, C, kh, kw, OH, OW))
            for u in range(kh):
                for v in range(kw):
                    patch = xp[:, :, u : u + stride * OH : stride,
                               v : v + stride * OW : stride]
                    gw[:, 0, u, v] = (g * patch).sum(axis=(0, 2, 3))
                    dcols[:, :, u, v] = g * wd[:, u, v][None, :, None, None]
            gx = col2im(dcols)
            if bias is not None:
                return gx, gw, g.sum(axis=(0, 2, 3))
            return gx, gw

    elif groups == 1:
        win = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(2, 3))
        win = win[:, :, ::stride, ::stride]  # (B, C, OH, OW, kh, kw)
        cols = np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4, 5))
        cols = cols.reshape(B * OH * OW, C * kh * kw)
        wmat = w.data.reshape(Cout, C * kh * kw)
        out = (cols @ wmat.T).reshape(B, OH, OW, Cout).transpose(0, 3, 1, 2)
        out = np.ascontiguousarray(out)

        def vjp(g):
            gmat = np.ascontiguousarray(g.transpose(0, 2, 3, 1)).reshape(B * OH * OW, Cout)
            gw = (gmat.T @ cols).reshape(w.data.shape)
            dcols = (gmat @ wmat).reshape(B, OH, OW, C, kh, kw)
            dcols = dcols.transpose(0, 3, 4, 5, 1, 2)
            gx = col2im(dcols)
            if bias is not None:
                return gx, gw, g.sum(axis=(0, 2, 3))
            return gx, gw

    else:
        # general grouped case: per-group im2col matmuls
        Og = Cout // groups
        win = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(2, 3))
        win = win[:, :, ::stride, ::stride].reshape(B, groups, Cg, OH, OW, kh, kw)
        colsg = np.ascontiguousarray(win.transpose(1, 0, 3, 4, 2, 5, 6))
        colsg = colsg.reshape(groups, B * OH * OW, Cg * kh * kw)
        wg = w.data.reshape(groups, Og, Cg * kh * kw)
        out = np.matmul(colsg, wg.transpose(0, 2, 1))  # (groups, B*OH*OW, Og)
        out = out.reshape(groups, B, OH, OW, Og).transpose(1, 0, 4, 2, 3)
        out = np.ascontiguousarray(out).reshape(B, Cout, OH, OW)

        def vjp(g):
            gg = g.reshape(B, groups, Og, OH, OW).transpose(1, 0, 3, 4, 2)
            gg = np.ascontiguousarray(gg).reshape(groups, B * OH * OW, Og)
            gw = np.matmul(gg.transpose(0, 2, 1), colsg).reshape(w.data.shape)
            dcols = np.matmul(gg, wg)  # (groups, B*OH*OW, Cg*kh*kw)
            dcols = dcols.reshape(groups, B, OH, OW, Cg, kh, kw)
            dcols = dcols.transpose(1, 0, 4, 5, 6, 2, 3).reshape(B, C, kh, kw, OH, OW)
            gx = col2im(np.ascontiguousarray(dcols))
            if bias is not None:
                return gx, gw, g.sum(axis=(0, 2, 3))
            return gx, gw

    if bias is not None:
        out = out + bias.data.reshape(1, Cout, 1, 1)
    return apply_op(tuple(inputs), out, vjp)


# ---------------------------------------------------------------------------
# normalisation

def layer_norm(x, gain, bias, eps: float = 1e-6) -> Tensor:
    """Zero mean / unit variance over the last axis, then affine."""
    if eps <= 0:
        raise ContractError(f"layer_norm eps must be positive, got {eps}")
    x, gain, bias = as_tensor(x), as_tensor(gain), as_tensor(bias)
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = xhat * gain.data + bias.data

    def vjp(g):
        dgain = _unbroadcast(g * xhat, gain.data.shape)
        dbias = _unbroadcast(g, bias.data.shape)
        dxhat = g * gain.data
        m1 = dxhat.mean(axis=-1, keepdims=True)
        m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
        dx = inv * (dxhat - m1 - xhat * m2)
        return dx, dgain, dbias

    return apply_op((x, gain, bias), out, vjp)


def group_norm(x, groups: int, gain, bias, eps: float = 1e-6) -> Tensor:
    """Normalise each channel-group's (C/groups)*H*W block, then per-channel affine."""
    from .errors import ConfigurationError

    x, gain, bias = as_tensor(x), as_tensor(gain), as_tensor(bias)
    B, C, H, W = x.data.shape
    if C % groups != 0:
        raise ConfigurationError(f"channels {C} not divisible by groups {groups}")
    xg = x.data.reshape(B, groups, -1)
    mu = xg.mean(axis=-1, keepdims=True)
    xc = xg - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (xc * inv).reshape(B, C, H, W)
    gm = gain.data.reshape(1, C, 1, 1)
    out = xhat * gm + bias.data.reshape(1, C, 1, 1)

    def vjp(g):
        dgain = (g * xhat).sum(axis=(0, 2, 3)).reshape(gain.data.shape)
        dbias = g.sum(axis=(0, 2, 3)).reshape(bias.data.shape)
        dxhat = (g * gm).reshape(B, groups, -1)
        xh = xhat.reshape(B, groups, -1)
        m1 = dxhat.mean(axis=-1, keepdims=True)
        m2 = (dxhat * xh).mean(axis=-1, keepdims=True)
        dx = (inv * (dxhat - m1 - xh * m2)).reshape(B, C, H, W)
        return dx, dgain, dbias

    return apply_op((x, gain, bias), out, vjp)


# ---------------------------------------------------------------------------
# centered unitary 2-D DFT on real/imag channel pairs (for the frequency loss)

def _fft2c(z: np.ndarray) -> np.ndarray:
    shifted = np.fft.ifftshift(z, axes=(-2, -1))
    spec = np.fft.fft2(shifted, axes=(-2, -1), norm="ortho")
    return np.fft.fftshift(spec, axes=(-2, -1))


def _ifft2c(z: np.ndarray) -> np.ndarray:
    shifted = np.fft.ifftshift(z, axes=(-2, -1))
    img = np.fft.ifft2(shifted, axes=(-2, -1), norm="ortho")
    return np.fft.fftshift(img, axes=(-2, -1))


def fft2_centered(x) -> Tensor:
    """Unitary centered 2-D DFT of (..., 1|2, H, W) channel-encoded images.

    Channel 0 is the real part, channel 1 (when present) the imaginary part.
    Output always has two channels. The adjoint (= inverse, by unitarity)
    drives the backward pass.
    """
    x = as_tensor(x)
    nc = x.data.shape[-3]
    if nc not in (1, 2):
        raise DimensionError(f"expected 1 or 2 channels, got {nc}")
    z = x.data[..., 0, :, :] + (1j * x.data[..., 1, :, :] if nc == 2 else 0.0)
    spec = _fft2c(z)
    out = np.stack([spec.real, spec.imag], axis=-3)

    def vjp(g):
        gz = g[..., 0, :, :] + 1j * g[..., 1, :, :]
        back = _ifft2c(gz)
        if nc == 2:
            gx = np.stack([back.real, back.imag], axis=-3)
        else:
            gx = back.real[..., None, :, :]
        return (gx,)

    return apply_op((x,), out, vjp)
