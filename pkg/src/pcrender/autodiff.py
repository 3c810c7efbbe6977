"""Minimal reverse-mode autodiff over dense float64 numpy arrays.

Every operation records its parents and a gradient closure on the output
tensor; ``Tensor.backward`` walks the recorded graph once in reverse
topological order. Float64 is used throughout so central finite-difference
checks resolve gradients to ~1e-4 relative error.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np

_GRAD_ENABLED = True
_NAN_GUARD = False


def set_nan_guard(enabled: bool) -> None:
    """Toggle finite-value assertion on every op output (off by default)."""
    global _NAN_GUARD
    _NAN_GUARD = bool(enabled)


@contextmanager
def no_grad():
    """Run forward passes without recording the graph."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


class Tensor:
    """Dense float64 array with an optional accumulated gradient."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_grads_fn", "name")

    def __init__(self, data, requires_grad: bool = False, name: str = ""):
        self.data = np.asarray(data, dtype=np.float64)
        if _NAN_GUARD and not np.all(np.isfinite(self.data)):
            raise FloatingPointError(f"non-finite values in tensor {name!r}")
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._grads_fn = None
        self.name = name

    # -- construction ------------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    @property
    def ndim(self):
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # -- backward ----------------------------------------------------------

    def backward(self, grad=None) -> None:
        """Accumulate gradients of this tensor into every reachable leaf.

        Visits each recorded node exactly once, in reverse topological
        order. ``grad`` defaults to ones (the tensor is then expected to
        be scalar-valued, i.e. a loss).
        """
        if grad is None:
            if self.data.size != 1:
                raise ValueError(
                    f"backward() without an explicit gradient requires a scalar, got shape {self.data.shape}"
                )
            grad = np.ones_like(self.data)
        order = _toposort(self)
        self.grad = np.asarray(grad, dtype=np.float64) if self.grad is None \
            else self.grad + np.asarray(grad, dtype=np.float64)
        for node in order:
            if node._grads_fn is None or node.grad is None:
                continue
            for parent, g in zip(node._parents, node._grads_fn(node.grad)):
                if g is None or not parent.requires_grad:
                    continue
                if g.shape != parent.data.shape:
                    raise ValueError(
                        f"gradient shape {g.shape} does not match parent shape {parent.data.shape}"
                    )
                if _NAN_GUARD and not np.all(np.isfinite(g)):
                    raise FloatingPointError("non-finite gradient")
                parent.grad = g if parent.grad is None else parent.grad + g
            if node._parents:
                # Intermediate grads are not part of the public contract;
                # free them so long training loops do not retain memory.
                node.grad = None if node is not self else node.grad

    # -- operator sugar ------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __pow__(self, exponent):
        return power(self, exponent)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return getitem(self, idx)

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis=axis, keepdims=keepdims)

    def max(self):
        return reduce_max(self)

    def min(self):
        return reduce_min(self)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes or None)


def _toposort(root: Tensor):
    """Depth-first postorder over parents, returned in reverse (root first)."""
    order, visited, stack = [], set(), [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in visited:
                stack.append((p, False))
    order.reverse()
    return order


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(data, parents, grads_fn) -> Tensor:
    """Wrap an op output, recording the graph only when it can matter."""
    if _NAN_GUARD and not np.all(np.isfinite(data)):
        raise FloatingPointError("non-finite values in op output")
    rg = _GRAD_ENABLED and any(p.requires_grad for p in parents)
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.requires_grad = rg
    out._parents = parents if rg else ()
    out._grads_fn = grads_fn if rg else None
    out.name = ""
    return out


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Sum a gradient back down to ``shape`` after numpy broadcasting."""
    if g.shape == tuple(shape):
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# ---------------------------------------------------------------------------
# elementwise / arithmetic
# ---------------------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _result(a.data + b.data, (a, b),
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _result(a.data - b.data, (a, b),
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _result(a.data * b.data, (a, b),
                   lambda g: (_unbroadcast(g * b.data, a.shape),
                              _unbroadcast(g * a.data, b.shape)))


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _result(a.data / b.data, (a, b),
                   lambda g: (_unbroadcast(g / b.data, a.shape),
                              _unbroadcast(-g * a.data / (b.data * b.data), b.shape)))


def power(x, exponent: float) -> Tensor:
    x = as_tensor(x)
    p = float(exponent)
    return _result(x.data ** p, (x,),
                   lambda g: (g * p * x.data ** (p - 1.0),))


def log(x) -> Tensor:
    x = as_tensor(x)
    return _result(np.log(x.data), (x,), lambda g: (g / x.data,))


def sqrt(x) -> Tensor:
    x = as_tensor(x)
    out = np.sqrt(x.data)
    return _result(out, (x,), lambda g: (g / (2.0 * out),))


def absolute(x) -> Tensor:
    """|x| with sign subgradient (0 at x=0)."""
    x = as_tensor(x)
    return _result(np.abs(x.data), (x,), lambda g: (g * np.sign(x.data),))


def hypot(a, b) -> Tensor:
    """sqrt(a^2 + b^2) with a safe zero subgradient at the origin."""
    a, b = as_tensor(a), as_tensor(b)
    m = np.hypot(a.data, b.data)

    def grads(g):
        safe = np.where(m == 0.0, 1.0, m)
        zero = m == 0.0
        ga = g * np.where(zero, 0.0, a.data / safe)
        gb = g * np.where(zero, 0.0, b.data / safe)
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return _result(m, (a, b), grads)


def clip(x, lo: float, hi: float) -> Tensor:
    """Clamp to [lo, hi]; gradient passes through the closed interval."""
    x = as_tensor(x)
    inside = (x.data >= lo) & (x.data <= hi)
    return _result(np.clip(x.data, lo, hi), (x,),
                   lambda g: (g * inside,))


def leaky_relu(x, slope: float = 0.2) -> Tensor:
    x = as_tensor(x)
    s = float(slope)
    pos = x.data > 0
    return _result(np.where(pos, x.data, s * x.data), (x,),
                   lambda g: (g * np.where(pos, 1.0, s),))


# ---------------------------------------------------------------------------
# shape manipulation
# ---------------------------------------------------------------------------

def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    src = x.shape
    return _result(x.data.reshape(shape), (x,),
                   lambda g: (g.reshape(src),))


def transpose(x, axes=None) -> Tensor:
    x = as_tensor(x)
    if axes is None:
        axes = tuple(reversed(range(x.ndim)))
    inv = np.argsort(axes)
    return _result(np.transpose(x.data, axes), (x,),
                   lambda g: (np.transpose(g, inv),))


def getitem(x, idx) -> Tensor:
    x = as_tensor(x)

    def grads(g):
        gx = np.zeros_like(x.data)
        gx[idx] = g
        return (gx,)

    return _result(x.data[idx], (x,), grads)


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    shapes = [t.shape for t in tensors]
    for s in shapes[1:]:
        if len(s) != len(shapes[0]) or any(
                i != axis % len(s) and a != b for i, (a, b) in enumerate(zip(shapes[0], s))):
            raise ValueError(f"concat shape mismatch along axis {axis}: {shapes}")
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def grads(g):
        return tuple(np.split(g, splits, axis=axis))

    return _result(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), grads)


# ---------------------------------------------------------------------------
# reductions
# ---------------------------------------------------------------------------

def sum_(x, axis=None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)

    def grads(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return _result(np.sum(x.data, axis=axis, keepdims=keepdims), (x,), grads)


def mean(x, axis=None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    n = x.size if axis is None else np.prod([x.shape[a] for a in np.atleast_1d(axis)])
    return sum_(x, axis=axis, keepdims=keepdims) * (1.0 / float(n))


def _arg_extreme(x: Tensor, kind: str) -> Tensor:
    # Winner-takes-gradient; ties resolve to the lowest flat index.
    flat = x.data.ravel()
    idx = int(np.argmax(flat)) if kind == "max" else int(np.argmin(flat))

    def grads(g):
        gx = np.zeros_like(x.data)
        gx.ravel()[idx] = g
        return (gx,)

    return _result(np.asarray(flat[idx]), (x,), grads)


def reduce_max(x) -> Tensor:
    return _arg_extreme(as_tensor(x), "max")


def reduce_min(x) -> Tensor:
    return _arg_extreme(as_tensor(x), "min")


# ---------------------------------------------------------------------------
# linear algebra
# ---------------------------------------------------------------------------

def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError(f"matmul expects 2-D operands, got {a.shape} @ {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul inner dims differ: {a.shape} @ {b.shape}")
    return _result(a.data @ b.data, (a, b),
                   lambda g: (g @ b.data.T, a.data.T @ g))


# ---------------------------------------------------------------------------
# convolutions and pooling
# ---------------------------------------------------------------------------

def _pair(v):
    return (int(v), int(v)) if np.isscalar(v) else tuple(int(i) for i in v)


def _conv_windows(xp: np.ndarray, kernel, stride):
    """Strided sliding-window view over the trailing spatial axes."""
    spatial = xp.shape[2:]
    outs = tuple((n - k) // s + 1 for n, k, s in zip(spatial, kernel, stride))
    if any(o < 1 for o in outs):
        raise ValueError(
            f"kernel {kernel} with stride {stride} does not fit padded input {xp.shape}")
    st = xp.strides
    shape = xp.shape[:2] + outs + tuple(kernel)
    strides = st[:2] + tuple(s * st[2 + i] for i, s in enumerate(stride)) + st[2:]
    return np.lib.stride_tricks.as_strided(xp, shape, strides), outs


def _conv_nd(x: Tensor, w: Tensor, b, stride, padding, nd: int) -> Tensor:
    kernel = w.shape[2:]
    if x.ndim != nd + 2 or w.ndim != nd + 2:
        raise ValueError(f"conv{nd}d expects {nd + 2}-D input/kernel, got {x.shape} and {w.shape}")
    if x.shape[1] != w.shape[1]:
        raise ValueError(f"conv{nd}d channel mismatch: input {x.shape} vs kernel {w.shape}")
    pad_width = ((0, 0), (0, 0)) + tuple((p, p) for p in padding)
    xp = np.pad(x.data, pad_width)
    win, outs = _conv_windows(xp, kernel, stride)
    spatial_axes = tuple(range(2, 2 + nd))
    win_k_axes = tuple(range(2 + nd, 2 + 2 * nd))
    # (N, C, *out, *kernel) x (Co, C, *kernel) -> (N, *out, Co)
    out = np.tensordot(win, w.data, axes=((1,) + win_k_axes, (1,) + tuple(range(2, 2 + nd))))
    out = np.moveaxis(out, -1, 1)
    if b is not None:
        out = out + b.data.reshape((1, -1) + (1,) * nd)
    parents = (x, w) if b is None else (x, w, b)

    def grads(g):
        gw = np.tensordot(g, win, axes=((0,) + spatial_axes, (0,) + spatial_axes))
        gxp = np.zeros_like(xp)
        for offset in np.ndindex(*kernel):
            # out = sum over kernel offsets of w[..., offset] applied to strided slices
            contrib = np.tensordot(g, w.data[(slice(None), slice(None)) + offset], axes=([1], [0]))
            contrib = np.moveaxis(contrib, -1, 1)
            sl = tuple(slice(o, o + n * s, s) for o, n, s in zip(offset, outs, stride))
            gxp[(slice(None), slice(None)) + sl] += contrib
        crop = tuple(slice(p, p + n) for p, n in zip(padding, x.shape[2:]))
        gx = gxp[(slice(None), slice(None)) + crop]
        if b is None:
            return gx, gw
        return gx, gw, g.sum(axis=(0,) + spatial_axes)

    return _result(out, parents, grads)


def conv2d(x, w, b=None, stride=1, padding=0) -> Tensor:
    """Cross-correlation over (N, C, H, W); per-axis stride/padding allowed."""
    return _conv_nd(as_tensor(x), as_tensor(w), None if b is None else as_tensor(b),
                    _pair(stride), _pair(padding), nd=2)


def conv3d(x, w, b=None, stride=1, padding=0) -> Tensor:
    """Cross-correlation over (N, C, D, H, W); per-axis stride/padding allowed."""
    s = (stride,) * 3 if np.isscalar(stride) else tuple(int(i) for i in stride)
    p = (padding,) * 3 if np.isscalar(padding) else tuple(int(i) for i in padding)
    return _conv_nd(as_tensor(x), as_tensor(w), None if b is None else as_tensor(b), s, p, nd=3)


def maxpool2d(x, k: int = 2) -> Tensor:
    """Non-overlapping k x k max pooling; ties give gradient to the lowest index."""
    x = as_tensor(x)
    N, C, H, W = x.shape
    if H % k or W % k:
        raise ValueError(f"maxpool2d needs dims divisible by {k}, got {x.shape}")
    blocks = x.data.reshape(N, C, H // k, k, W // k, k).transpose(0, 1, 2, 4, 3, 5)
    flat = blocks.reshape(N, C, H // k, W // k, k * k)
    win = np.argmax(flat, axis=-1)
    out = np.take_along_axis(flat, win[..., None], axis=-1)[..., 0]

    def grads(g):
        gf = np.zeros_like(flat)
        np.put_along_axis(gf, win[..., None], g[..., None], axis=-1)
        gx = gf.reshape(N, C, H // k, W // k, k, k).transpose(0, 1, 2, 4, 3, 5)
        return (gx.reshape(N, C, H, W),)

    return _result(out, (x,), grads)


def avgpool2d(x, k: int = 2) -> Tensor:
    x = as_tensor(x)
    N, C, H, W = x.shape
    if H % k or W % k:
        raise ValueError(f"avgpool2d needs dims divisible by {k}, got {x.shape}")
    out = x.data.reshape(N, C, H // k, k, W // k, k).mean(axis=(3, 5))

    def grads(g):
        gx = np.repeat(np.repeat(g, k, axis=2), k, axis=3) / float(k * k)
        return (gx,)

    return _result(out, (x,), grads)


def upsample_nearest(x, factor: int = 2) -> Tensor:
    """Repeat every spatial sample ``factor`` times along each trailing axis."""
    x = as_tensor(x)
    f = int(factor)
    nd = x.ndim - 2
    data = x.data
    for ax in range(2, 2 + nd):
        data = np.repeat(data, f, axis=ax)

    def grads(g):
        for ax in range(2, 2 + nd):
            shape = g.shape[:ax] + (g.shape[ax] // f, f) + g.shape[ax + 1:]
            g = g.reshape(shape).sum(axis=ax + 1)
        return (g,)

    return _result(data, (x,), grads)


def instance_norm(x, eps: float = 1e-5) -> Tensor:
    """Normalize each (sample, channel) slice over its spatial extent."""
    x = as_tensor(x)
    if x.ndim < 3:
        raise ValueError(f"instance_norm needs (N, C, spatial...) input, got {x.shape}")
    axes = tuple(range(2, x.ndim))
    mu = x.data.mean(axis=axes, keepdims=True)
    var = x.data.var(axis=axes, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xh = (x.data - mu) * inv

    def grads(g):
        gm = g.mean(axis=axes, keepdims=True)
        gxh = (g * xh).mean(axis=axes, keepdims=True)
        return (inv * (g - gm - xh * gxh),)

    return _result(xh, (x,), grads)
