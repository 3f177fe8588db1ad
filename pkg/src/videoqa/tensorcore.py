"""Dense float tensors with tape-based reverse-mode differentiation.

Operations executed while a :class:`ComputeGraph` is active are appended to
it in execution order, so the tape is already topologically sorted and
``backward`` just walks it in reverse. Outside a graph, ops run in plain
inference mode and record nothing.

All storage is float32 by default. :func:`precision` switches the storage
type (float64 is used by the finite-difference checks). Reductions
accumulate in float64 regardless.
"""

from __future__ import annotations

import contextlib
import struct
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import (
    ContractError,
    DimensionError,
    LoadError,
    NumericError,
    TruncatedPayloadError,
    VersionMismatchError,
)
from .rng import SplitMix64

_dtype = np.float32
_active: list["ComputeGraph"] = []

LOG_CLAMP = 1e-12


@contextlib.contextmanager
def precision(dtype):
    """Temporarily change the storage dtype of newly created tensors."""
    global _dtype
    old = _dtype
    _dtype = np.dtype(dtype).type
    try:
        yield
    finally:
        _dtype = old


def default_dtype():
    return _dtype


class Tensor:
    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.ascontiguousarray(data, dtype=_dtype)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() on tensor of shape {self.shape}")
        return float(self.data.reshape(()))

    def __repr__(self):
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{label})"

    def __len__(self):
        return self.data.shape[0]

    # arithmetic sugar; every method defers to the module-level op
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

    def __neg__(self):
        return mul(self, -1.0)

    def __truediv__(self, other):
        return div(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes)


class Parameter(Tensor):
    """A trainable leaf tensor; ``grad`` always exists and matches ``data``."""

    def __init__(self, data, name: str):
        super().__init__(data, requires_grad=True, name=name)
        self.grad = np.zeros_like(self.data)

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.shape})"


@dataclass
class _Node:
    out: Tensor
    inputs: tuple[Tensor, ...]
    backward: Callable[[np.ndarray], Sequence[np.ndarray | None]]


class ComputeGraph:
    """Tape of executed ops. Use as a context manager around a forward pass."""

    def __init__(self):
        self.nodes: list[_Node] = []

    def __enter__(self):
        _active.append(self)
        return self

    def __exit__(self, *exc):
        _active.remove(self)
        return False

    def __len__(self):
        return len(self.nodes)

    def reset(self):
        self.nodes.clear()

    def backward(self, loss: Tensor):
        backward(loss, self)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _check_finite(arr: np.ndarray, op: str) -> None:
    if not np.isfinite(arr).all():
        raise NumericError(f"non-finite values produced by {op}")


def _record(op: str, out_data: np.ndarray, inputs: tuple[Tensor, ...], backward_fn) -> Tensor:
    _check_finite(out_data, op)
    needs = any(t.requires_grad for t in inputs)
    out = Tensor(out_data, requires_grad=needs and bool(_active))
    if out.requires_grad:
        _active[-1].nodes.append(_Node(out, inputs, backward_fn))
    return out


def backward(loss: Tensor, graph: ComputeGraph) -> None:
    """Accumulate d(loss)/d(leaf) into ``.grad`` of every leaf on the tape.

    The tape is left intact, so calling this twice adds the gradients twice.
    """
    if loss.data.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    produced = {id(n.out) for n in graph.nodes}
    if id(loss) not in produced:
        raise ContractError("loss was not produced by this graph")
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(graph.nodes):
        g = grads.pop(id(node.out), None)
        if g is None:
            continue
        in_grads = node.backward(g)
        for t, gi in zip(node.inputs, in_grads):
            if gi is None or not t.requires_grad:
                continue
            gi = np.asarray(gi, dtype=t.data.dtype)
            if id(t) in produced:
                if id(t) in grads:
                    grads[id(t)] = grads[id(t)] + gi
                else:
                    grads[id(t)] = gi
            else:
                if t.grad is None:
                    t.grad = np.zeros_like(t.data)
                t.grad += gi


def zero_grads(params: Iterable[Tensor]) -> None:
    for p in params:
        if p.grad is None:
            p.grad = np.zeros_like(p.data)
        else:
            p.grad.fill(0)


def clip_grad_norm(params: Iterable[Tensor], max_norm: float) -> float:
    """Rescale gradients so their global L2 norm is at most ``max_norm``; returns the norm before."""
    params = list(params)
    norm = float(np.sqrt(sum(float(np.sum(np.square(p.grad, dtype=np.float64))) for p in params)))
    if not np.isfinite(norm):
        raise NumericError("non-finite gradient norm")
    if norm > max_norm > 0:
        scale = max_norm / norm
        for p in params:
            p.grad = p.grad * scale
    return norm


def sgd_step(params: Iterable[Parameter], lr: float) -> None:
    params = list(params)
    for p in params:
        if not np.isfinite(p.grad).all():
            raise NumericError(f"non-finite gradient in parameter {p.name!r}")
    for p in params:
        p.data = (p.data - p.data.dtype.type(lr) * p.grad).astype(p.data.dtype)


def glorot_uniform(shape, fan_in: int, fan_out: int, rng: SplitMix64) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    n = int(np.prod(shape))
    return rng.uniform_array(n, -bound, bound).reshape(shape).astype(_dtype)


def he_uniform(shape, fan_in: int, rng: SplitMix64) -> np.ndarray:
    """Variance-preserving init for layers followed by a ReLU."""
    bound = np.sqrt(6.0 / fan_in)
    n = int(np.prod(shape))
    return rng.uniform_array(n, -bound, bound).reshape(shape).astype(_dtype)


# ----------------------------------------------------------------------------
# elementwise and structural ops
# ----------------------------------------------------------------------------

def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data + b.data
    return _record("add", out, (a, b),
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data - b.data
    return _record("sub", out, (a, b),
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data * b.data
    return _record("mul", out, (a, b),
                   lambda g: (_unbroadcast(g * b.data, a.shape),
                              _unbroadcast(g * a.data, b.shape)))


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data / b.data
    return _record("div", out, (a, b),
                   lambda g: (_unbroadcast(g / b.data, a.shape),
                              _unbroadcast(-g * a.data / (b.data * b.data), b.shape)))


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul shapes {a.shape} and {b.shape}")
    out = a.data @ b.data
    return _record("matmul", out, (a, b), lambda g: (g @ b.data.T, a.data.T @ g))


def sum_(x, axis=None, keepdims=False) -> Tensor:
    x = as_tensor(x)
    out = np.sum(x.data, axis=axis, keepdims=keepdims, dtype=np.float64).astype(x.data.dtype)

    def bw(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return _record("sum", np.asarray(out), (x,), bw)


def mean(x, axis=None, keepdims=False) -> Tensor:
    x = as_tensor(x)
    if axis is None:
        n = x.data.size
    else:
        axes = axis if isinstance(axis, tuple) else (axis,)
        n = int(np.prod([x.shape[a] for a in axes]))
    return mul(sum_(x, axis=axis, keepdims=keepdims), 1.0 / n)


def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    try:
        out = x.data.reshape(shape)
    except ValueError as exc:
        raise DimensionError(str(exc)) from None
    return _record("reshape", out, (x,), lambda g: (g.reshape(x.shape),))


def transpose(x, axes) -> Tensor:
    x = as_tensor(x)
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))
    out = np.ascontiguousarray(x.data.transpose(axes))
    return _record("transpose", out, (x,), lambda g: (g.transpose(inv),))


def concat(tensors: Sequence, axis: int = 0) -> Tensor:
    ts = tuple(as_tensor(t) for t in tensors)
    out = np.concatenate([t.data for t in ts], axis=axis)
    bounds = np.cumsum([t.shape[axis] for t in ts])[:-1]
    return _record("concat", out, ts, lambda g: tuple(np.split(g, bounds, axis=axis)))


def stack(tensors: Sequence, axis: int = 0) -> Tensor:
    ts = tuple(as_tensor(t) for t in tensors)
    out = np.stack([t.data for t in ts], axis=axis)
    return _record("stack", out, ts,
                   lambda g: tuple(np.take(g, i, axis=axis) for i in range(len(ts))))


def relu(x) -> Tensor:
    x = as_tensor(x)
    mask = x.data > 0
    return _record("relu", x.data * mask, (x,), lambda g: (g * mask,))


def clamp(x, lo: float = 0.0, hi: float = 1.0) -> Tensor:
    """Clip into [lo, hi]; the gradient passes where lo <= x <= hi."""
    x = as_tensor(x)
    mask = (x.data >= lo) & (x.data <= hi)
    return _record("clamp", np.clip(x.data, lo, hi), (x,), lambda g: (g * mask,))


def prod(x, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    axis = axis % x.ndim
    data = x.data.astype(np.float64)
    out = np.prod(data, axis=axis)

    def bw(g):
        # product of all other entries via exclusive prefix/suffix products
        ones = np.ones_like(np.take(data, [0], axis=axis))
        pre = np.cumprod(np.concatenate([ones, data], axis=axis), axis=axis)
        pre = np.take(pre, range(data.shape[axis]), axis=axis)
        rev = np.flip(data, axis=axis)
        suf = np.cumprod(np.concatenate([ones, rev], axis=axis), axis=axis)
        suf = np.flip(np.take(suf, range(data.shape[axis]), axis=axis), axis=axis)
        return (np.expand_dims(g, axis) * pre * suf,)

    return _record("prod", out.astype(x.data.dtype), (x,), bw)


def linear(x, w, b) -> Tensor:
    x, w, b = as_tensor(x), as_tensor(w), as_tensor(b)
    if x.ndim != 2 or w.ndim != 2 or x.shape[1] != w.shape[0] or b.shape != (w.shape[1],):
        raise DimensionError(f"linear shapes x{x.shape} w{w.shape} b{b.shape}")
    out = x.data @ w.data + b.data
    return _record("linear", out, (x, w, b),
                   lambda g: (g @ w.data.T, x.data.T @ g,
                              g.sum(axis=0, dtype=np.float64)))


def softmax(x) -> Tensor:
    x = as_tensor(x)
    z = x.data.astype(np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=-1, keepdims=True)

    def bw(g):
        g = g.astype(np.float64)
        return (p * (g - (g * p).sum(axis=-1, keepdims=True)),)

    return _record("softmax", p.astype(x.data.dtype), (x,), bw)


def cross_entropy(probs, labels) -> Tensor:
    """Mean negative log-probability of ``labels`` under row distributions."""
    probs = as_tensor(probs)
    labels = np.asarray(labels, dtype=np.int64)
    if probs.ndim != 2 or labels.shape != (probs.shape[0],):
        raise DimensionError(f"cross_entropy shapes {probs.shape} vs labels {labels.shape}")
    n, k = probs.shape
    if n == 0:
        raise ContractError("cross_entropy over an empty batch")
    if labels.min() < 0 or labels.max() >= k:
        raise IndexError(f"label out of range for {k} classes")
    rows = np.arange(n)
    picked = probs.data[rows, labels].astype(np.float64)
    if (picked < LOG_CLAMP).any():
        warnings.warn("cross_entropy: probability below 1e-12 clamped", RuntimeWarning)
    safe = np.maximum(picked, LOG_CLAMP)
    out = -np.log(safe).mean()

    def bw(g):
        grad = np.zeros(probs.shape, dtype=np.float64)
        grad[rows, labels] = np.where(picked >= LOG_CLAMP, -1.0 / (n * safe), 0.0)
        return (grad * g,)

    return _record("cross_entropy", np.asarray(out), (probs,), bw)


# ----------------------------------------------------------------------------
# convolutions
# ----------------------------------------------------------------------------

def _out_size(n: int, k: int, stride: int, pad: int) -> int:
    return (n + 2 * pad - k) // stride + 1


def conv2d(x, kernel, bias, stride: int = 1, pad: int = 0) -> Tensor:
    """Cross-correlation of ``x[N,C,H,W]`` with ``kernel[M,C,d,d]`` plus bias."""
    x, kernel, bias = as_tensor(x), as_tensor(kernel), as_tensor(bias)
    if x.ndim != 4 or kernel.ndim != 4:
        raise DimensionError(f"conv2d expects 4-d input and kernel, got {x.shape}, {kernel.shape}")
    n, c, h, w = x.shape
    m, kc, d, d2 = kernel.shape
    if kc != c or d != d2 or bias.shape != (m,):
        raise DimensionError(f"conv2d kernel {kernel.shape}/bias {bias.shape} vs input {x.shape}")
    if stride < 1 or d > h + 2 * pad or d > w + 2 * pad:
        raise DimensionError(f"conv2d kernel {d} with pad {pad} does not fit {h}x{w}")
    ho, wo = _out_size(h, d, stride, pad), _out_size(w, d, stride, pad)
    # channel-last im2col: columns ordered (ky, kx, c), gathered by d*d strided slices
    xh = np.zeros((n, h + 2 * pad, w + 2 * pad, c), dtype=x.data.dtype)
    xh[:, pad:pad + h, pad:pad + w] = x.data.transpose(0, 2, 3, 1)
    cols = np.empty((n, ho, wo, d, d, c), dtype=x.data.dtype)
    for i in range(d):
        for j in range(d):
            cols[:, :, :, i, j] = xh[:, i:i + stride * ho:stride, j:j + stride * wo:stride]
    cols = cols.reshape(n * ho * wo, d * d * c)
    kmat = kernel.data.transpose(0, 2, 3, 1).reshape(m, d * d * c)
    out = (cols @ kmat.T + bias.data).reshape(n, ho, wo, m).transpose(0, 3, 1, 2)

    def bw(g):
        gm = np.ascontiguousarray(g.transpose(0, 2, 3, 1)).reshape(n * ho * wo, m)
        gk = (gm.T @ cols).reshape(m, d, d, c).transpose(0, 3, 1, 2)
        gb = gm.sum(axis=0, dtype=np.float64)
        gx = None
        if x.requires_grad:
            gcols = (gm @ kmat).reshape(n, ho, wo, d, d, c)
            gxh = np.zeros(xh.shape, dtype=np.result_type(gcols.dtype, xh.dtype))
            for i in range(d):
                for j in range(d):
                    gxh[:, i:i + stride * ho:stride, j:j + stride * wo:stride] += gcols[:, :, :, i, j]
            gx = gxh[:, pad:pad + h, pad:pad + w].transpose(0, 3, 1, 2)
        return gx, gk, gb

    return _record("conv2d", np.ascontiguousarray(out), (x, kernel, bias), bw)


def conv1d_temporal(x, kernel, bias, stride: int = 1, pad: int = 0) -> Tensor:
    """Convolve ``x[N,C,F,L]`` with ``kernel[M,C,t]`` along the frame axis F only."""
    x, kernel, bias = as_tensor(x), as_tensor(kernel), as_tensor(bias)
    if x.ndim != 4 or kernel.ndim != 3:
        raise DimensionError(f"conv1d_temporal expects 4-d input and 3-d kernel, got {x.shape}, {kernel.shape}")
    n, c, f, l = x.shape
    m, kc, t = kernel.shape
    if kc != c or bias.shape != (m,):
        raise DimensionError(f"conv1d_temporal kernel {kernel.shape}/bias {bias.shape} vs input {x.shape}")
    if stride < 1 or t > f + 2 * pad:
        raise DimensionError(f"temporal kernel {t} with pad {pad} does not fit {f} frames")
    fo = _out_size(f, t, stride, pad)
    xp = np.pad(x.data, ((0, 0), (0, 0), (pad, pad), (0, 0))) if pad else x.data
    win = sliding_window_view(xp, t, axis=2)[:, :, ::stride][:, :, :fo]  # N,C,Fo,L,t
    cols = np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4)).reshape(n * fo * l, c * t)
    kmat = kernel.data.reshape(m, c * t)
    out = (cols @ kmat.T + bias.data).reshape(n, fo, l, m).transpose(0, 3, 1, 2)

    def bw(g):
        gm = np.ascontiguousarray(g.transpose(0, 2, 3, 1)).reshape(n * fo * l, m)
        gk = (gm.T @ cols).reshape(kernel.shape)
        gb = gm.sum(axis=0, dtype=np.float64)
        gx = None
        if x.requires_grad:
            gcols = (gm @ kmat).reshape(n, fo, l, c, t)
            gxp = np.zeros(xp.shape, dtype=xp.dtype)
            for k in range(t):
                gxp[:, :, k:k + stride * fo:stride, :] += gcols[:, :, :, :, k].transpose(0, 3, 1, 2)
            gx = gxp[:, :, pad:pad + f, :] if pad else gxp
        return gx, gk, gb

    return _record("conv1d_temporal", np.ascontiguousarray(out), (x, kernel, bias), bw)


# ----------------------------------------------------------------------------
# region pooling
# ----------------------------------------------------------------------------

def _cell_edges(lo: int, hi: int, k: int) -> list[tuple[int, int]]:
    size = hi - lo
    edges = []
    for j in range(k):
        a = lo + (j * size) // k
        b = lo + -(-((j + 1) * size) // k)
        edges.append((a, max(b, a + 1)))
    return edges


def roi_max_pool(features, boxes, k: int = 4) -> Tensor:
    """Max-pool ``features[C,F,H,W]`` inside per-frame boxes.

    ``boxes[o][f]`` is ``(x0, y0, x1, y1)`` in feature pixels (half-open) or
    ``None`` when object ``o`` is invisible at frame ``f``; invisible frames
    pool to zeros. Boxes narrower than ``k`` cells reuse the nearest pixel
    for several cells. Returns ``[O, C, F, k, k]``.
    """
    features = as_tensor(features)
    if features.ndim != 4:
        raise DimensionError(f"roi_max_pool expects [C,F,H,W], got {features.shape}")
    c, f, h, w = features.shape
    n_obj = len(boxes)
    out = np.zeros((n_obj, c, f, k, k), dtype=features.data.dtype)
    # flat argmax index into features per pooled output cell, -1 when empty
    arg = np.full((n_obj, c, f, k, k), -1, dtype=np.int64)
    chan_base = np.arange(c, dtype=np.int64) * (f * h * w)
    for o, per_frame in enumerate(boxes):
        if len(per_frame) != f:
            raise DimensionError(f"object {o}: {len(per_frame)} boxes for {f} frames")
        for fr, box in enumerate(per_frame):
            if box is None:
                continue
            x0, y0, x1, y1 = (int(v) for v in box)
            x0, y0 = min(max(x0, 0), w - 1), min(max(y0, 0), h - 1)
            x1, y1 = min(max(x1, x0 + 1), w), min(max(y1, y0 + 1), h)
            for i, (ya, yb) in enumerate(_cell_edges(y0, y1, k)):
                ya, yb = min(ya, y1 - 1), min(yb, y1)
                yb = max(yb, ya + 1)
                for j, (xa, xb) in enumerate(_cell_edges(x0, x1, k)):
                    xa, xb = min(xa, x1 - 1), min(xb, x1)
                    xb = max(xb, xa + 1)
                    region = features.data[:, fr, ya:yb, xa:xb].reshape(c, -1)
                    idx = region.argmax(axis=1)
                    out[o, :, fr, i, j] = region[np.arange(c), idx]
                    ry, rx = np.divmod(idx, xb - xa)
                    arg[o, :, fr, i, j] = chan_base + fr * h * w + (ya + ry) * w + (xa + rx)

    def bw(g):
        gx = np.zeros(features.data.size, dtype=np.float64)
        valid = arg >= 0
        np.add.at(gx, arg[valid], g[valid])
        return (gx.reshape(features.shape),)

    return _record("roi_max_pool", out, (features,), bw)


# ----------------------------------------------------------------------------
# checkpoint file
# ----------------------------------------------------------------------------

CHECKPOINT_MAGIC = b"R21W"
CHECKPOINT_VERSION = 1


def save_checkpoint(path, params: Sequence[Parameter]) -> None:
    chunks = [CHECKPOINT_MAGIC, struct.pack("<II", CHECKPOINT_VERSION, len(params))]
    for p in params:
        name = p.name.encode("utf-8")
        chunks.append(struct.pack("<H", len(name)) + name)
        chunks.append(struct.pack("<B", p.data.ndim))
        chunks.append(struct.pack(f"<{p.data.ndim}I", *p.data.shape))
        chunks.append(p.data.astype("<f4").tobytes())
    Path(path).write_bytes(b"".join(chunks))


def load_checkpoint(path) -> dict[str, np.ndarray]:
    try:
        buf = Path(path).read_bytes()
    except OSError as exc:
        raise LoadError(f"cannot read checkpoint {path}: {exc}") from exc
    if buf[:4] != CHECKPOINT_MAGIC:
        raise LoadError(f"{path}: not an R21W checkpoint")
    pos = 4

    def take(fmt):
        nonlocal pos
        size = struct.calcsize(fmt)
        if pos + size > len(buf):
            raise TruncatedPayloadError(f"{path}: truncated checkpoint")
        vals = struct.unpack_from(fmt, buf, pos)
        pos += size
        return vals

    version, count = take("<II")
    if version != CHECKPOINT_VERSION:
        raise VersionMismatchError(f"{path}: checkpoint version {version}, expected {CHECKPOINT_VERSION}")
    result: dict[str, np.ndarray] = {}
    for _ in range(count):
        (nlen,) = take("<H")
        if pos + nlen > len(buf):
            raise TruncatedPayloadError(f"{path}: truncated checkpoint")
        name = buf[pos:pos + nlen].decode("utf-8")
        pos += nlen
        (rank,) = take("<B")
        dims = take(f"<{rank}I") if rank else ()
        nbytes = 4 * int(np.prod(dims, dtype=np.int64))
        if pos + nbytes > len(buf):
            raise TruncatedPayloadError(f"{path}: truncated payload for {name!r}")
        result[name] = np.frombuffer(buf, dtype="<f4", count=nbytes // 4, offset=pos).reshape(dims).astype(np.float32)
        pos += nbytes
    if pos != len(buf):
        raise LoadError(f"{path}: {len(buf) - pos} trailing bytes")
    return result
