"""Minimal reverse-mode autodiff over numpy arrays.

A Tensor wraps an ndarray, remembers the tensors it was computed from
and a closure that routes its gradient to them.  backward() on a scalar
walks the tape once in reverse topological order; the tape is consumed
and must be rebuilt by a fresh forward pass.

Only the operations the bundled networks need are provided: broadcast
add/mul, matmul, reshape/concat/slice, full-sum reductions, leaky ReLU,
sigmoid, exp, and a fused logit Bernoulli loss.  Convolutions live in
layers.py on top of the shared im2col/col2im helpers here.

Default arithmetic is float64 so gradient checks are meaningful; pass
float32 data for speed (training configs toggle this).
"""

from __future__ import annotations

import numpy as np

DEFAULT_DTYPE = np.float64


def _as_array(value, dtype) -> np.ndarray:
    arr = np.asarray(value, dtype=dtype if dtype is not None else None)
    if arr.dtype not in (np.float32, np.float64):
        arr = arr.astype(DEFAULT_DTYPE)
    return arr


class Tensor:
    """Array node in the autodiff tape."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_consumed")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        self.data = _as_array(data, dtype)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None
        self._consumed = False

    # -- construction helpers -------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.dtype.name}, grad={self.requires_grad})"

    # -- tape -----------------------------------------------------------------

    def _accumulate(self, grad: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += grad

    def backward(self) -> None:
        """Propagate d(self)/d(leaf) for a scalar self through the tape."""
        if self.data.size != 1:
            raise ValueError("backward requires a scalar tensor")
        if self._consumed:
            raise RuntimeError("backward already ran on this graph; run forward again")
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in seen:
                    stack.append((parent, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)
            node._consumed = True

    # -- operators ------------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __rsub__(self, other):
        return add(mul(self, -1.0), other)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 else shape[0])

    def sum(self):
        return sum_all(self)


def _lift(value, like: Tensor) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=like.dtype))


def _make(data: np.ndarray, parents: tuple[Tensor, ...], backward) -> Tensor:
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(p for p in parents if p.requires_grad)
        out._backward = backward
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum grad down to `shape` after numpy broadcasting."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def add(a, b) -> Tensor:
    a = a if isinstance(a, Tensor) else Tensor(np.asarray(a))
    b = _lift(b, a)

    def backward(grad):
        if a.requires_grad:
            a._accumulate(_unbroadcast(grad, a.shape).astype(a.dtype))
        if b.requires_grad:
            b._accumulate(_unbroadcast(grad, b.shape).astype(b.dtype))

    return _make(a.data + b.data, (a, b), backward)


def mul(a, b) -> Tensor:
    a = a if isinstance(a, Tensor) else Tensor(np.asarray(a))
    b = _lift(b, a)

    def backward(grad):
        if a.requires_grad:
            a._accumulate(_unbroadcast(grad * b.data, a.shape).astype(a.dtype))
        if b.requires_grad:
            b._accumulate(_unbroadcast(grad * a.data, b.shape).astype(b.dtype))

    return _make(a.data * b.data, (a, b), backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ValueError("matmul expects 2-D operands")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul shape mismatch {a.shape} @ {b.shape}")

    def backward(grad):
        if a.requires_grad:
            a._accumulate(grad @ b.data.T)
        if b.requires_grad:
            b._accumulate(a.data.T @ grad)

    return _make(a.data @ b.data, (a, b), backward)


def reshape(a: Tensor, shape) -> Tensor:
    def backward(grad):
        a._accumulate(grad.reshape(a.shape))

    return _make(a.data.reshape(shape), (a,), backward)


def concat(parts: list[Tensor], axis: int = -1) -> Tensor:
    if not parts:
        raise ValueError("concat requires at least one tensor")
    sizes = [p.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def backward(grad):
        for part, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            if part.requires_grad:
                index = [slice(None)] * grad.ndim
                index[axis] = slice(lo, hi)
                part._accumulate(grad[tuple(index)])

    return _make(np.concatenate([p.data for p in parts], axis=axis), tuple(parts), backward)


def narrow(a: Tensor, axis: int, start: int, length: int) -> Tensor:
    """Contiguous slice along one axis."""
    index = [slice(None)] * a.data.ndim
    index[axis] = slice(start, start + length)
    index = tuple(index)

    def backward(grad):
        full = np.zeros_like(a.data)
        full[index] = grad
        a._accumulate(full)

    return _make(a.data[index].copy(), (a,), backward)


def sum_all(a: Tensor) -> Tensor:
    def backward(grad):
        a._accumulate(np.broadcast_to(grad, a.shape).astype(a.dtype, copy=True))

    return _make(np.asarray(a.data.sum()), (a,), backward)


def leaky_relu(a: Tensor, slope: float = 0.2) -> Tensor:
    mask = a.data > 0

    def backward(grad):
        a._accumulate(grad * np.where(mask, 1.0, slope).astype(a.dtype))

    return _make(np.where(mask, a.data, a.data * slope), (a,), backward)


def relu(a: Tensor) -> Tensor:
    return leaky_relu(a, 0.0)


def sigmoid(a: Tensor) -> Tensor:
    # evaluated piecewise to stay finite for large |x| in float32
    s = np.where(a.data >= 0, 1.0 / (1.0 + np.exp(-np.abs(a.data))),
                 np.exp(-np.abs(a.data)) / (1.0 + np.exp(-np.abs(a.data))))
    s = s.astype(a.dtype)

    def backward(grad):
        a._accumulate(grad * s * (1.0 - s))

    return _make(s, (a,), backward)


def exp(a: Tensor) -> Tensor:
    e = np.exp(a.data)

    def backward(grad):
        a._accumulate(grad * e)

    return _make(e, (a,), backward)


def bce_with_logits(logits: Tensor, targets: np.ndarray) -> Tensor:
    """Elementwise Bernoulli negative log-likelihood of targets under logits.

    softplus(l) - x*l, evaluated stably; gradient is sigmoid(l) - x.
    """
    x = np.asarray(targets, dtype=logits.dtype)
    l = logits.data
    softplus = np.maximum(l, 0.0) + np.log1p(np.exp(-np.abs(l)))

    def backward(grad):
        sig = np.where(l >= 0, 1.0 / (1.0 + np.exp(-np.abs(l))),
                       np.exp(-np.abs(l)) / (1.0 + np.exp(-np.abs(l))))
        logits._accumulate((grad * (sig - x)).astype(logits.dtype))

    return _make(softplus - x * l, (logits,), backward)


# -- shared convolution index machinery ---------------------------------------

_COL_CACHE: dict[tuple, np.ndarray] = {}


def _col_indices(channels: int, height: int, width: int, kernel: tuple[int, int],
                 stride: int, pad: int) -> np.ndarray:
    """Flat gather indices (C*kh*kw, L) into a zero-padded (C, H+2p, W+2p)."""
    key = (channels, height, width, kernel, stride, pad)
    cached = _COL_CACHE.get(key)
    if cached is not None:
        return cached
    kh, kw = kernel
    hp, wp = height + 2 * pad, width + 2 * pad
    out_h = (hp - kh) // stride + 1
    out_w = (wp - kw) // stride + 1
    if out_h <= 0 or out_w <= 0:
        raise ValueError(f"kernel {kernel} with stride {stride}, pad {pad} "
                         f"does not fit a {height}x{width} input")
    c_idx = np.repeat(np.arange(channels), kh * kw)
    i_idx = np.tile(np.repeat(np.arange(kh), kw), channels)
    j_idx = np.tile(np.arange(kw), channels * kh)
    base = (c_idx * hp + i_idx) * wp + j_idx  # (C*kh*kw,)
    oi = stride * np.repeat(np.arange(out_h), out_w)
    oj = stride * np.tile(np.arange(out_w), out_h)
    offset = oi * wp + oj  # (L,)
    idx = base[:, None] + offset[None, :]
    _COL_CACHE[key] = idx
    return idx


def _pad(x: np.ndarray, pad: int) -> np.ndarray:
    if pad == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))


def im2col(x: np.ndarray, kernel: tuple[int, int], stride: int, pad: int) -> np.ndarray:
    """(N, C, H, W) -> (N, C*kh*kw, L) patch matrix."""
    n, c, h, w = x.shape
    idx = _col_indices(c, h, w, kernel, stride, pad)
    flat = _pad(x, pad).reshape(n, -1)
    return flat[:, idx]


def col2im(cols: np.ndarray, channels: int, height: int, width: int,
           kernel: tuple[int, int], stride: int, pad: int) -> np.ndarray:
    """Adjoint of im2col: scatter-add patches back to (N, C, H, W)."""
    n = cols.shape[0]
    idx = _col_indices(channels, height, width, kernel, stride, pad)
    hp, wp = height + 2 * pad, width + 2 * pad
    size = channels * hp * wp
    flat_idx = np.broadcast_to(idx.reshape(-1), (n, idx.size))
    out = np.empty((n, size), dtype=cols.dtype)
    for i in range(n):
        out[i] = np.bincount(flat_idx[i], weights=cols[i].reshape(-1), minlength=size)
    out = out.reshape(n, channels, hp, wp)
    if pad:
        out = out[:, :, pad:hp - pad, pad:wp - pad]
    return np.ascontiguousarray(out)
