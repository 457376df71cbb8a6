"""Minimal reverse-mode automatic differentiation over numpy float64 arrays.

Just enough machinery for the policy network: elementwise arithmetic, matrix
products, the usual nonlinearities, same-padded 3x3 convolution, spatial max
pooling, embedding lookups, and a softmax.  Everything is double precision so
central finite differences at eps=1e-5 resolve gradients to ~1e-10, leaving
the 1e-4 check tolerance entirely for genuine bugs.

No batching: vectors are 1-D, sequence encodings are (T, D), and feature maps
are (C, H, W).  That keeps shapes readable and is plenty at desk scale.
"""

from __future__ import annotations

import numpy as np


class ShapeMismatch(ValueError):
    pass


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape``, undoing numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("data", "grad", "_parents", "_backward")

    def __init__(self, data, _parents: tuple = (), _backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape})"

    def _accumulate(self, grad: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += grad

    def backward(self) -> None:
        if self.data.size != 1:
            raise ValueError("backward() starts from a scalar")
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
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

    # Operator sugar; scalars and arrays are lifted to constant tensors.
    def __add__(self, other):
        return add(self, _lift(other))

    def __radd__(self, other):
        return add(_lift(other), self)

    def __sub__(self, other):
        return sub(self, _lift(other))

    def __rsub__(self, other):
        return sub(_lift(other), self)

    def __mul__(self, other):
        return mul(self, _lift(other))

    def __rmul__(self, other):
        return mul(_lift(other), self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, _lift(other))


def _lift(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def add(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data + b.data, (a, b))

    def backward(g):
        a._accumulate(_unbroadcast(g, a.data.shape))
        b._accumulate(_unbroadcast(g, b.data.shape))

    out._backward = backward
    return out


def sub(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data - b.data, (a, b))

    def backward(g):
        a._accumulate(_unbroadcast(g, a.data.shape))
        b._accumulate(-_unbroadcast(g, b.data.shape))

    out._backward = backward
    return out


def neg(a: Tensor) -> Tensor:
    out = Tensor(-a.data, (a,))
    out._backward = lambda g: a._accumulate(-g)
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data * b.data, (a, b))

    def backward(g):
        a._accumulate(_unbroadcast(g * b.data, a.data.shape))
        b._accumulate(_unbroadcast(g * a.data, b.data.shape))

    out._backward = backward
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim == 0 or b.data.ndim == 0 or a.data.ndim > 2 or b.data.ndim > 2:
        raise ShapeMismatch(f"matmul supports 1-D/2-D, got {a.data.shape} @ {b.data.shape}")
    if a.data.shape[-1] != b.data.shape[0]:
        raise ShapeMismatch(f"matmul inner dims differ: {a.data.shape} @ {b.data.shape}")
    out = Tensor(a.data @ b.data, (a, b))

    def backward(g):
        ad, bd = a.data, b.data
        if ad.ndim == 1 and bd.ndim == 1:  # dot -> scalar
            a._accumulate(g * bd)
            b._accumulate(g * ad)
        elif ad.ndim == 1:  # (m,) @ (m,n) -> (n,)
            a._accumulate(bd @ g)
            b._accumulate(np.outer(ad, g))
        elif bd.ndim == 1:  # (m,n) @ (n,) -> (m,)
            a._accumulate(np.outer(g, bd))
            b._accumulate(ad.T @ g)
        else:  # (m,n) @ (n,p) -> (m,p)
            a._accumulate(g @ bd.T)
            b._accumulate(ad.T @ g)

    out._backward = backward
    return out


def relu(a: Tensor) -> Tensor:
    out = Tensor(np.maximum(a.data, 0.0), (a,))
    out._backward = lambda g: a._accumulate(g * (a.data > 0))
    return out


def sigmoid(a: Tensor) -> Tensor:
    y = 1.0 / (1.0 + np.exp(-a.data))
    out = Tensor(y, (a,))
    out._backward = lambda g: a._accumulate(g * y * (1.0 - y))
    return out


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)
    out = Tensor(y, (a,))
    out._backward = lambda g: a._accumulate(g * (1.0 - y * y))
    return out


def exp(a: Tensor) -> Tensor:
    y = np.exp(a.data)
    out = Tensor(y, (a,))
    out._backward = lambda g: a._accumulate(g * y)
    return out


def log(a: Tensor) -> Tensor:
    out = Tensor(np.log(a.data), (a,))
    out._backward = lambda g: a._accumulate(g / a.data)
    return out


def sqrt(a: Tensor) -> Tensor:
    y = np.sqrt(a.data)
    out = Tensor(y, (a,))
    out._backward = lambda g: a._accumulate(g / (2.0 * y))
    return out


def tsum(a: Tensor, axis: int | None = None) -> Tensor:
    out = Tensor(a.data.sum(axis=axis), (a,))

    def backward(g):
        if axis is None:
            a._accumulate(np.broadcast_to(g, a.data.shape).copy())
        else:
            a._accumulate(np.broadcast_to(np.expand_dims(g, axis), a.data.shape).copy())

    out._backward = backward
    return out


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    out = Tensor(a.data.reshape(shape), (a,))
    out._backward = lambda g: a._accumulate(g.reshape(a.data.shape))
    return out


def concat(tensors: list[Tensor], axis: int = 0) -> Tensor:
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors))
    sizes = [t.data.shape[axis] for t in tensors]

    def backward(g):
        offset = 0
        for t, size in zip(tensors, sizes):
            index = [slice(None)] * g.ndim
            index[axis] = slice(offset, offset + size)
            t._accumulate(g[tuple(index)])
            offset += size

    out._backward = backward
    return out


def narrow(a: Tensor, start: int, stop: int) -> Tensor:
    """Slice a 1-D tensor: a[start:stop]."""
    if a.data.ndim != 1:
        raise ShapeMismatch(f"narrow expects 1-D, got {a.data.shape}")
    out = Tensor(a.data[start:stop], (a,))

    def backward(g):
        full = np.zeros_like(a.data)
        full[start:stop] = g
        a._accumulate(full)

    out._backward = backward
    return out


def softmax(a: Tensor) -> Tensor:
    if a.data.ndim != 1:
        raise ShapeMismatch(f"softmax expects 1-D, got {a.data.shape}")
    shifted = a.data - a.data.max()
    e = np.exp(shifted)
    y = e / e.sum()
    out = Tensor(y, (a,))
    out._backward = lambda g: a._accumulate(y * (g - np.dot(g, y)))
    return out


def _im2col_indices(h: int, w: int, kh: int, kw: int) -> tuple[np.ndarray, np.ndarray]:
    i0 = np.repeat(np.arange(kh), kw)
    j0 = np.tile(np.arange(kw), kh)
    i1 = np.repeat(np.arange(h), w)
    j1 = np.tile(np.arange(w), h)
    return i0[:, None] + i1[None, :], j0[:, None] + j1[None, :]


def conv2d(x: Tensor, kernel: Tensor, bias: Tensor | None = None) -> Tensor:
    """Stride-1 same-padded 2-D convolution: (C,H,W) with (Co,C,kh,kw) -> (Co,H,W)."""
    if x.data.ndim != 3 or kernel.data.ndim != 4:
        raise ShapeMismatch(f"conv2d got x {x.data.shape}, kernel {kernel.data.shape}")
    c, h, w = x.data.shape
    co, ci, kh, kw = kernel.data.shape
    if ci != c:
        raise ShapeMismatch(f"kernel expects {ci} input channels, feature map has {c}")
    if kh % 2 != 1 or kw % 2 != 1:
        raise ShapeMismatch("same padding needs odd kernel sides")
    ph, pw = kh // 2, kw // 2
    padded = np.pad(x.data, ((0, 0), (ph, ph), (pw, pw)))
    rows, cols = _im2col_indices(h, w, kh, kw)
    patches = padded[:, rows, cols].reshape(c * kh * kw, h * w)
    kmat = kernel.data.reshape(co, c * kh * kw)
    result = kmat @ patches
    if bias is not None:
        result = result + bias.data[:, None]
    parents = (x, kernel) if bias is None else (x, kernel, bias)
    out = Tensor(result.reshape(co, h, w), parents)

    def backward(g):
        gmat = g.reshape(co, h * w)
        kernel._accumulate((gmat @ patches.T).reshape(kernel.data.shape))
        if bias is not None:
            bias._accumulate(gmat.sum(axis=1))
        dpatches = (kmat.T @ gmat).reshape(c, kh * kw, h * w)
        dpadded = np.zeros_like(padded)
        np.add.at(dpadded, (slice(None), rows, cols), dpatches)
        a_grad = dpadded[:, ph : ph + h, pw : pw + w] if ph or pw else dpadded
        x._accumulate(a_grad)

    out._backward = backward
    return out


def maxpool_hw(x: Tensor) -> Tensor:
    """Global spatial max pooling: (C,H,W) -> (C,)."""
    if x.data.ndim != 3:
        raise ShapeMismatch(f"maxpool_hw expects (C,H,W), got {x.data.shape}")
    c, h, w = x.data.shape
    flat = x.data.reshape(c, h * w)
    arg = flat.argmax(axis=1)
    out = Tensor(flat[np.arange(c), arg], (x,))

    def backward(g):
        full = np.zeros_like(flat)
        full[np.arange(c), arg] = g
        x._accumulate(full.reshape(x.data.shape))

    out._backward = backward
    return out


def embed_rows(table: Tensor, ids: list[int]) -> Tensor:
    """Look up rows of a (V, D) table: token ids -> (T, D)."""
    idx = np.asarray(ids, dtype=np.intp)
    if idx.ndim != 1 or idx.size == 0:
        raise ShapeMismatch("embed_rows needs a non-empty 1-D id list")
    out = Tensor(table.data[idx], (table,))

    def backward(g):
        if table.grad is None:
            table.grad = np.zeros_like(table.data)
        np.add.at(table.grad, idx, g)

    out._backward = backward
    return out


def embed_bow_grid(table: Tensor, grid_ids: list[list[list[int]]]) -> Tensor:
    """Bag-of-words grid embedding: per-cell id lists -> (D, H, W) summed rows.

    ``grid_ids[y][x]`` holds the token ids of the cell at column x, row y; an
    empty cell contributes a zero vector.
    """
    h = len(grid_ids)
    w = len(grid_ids[0])
    d = table.data.shape[1]
    value = np.zeros((d, h, w))
    for y in range(h):
        for x in range(w):
            ids = grid_ids[y][x]
            if ids:
                value[:, y, x] = table.data[np.asarray(ids, dtype=np.intp)].sum(axis=0)
    out = Tensor(value, (table,))

    def backward(g):
        if table.grad is None:
            table.grad = np.zeros_like(table.data)
        for y in range(h):
            for x in range(w):
                for i in grid_ids[y][x]:
                    table.grad[i] += g[:, y, x]

    out._backward = backward
    return out


def grad_check(f, params: list[Tensor], eps: float = 1e-5) -> float:
    """Max relative error between reverse-mode and central-difference gradients.

    ``f`` must rebuild its graph from ``params`` on every call and return a
    scalar Tensor.  Relative error uses max(1, |a|, |n|) in the denominator so
    near-zero gradients are compared absolutely.
    """
    for p in params:
        p.grad = None
    f().backward()
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]

    worst = 0.0
    for p, grads in zip(params, analytic):
        flat = p.data.reshape(-1)
        gflat = grads.reshape(-1)
        for i in range(flat.size):
            saved = flat[i]
            flat[i] = saved + eps
            f_plus = float(f().data)
            flat[i] = saved - eps
            f_minus = float(f().data)
            flat[i] = saved
            numeric = (f_plus - f_minus) / (2.0 * eps)
            rel = abs(gflat[i] - numeric) / max(1.0, abs(gflat[i]), abs(numeric))
            worst = max(worst, rel)
    return worst
