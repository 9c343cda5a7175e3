"""Dense tensors with reverse-mode automatic differentiation.

Data is stored as float32 numpy arrays unless a float64 array is passed in
explicitly (the finite-difference checks run the whole graph in float64).
Every differentiable operation records a :class:`Node` on its output; calling
:meth:`Tensor.backward` topologically sorts the recorded nodes into a
:class:`Tape` and replays their backward rules in reverse order.
"""

from __future__ import annotations

import contextlib
from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

import numpy as np
from numpy.lib.stride_tricks import as_strided

_GRAD_ENABLED = True


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible."""


@contextlib.contextmanager
def no_grad() -> Iterator[None]:
    """Disable graph recording inside the block (inference mode).

    Convolutions inside the block multiply one sample at a time, which makes
    every sample's result independent of what else is in the batch.
    """
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def _as_array(data, dtype=None) -> np.ndarray:
    arr = np.asarray(data)
    if dtype is not None:
        return arr.astype(dtype, copy=False)
    if arr.dtype == np.float64 and isinstance(data, (np.ndarray, np.generic)):
        return arr
    return arr.astype(np.float32, copy=False)


@dataclass(eq=False)
class Node:
    op: str
    inputs: tuple["Tensor", ...]
    backward: Callable[[np.ndarray], Sequence[np.ndarray | None]]


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_node")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        self.data = _as_array(data, dtype)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._node: Node | None = None

    # -- introspection -------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError("item() requires a single-element tensor")
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad})"

    def __len__(self) -> int:
        return self.data.shape[0]

    # -- arithmetic ----------------------------------------------------
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

    def __getitem__(self, idx):
        return getitem(self, idx)

    def tanh(self):
        return tanh(self)

    def sigmoid(self):
        return sigmoid(self)

    def abs(self):
        return abs_(self)

    def sum(self):
        return sum_(self)

    def mean(self):
        return mean(self)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes)

    def backward(self) -> "Tape":
        return backward(self)


def tensor(data, requires_grad: bool = False, dtype=None) -> Tensor:
    return Tensor(data, requires_grad=requires_grad, dtype=dtype)


def _wrap(x) -> Tensor:
    # python scalars stay float32 so they never promote float32 operands
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float32))


def _make(data: np.ndarray, op: str, inputs: tuple, backward_fn) -> Tensor:
    out = Tensor(data)
    if _GRAD_ENABLED and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        out._node = Node(op, inputs, backward_fn)
    return out


# ---------------------------------------------------------------------------
# Tape / backward


class Tape:
    """Operations reachable from a loss, in the order they were recorded."""

    def __init__(self, nodes: list[tuple[Tensor, Node]]):
        self.nodes = nodes

    def __len__(self) -> int:
        return len(self.nodes)

    @classmethod
    def from_output(cls, out: Tensor) -> "Tape":
        order: list[tuple[Tensor, Node]] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(out, False)]
        while stack:
            t, expanded = stack.pop()
            if t._node is None:
                continue
            if expanded:
                order.append((t, t._node))
                continue
            if id(t) in seen:
                continue
            seen.add(id(t))
            stack.append((t, True))
            for inp in t._node.inputs:
                if inp._node is not None and id(inp) not in seen:
                    stack.append((inp, False))
        return cls(order)

    def backward(self, loss: Tensor) -> None:
        if loss.data.size != 1:
            raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
        grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        leaves: dict[int, Tensor] = {}
        if loss._node is None and loss.requires_grad:
            leaves[id(loss)] = loss
        for out, node in reversed(self.nodes):
            g = grads.pop(id(out), None)
            if g is None:
                continue
            in_grads = node.backward(g)
            for inp, ig in zip(node.inputs, in_grads):
                if ig is None or not inp.requires_grad:
                    continue
                key = id(inp)
                if key in grads:
                    grads[key] = grads[key] + ig
                else:
                    grads[key] = ig
                if inp._node is None:
                    leaves[key] = inp
        for key, leaf in leaves.items():
            g = grads.get(key)
            if g is None:
                continue
            g = g.astype(leaf.data.dtype, copy=False)
            leaf.grad = g if leaf.grad is None else leaf.grad + g


def backward(loss: Tensor) -> Tape:
    """Accumulate d(loss)/d(leaf) into ``.grad`` of every leaf requiring grad."""
    if loss.data.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    tape = Tape.from_output(loss)
    tape.backward(loss)
    return tape


# ---------------------------------------------------------------------------
# elementwise


def _check_same(a: Tensor, b: Tensor, op: str) -> None:
    if a.data.ndim and b.data.ndim and a.shape != b.shape:
        raise ShapeError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    return np.asarray(g.sum(), dtype=g.dtype).reshape(shape)


def add(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    _check_same(a, b, "add")
    sa, sb = a.shape, b.shape
    return _make(a.data + b.data, "add", (a, b),
                 lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    _check_same(a, b, "sub")
    sa, sb = a.shape, b.shape
    return _make(a.data - b.data, "sub", (a, b),
                 lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)))


def mul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    _check_same(a, b, "mul")
    ad, bd = a.data, b.data
    return _make(ad * bd, "mul", (a, b),
                 lambda g: (_unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)))


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)
    return _make(y, "tanh", (x,), lambda g: (g * (1.0 - y * y),))


def sigmoid(x: Tensor) -> Tensor:
    # split form avoids overflow in exp for large |x|
    d = x.data
    y = np.empty_like(d)
    pos = d >= 0
    y[pos] = 1.0 / (1.0 + np.exp(-d[pos]))
    e = np.exp(d[~pos])
    y[~pos] = e / (1.0 + e)
    return _make(y, "sigmoid", (x,), lambda g: (g * y * (1.0 - y),))


def elementwise(op: str, a: Tensor, b: Tensor | None = None) -> Tensor:
    binary = {"add": add, "sub": sub, "mul": mul}
    unary = {"tanh": tanh, "sigmoid": sigmoid}
    if op in binary:
        if b is None:
            raise ValueError(f"{op} needs two operands")
        return binary[op](a, b)
    if op in unary:
        return unary[op](a)
    raise ValueError(f"unknown elementwise op {op!r}")


def abs_(x: Tensor) -> Tensor:
    s = np.sign(x.data)
    return _make(np.abs(x.data), "abs", (x,), lambda g: (g * s,))


def sum_(x: Tensor) -> Tensor:
    shape = x.shape
    return _make(np.asarray(x.data.sum(), dtype=x.dtype), "sum", (x,),
                 lambda g: (np.broadcast_to(g, shape).copy(),))


def mean(x: Tensor) -> Tensor:
    shape, n = x.shape, x.data.size
    return _make(np.asarray(x.data.mean(), dtype=x.dtype), "mean", (x,),
                 lambda g: (np.full(shape, g / n, dtype=x.dtype),))


# ---------------------------------------------------------------------------
# shape manipulation


def reshape(x: Tensor, shape: tuple) -> Tensor:
    orig = x.shape
    return _make(x.data.reshape(shape), "reshape", (x,), lambda g: (g.reshape(orig),))


def transpose(x: Tensor, axes: tuple) -> Tensor:
    inv = np.argsort(axes)
    return _make(np.ascontiguousarray(x.data.transpose(axes)), "transpose", (x,),
                 lambda g: (g.transpose(inv),))


def getitem(x: Tensor, idx) -> Tensor:
    shape, dtype = x.shape, x.dtype

    basic = all(isinstance(i, (slice, int, type(Ellipsis), type(None)))
                for i in (idx if isinstance(idx, tuple) else (idx,)))

    def bw(g):
        out = np.zeros(shape, dtype=dtype)
        if basic:
            out[idx] = g
        else:
            np.add.at(out, idx, g)
        return (out,)

    return _make(np.ascontiguousarray(x.data[idx]), "getitem", (x,), bw)


def concat(xs: Sequence[Tensor], axis: int = 1) -> Tensor:
    xs = tuple(xs)
    sizes = [t.shape[axis] for t in xs]
    splits = np.cumsum(sizes)[:-1]
    return _make(np.concatenate([t.data for t in xs], axis=axis), "concat", xs,
                 lambda g: tuple(np.split(g, splits, axis=axis)))


def depth_to_space(x: Tensor, block: int) -> Tensor:
    """(N, C*b*b, H, W) -> (N, C, H*b, W*b); channel c*b*b + i*b + j lands at (h*b+i, w*b+j)."""
    n, c, h, w = x.shape
    b = block
    if c % (b * b):
        raise ShapeError(f"depth_to_space: {c} channels not divisible by {b * b}")
    oc = c // (b * b)
    y = x.data.reshape(n, oc, b, b, h, w).transpose(0, 1, 4, 2, 5, 3).reshape(n, oc, h * b, w * b)
    return _make(y, "depth_to_space", (x,), lambda g: (_s2d(g, b),))


def _s2d(a: np.ndarray, b: int) -> np.ndarray:
    n, c, h, w = a.shape
    if h % b or w % b:
        raise ShapeError(f"space_to_depth: spatial {h}x{w} not divisible by {b}")
    return a.reshape(n, c, h // b, b, w // b, b).transpose(0, 1, 3, 5, 2, 4).reshape(
        n, c * b * b, h // b, w // b)


def _d2s(a: np.ndarray, b: int) -> np.ndarray:
    n, c, h, w = a.shape
    oc = c // (b * b)
    return a.reshape(n, oc, b, b, h, w).transpose(0, 1, 4, 2, 5, 3).reshape(n, oc, h * b, w * b)


def space_to_depth(x: Tensor, block: int) -> Tensor:
    y = _s2d(x.data, block)
    return _make(np.ascontiguousarray(y), "space_to_depth", (x,), lambda g: (_d2s(g, block),))


# ---------------------------------------------------------------------------
# convolution (cross-correlation, no kernel flip)


def _im2col(x: np.ndarray, kh: int, kw: int, stride: int) -> tuple[np.ndarray, int, int]:
    """Patch matrix from a channels-last (N, H, W, C) array; columns ordered (kh, kw, C)."""
    n, h, w, c = x.shape
    ho = (h - kh) // stride + 1
    wo = (w - kw) // stride + 1
    s0, s1, s2, s3 = x.strides
    view = as_strided(x, shape=(n, ho, wo, kh, kw, c),
                      strides=(s0, s1 * stride, s2 * stride, s1, s2, s3), writeable=False)
    return view.reshape(n * ho * wo, kh * kw * c), ho, wo


def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None = None,
           stride: int = 1, padding: int = 0) -> Tensor:
    if x.ndim != 4 or weight.ndim != 4:
        raise ShapeError("conv2d expects 4-D input and kernel")
    n, cin, h, w = x.shape
    cout, wcin, kh, kw = weight.shape
    if cin != wcin:
        raise ShapeError(f"conv2d: input has {cin} channels, kernel expects {wcin}")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    if kh > h + 2 * padding or kw > w + 2 * padding:
        raise ShapeError("conv2d: kernel larger than padded input")
    # channels-last internally: the patch gather is then contiguous along C
    hp, wp = h + 2 * padding, w + 2 * padding
    xl = np.zeros((n, hp, wp, cin), dtype=x.dtype)
    xl[:, padding:padding + h, padding:padding + w, :] = x.data.transpose(0, 2, 3, 1)
    cols, ho, wo = _im2col(xl, kh, kw, stride)
    wmat = weight.data.transpose(0, 2, 3, 1).reshape(cout, -1)
    if _GRAD_ENABLED:
        out = cols @ wmat.T
    else:
        # one product per sample, so inference results never depend on batch composition
        out = np.matmul(cols.reshape(n, ho * wo, -1), wmat.T).reshape(n * ho * wo, cout)
    if bias is not None:
        out += bias.data
    y = np.ascontiguousarray(out.reshape(n, ho, wo, cout).transpose(0, 3, 1, 2))

    def bw(g):
        gmat = g.transpose(0, 2, 3, 1).reshape(-1, cout)
        gw = gb = gx = None
        if weight.requires_grad:
            gw = (gmat.T @ cols).reshape(cout, kh, kw, cin).transpose(0, 3, 1, 2)
        if bias is not None and bias.requires_grad:
            gb = gmat.sum(axis=0)
        if x.requires_grad:
            gcols = (gmat @ wmat).reshape(n, ho, wo, kh, kw, cin)
            gxl = np.zeros((n, hp, wp, cin), dtype=gcols.dtype)
            for i in range(kh):
                for j in range(kw):
                    gxl[:, i:i + stride * ho:stride, j:j + stride * wo:stride, :] += gcols[:, :, :, i, j, :]
            gx = gxl[:, padding:padding + h, padding:padding + w, :].transpose(0, 3, 1, 2)
        return (gx, gw, gb) if bias is not None else (gx, gw)

    inputs = (x, weight, bias) if bias is not None else (x, weight)
    return _make(y, "conv2d", inputs, bw)


# ---------------------------------------------------------------------------
# gradient checking


def grad_check(forward: Callable[[], Tensor], params: Sequence[Tensor], eps: float = 1e-3,
               samples: int = 8, rng: np.random.Generator | None = None) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``forward`` must be deterministic and return a scalar tensor. Parameters
    are promoted to float64 for both the analytic and the numeric pass, and
    restored afterwards. At most ``samples`` coordinates per parameter are
    probed.
    """
    rng = rng or np.random.default_rng(0)
    saved = [(p.data, p.grad) for p in params]
    worst = 0.0
    try:
        for p in params:
            p.data = p.data.astype(np.float64)
            p.grad = None
        loss = forward()
        backward(loss)
        analytic = [np.zeros_like(p.data) if p.grad is None else p.grad for p in params]
        with no_grad():
            for p, ga in zip(params, analytic):
                flat = p.data.reshape(-1)
                k = min(samples, flat.size)
                for i in rng.choice(flat.size, size=k, replace=False):
                    orig = flat[i]
                    flat[i] = orig + eps
                    fp = float(forward().data)
                    flat[i] = orig - eps
                    fm = float(forward().data)
                    flat[i] = orig
                    num = (fp - fm) / (2 * eps)
                    ana = float(ga.reshape(-1)[i])
                    err = abs(ana - num) / max(abs(ana), abs(num), 1e-8)
                    worst = max(worst, err)
    finally:
        for p, (d, g) in zip(params, saved):
            p.data, p.grad = d, g
    return worst
