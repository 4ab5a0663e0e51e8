"""A small reverse-mode autodiff engine over float64 numpy arrays.

Every op returns a new :class:`Tensor` holding its parents and a closure
``fn(g, add)`` that maps the output gradient ``g`` to parent gradients via
``add(parent, grad)``. :func:`backward` walks the graph in reverse
topological order; only leaves (parameters) keep a ``.grad`` buffer.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from gazedep.errors import ConfigError
from gazedep.nn import kernels

AddFn = Callable[["Tensor", np.ndarray], None]


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray, AddFn], None] | None = None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.data)

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.shape}, requires_grad={self.requires_grad})"


def _result(data: np.ndarray, parents: Sequence[Tensor], fn: Callable[[np.ndarray, AddFn], None]) -> Tensor:
    out = Tensor(data)
    live = tuple(p for p in parents if p.requires_grad)
    if live:
        out.requires_grad = True
        out._parents = live
        out._backward = fn
    return out


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(leaf) into ``.grad`` of every reachable leaf.

    A loss that does not depend on any trainable tensor leaves all
    gradient buffers untouched.
    """
    if not isinstance(loss, Tensor):
        raise ConfigError("backward() needs a Tensor produced by a recorded forward pass")
    if loss.data.size != 1:
        raise ConfigError(f"backward() needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return

    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))

    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}

    def add(t: Tensor, g: np.ndarray) -> None:
        if not t.requires_grad:
            return
        key = id(t)
        prev = grads.get(key)
        grads[key] = g if prev is None else prev + g

    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._backward is None:
            if node.grad is None:
                node.grad = np.zeros_like(node.data)
            node.grad += g
        else:
            node._backward(g, add)


# --------------------------------------------------------------------------
# ops
# --------------------------------------------------------------------------


def constant(data) -> Tensor:
    return Tensor(data)


def add(a: Tensor, b: Tensor) -> Tensor:
    def fn(g, acc):
        acc(a, _unbroadcast(g, a.shape))
        acc(b, _unbroadcast(g, b.shape))

    return _result(a.data + b.data, (a, b), fn)


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)
    return _result(a.data * c, (a,), lambda g, acc: acc(a, g * c))


def add_all(terms: Sequence[Tensor]) -> Tensor:
    """Sum of same-shaped tensors, accumulated left to right."""
    if not terms:
        return Tensor(0.0)
    data = terms[0].data.copy()
    for t in terms[1:]:
        data = data + t.data

    def fn(g, acc):
        for t in terms:
            acc(t, g)

    return _result(data, terms, fn)


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    old = a.shape
    return _result(a.data.reshape(shape), (a,), lambda g, acc: acc(a, g.reshape(old)))


def embedding(weight: Tensor, ids: np.ndarray) -> Tensor:
    """Row lookup ``weight[ids]`` for an integer array of any shape."""
    ids = np.asarray(ids, dtype=np.int64)

    def fn(g, acc):
        gw = np.zeros_like(weight.data)
        np.add.at(gw, ids.reshape(-1), g.reshape(-1, weight.shape[1]))
        acc(weight, gw)

    return _result(weight.data[ids], (weight,), fn)


def take_rows(a: Tensor, rows: np.ndarray) -> Tensor:
    """``a[rows]`` along the first axis of a 2-D tensor."""
    rows = np.asarray(rows, dtype=np.int64)

    def fn(g, acc):
        ga = np.zeros_like(a.data)
        np.add.at(ga, rows, g)
        acc(a, ga)

    return _result(a.data[rows], (a,), fn)


def scatter_rows(a: Tensor, rows: np.ndarray, n_rows: int) -> Tensor:
    """Zero matrix of ``n_rows`` rows with ``out[rows] = a``; ``rows`` must be distinct."""
    rows = np.asarray(rows, dtype=np.int64)
    out = np.zeros((n_rows,) + a.shape[1:])
    out[rows] = a.data
    return _result(out, (a,), lambda g, acc: acc(a, g[rows]))


def concat(parts: Sequence[Tensor], axis: int = -1) -> Tensor:
    data = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.shape[axis] for p in parts]
    cuts = np.cumsum(sizes)[:-1]

    def fn(g, acc):
        for p, gp in zip(parts, np.split(g, cuts, axis=axis)):
            acc(p, gp)

    return _result(data, parts, fn)


def dropout(a: Tensor, p: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout: surviving units are scaled by 1/(1-p)."""
    if p <= 0.0:
        return a
    mask = (rng.random(a.shape) >= p) / (1.0 - p)
    return _result(a.data * mask, (a,), lambda g, acc: acc(a, g * mask))


def linear(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """``x @ w + b`` over the last axis of ``x``."""
    lead = x.shape[:-1]
    x2 = x.data.reshape(-1, x.shape[-1])

    def fn(g, acc):
        g2 = g.reshape(-1, w.shape[1])
        acc(w, x2.T @ g2)
        acc(b, g2.sum(axis=0))
        if x.requires_grad:
            acc(x, (g2 @ w.data.T).reshape(x.shape))

    return _result((x2 @ w.data + b.data).reshape(lead + (w.shape[1],)), (x, w, b), fn)


def lstm(x: Tensor, lengths: np.ndarray, wx: Tensor, wh: Tensor, b: Tensor, reverse: bool = False) -> Tensor:
    """One LSTM direction over a padded (B, T, D) batch; returns (B, T, H)."""
    lengths = np.asarray(lengths, dtype=np.int64)
    B, T, D = x.shape
    x2 = x.data.reshape(B * T, D)
    xw = (x2 @ wx.data + b.data).reshape(B, T, -1)
    h, c, gates = kernels.lstm_forward(xw, lengths, wh.data, reverse)

    def fn(g, acc):
        dxw, dwh = kernels.lstm_backward(g, h, c, gates, lengths, wh.data, reverse)
        dxw2 = dxw.reshape(B * T, -1)
        acc(wh, dwh)
        acc(wx, x2.T @ dxw2)
        acc(b, dxw2.sum(axis=0))
        if x.requires_grad:
            acc(x, (dxw2 @ wx.data.T).reshape(B, T, D))

    return _result(h, (x, wx, wh, b), fn)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(logits))


def cross_entropy(logits: Tensor, targets: np.ndarray) -> Tensor:
    """Mean negative log-likelihood of ``targets`` under row-wise softmax of (N, V) logits."""
    targets = np.asarray(targets, dtype=np.int64)
    n = logits.shape[0]
    if n == 0:
        return Tensor(0.0)
    logp = log_softmax(logits.data)
    rows = np.arange(n)
    loss = -logp[rows, targets].mean()

    def fn(g, acc):
        d = np.exp(logp)
        d[rows, targets] -= 1.0
        acc(logits, d * (float(g) / n))

    return _result(np.array(loss), (logits,), fn)
