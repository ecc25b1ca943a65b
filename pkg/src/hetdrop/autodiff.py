"""Reverse-mode autodiff over dense 2-D float64 arrays.

Everything is a matrix: biases are (1, k) rows, scalar losses are (1, 1).
Forward calls build a graph of Tensor nodes; Tensor.backward() visits the
reachable nodes in exact reverse creation order and accumulates into .grad
buffers. Parameter leaves share their .grad buffer with the optimizer, so
gradients land where adam_step expects them.

The graph structure ops (gather/scatter, fixed and weighted propagation)
live here too so every model is differentiable end to end.
"""

from __future__ import annotations

import itertools

import numpy as np

from . import _kernels

_ids = itertools.count()


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_id")

    def __init__(self, data, parents=(), backward=None, requires_grad=None):
        data = np.asarray(data, dtype=np.float64)
        if data.ndim != 2:
            raise ValueError(f"Tensor data must be 2-D, got shape {data.shape}")
        self.data = data
        self._parents = tuple(parents)
        self._backward = backward
        if requires_grad is None:
            requires_grad = any(p.requires_grad for p in self._parents)
        self.requires_grad = requires_grad
        self.grad = None
        self._id = next(_ids)

    @property
    def shape(self):
        return self.data.shape

    def ensure_grad(self):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        return self.grad

    def backward(self):
        """Accumulate d(self)/d(leaf) into every reachable .grad buffer."""
        if self.data.shape != (1, 1):
            raise ValueError("backward() starts from a scalar (1, 1) tensor")
        nodes = []
        seen = set()
        stack = [self]
        while stack:
            t = stack.pop()
            if id(t) in seen or not t.requires_grad:
                continue
            seen.add(id(t))
            nodes.append(t)
            stack.extend(t._parents)
        nodes.sort(key=lambda t: t._id, reverse=True)
        self.ensure_grad()[...] += 1.0
        for t in nodes:
            if t._backward is not None and t.grad is not None:
                t._backward(t.grad)

    def item(self) -> float:
        return float(self.data[0, 0])

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def constant(data) -> Tensor:
    return Tensor(np.atleast_2d(np.asarray(data, dtype=np.float64)), requires_grad=False)


def _accum(t: Tensor, g):
    if t.requires_grad:
        t.ensure_grad()[...] += g


def add(a: Tensor, b) -> Tensor:
    """Elementwise sum; b may be a scalar or a (1, k) row broadcast over rows."""
    if not isinstance(b, Tensor):
        s = float(b)
        return Tensor(a.data + s, (a,), lambda g: _accum(a, g))
    if a.data.shape == b.data.shape:
        def bw(g):
            _accum(a, g)
            _accum(b, g)
        return Tensor(a.data + b.data, (a, b), bw)
    if b.data.shape == (1, a.data.shape[1]):
        def bw(g):
            _accum(a, g)
            _accum(b, g.sum(axis=0, keepdims=True))
        return Tensor(a.data + b.data, (a, b), bw)
    raise ValueError(f"add shape mismatch: {a.data.shape} vs {b.data.shape}")


def sub(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ValueError(f"sub shape mismatch: {a.data.shape} vs {b.data.shape}")

    def bw(g):
        _accum(a, g)
        _accum(b, -g)

    return Tensor(a.data - b.data, (a, b), bw)


def mul(a: Tensor, b) -> Tensor:
    """Elementwise product; b may be a plain scalar."""
    if not isinstance(b, Tensor):
        s = float(b)
        return Tensor(a.data * s, (a,), lambda g: _accum(a, g * s))
    if a.data.shape != b.data.shape:
        raise ValueError(f"mul shape mismatch: {a.data.shape} vs {b.data.shape}")

    def bw(g):
        _accum(a, g * b.data)
        _accum(b, g * a.data)

    return Tensor(a.data * b.data, (a, b), bw)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape[1] != b.data.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.data.shape} @ {b.data.shape}")

    def bw(g):
        _accum(a, g @ b.data.T)
        _accum(b, a.data.T @ g)

    return Tensor(a.data @ b.data, (a, b), bw)


def linear(x: Tensor, w: Tensor, bias: Tensor | None = None) -> Tensor:
    out = matmul(x, w)
    return out if bias is None else add(out, bias)


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return Tensor(x.data * mask, (x,), lambda g: _accum(x, g * mask))


def power(x: Tensor, exponent: float) -> Tensor:
    """Elementwise x**p. Negative/fractional exponents assume positive input."""
    out = x.data ** exponent
    return Tensor(out, (x,), lambda g: _accum(x, g * exponent * x.data ** (exponent - 1.0)))


def softmax_rows(x: Tensor) -> Tensor:
    z = x.data - x.data.max(axis=1, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=1, keepdims=True)

    def bw(g):
        _accum(x, p * (g - (g * p).sum(axis=1, keepdims=True)))

    return Tensor(p, (x,), bw)


def cross_entropy(probs: Tensor, targets, row_mask=None, row_weights=None) -> Tensor:
    """Mean negative log-probability of the target class over masked rows.

    Optional per-row weights (e.g. class reweighting) turn the mean into a
    weighted mean.
    """
    targets = np.asarray(targets, dtype=np.int64)
    n = probs.data.shape[0]
    rows = np.flatnonzero(np.asarray(row_mask, dtype=bool)) if row_mask is not None else np.arange(n)
    if rows.size == 0:
        raise ValueError("cross_entropy: empty row mask")
    t = targets[rows]
    if t.min() < 0 or t.max() >= probs.data.shape[1]:
        raise ValueError("cross_entropy: target out of range")
    w = np.ones(rows.size) if row_weights is None else np.asarray(row_weights, dtype=np.float64)[rows]
    wsum = w.sum()
    p_sel = probs.data[rows, t]
    loss = -(w * np.log(p_sel)).sum() / wsum

    def bw(g):
        if probs.requires_grad:
            gp = probs.ensure_grad()
            gp[rows, t] += g[0, 0] * (-w / (p_sel * wsum))

    return Tensor(np.array([[loss]]), (probs,), bw)


def dropout(x: Tensor, rate: float, training: bool, rng=None) -> Tensor:
    """Inverted dropout: train-time zeroing with 1/(1-rate) rescale.

    Evaluation mode (or rate 0) returns x itself, so no tape node exists.
    """
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x
    if rng is None:
        raise ValueError("training-mode dropout needs an rng")
    scale = 1.0 / (1.0 - rate)
    mask = (rng.random(x.data.shape) >= rate) * scale
    return Tensor(x.data * mask, (x,), lambda g: _accum(x, g * mask))


def gather_rows(x: Tensor, idx) -> Tensor:
    idx = np.asarray(idx, dtype=np.int64)

    def bw(g):
        if x.requires_grad:
            np.add.at(x.ensure_grad(), idx, g)

    return Tensor(x.data[idx], (x,), bw)


def column(x: Tensor, j: int) -> Tensor:
    def bw(g):
        if x.requires_grad:
            x.ensure_grad()[:, j:j + 1] += g

    return Tensor(x.data[:, j:j + 1].copy(), (x,), bw)


def place_rows(base, idx, rows: Tensor) -> Tensor:
    """Copy of the constant `base` with rows.data written at positions idx."""
    idx = np.asarray(idx, dtype=np.int64)
    out = np.array(base, dtype=np.float64)
    out[idx] = rows.data

    def bw(g):
        _accum(rows, g[idx])

    return Tensor(out, (rows,), bw)


def incident_sum(w: Tensor, u, v, n: int) -> Tensor:
    """Per-node sum of incident edge values: out[i] = sum of w over edges at i.

    w is (m, 1); the result is (n, 1).
    """
    u = np.asarray(u, dtype=np.int64)
    v = np.asarray(v, dtype=np.int64)
    vals = w.data[:, 0]
    out = (np.bincount(u, vals, n) + np.bincount(v, vals, n)).reshape(n, 1)

    def bw(g):
        if w.requires_grad:
            w.ensure_grad()[:, 0] += g[u, 0] + g[v, 0]

    return Tensor(out, (w,), bw)


def propagate_fixed(prop, x: Tensor) -> Tensor:
    """Multiply by a fixed PropagationMatrix; gradient uses its symmetry."""

    def bw(g):
        if x.requires_grad:
            x.ensure_grad()[...] += prop.matmul(g)

    return Tensor(prop.matmul(x.data), (x,), bw)


def propagate_weighted(u, v, edge_w: Tensor, self_w: Tensor, x: Tensor) -> Tensor:
    """Differentiable symmetric propagation with per-edge and per-node weights.

    out[i] = self_w[i] * x[i] + sum over incident edges e of edge_w[e] * x[other].
    edge_w is (m, 1), self_w is (n, 1).
    """
    u = np.ascontiguousarray(u, dtype=np.int64)
    v = np.ascontiguousarray(v, dtype=np.int64)
    ew = np.ascontiguousarray(edge_w.data[:, 0])
    sw = np.ascontiguousarray(self_w.data[:, 0])
    xd = np.ascontiguousarray(x.data)
    out = _kernels.edge_propagate(u, v, ew, sw, xd)

    def bw(g):
        g = np.ascontiguousarray(g)
        if x.requires_grad:
            x.ensure_grad()[...] += _kernels.edge_propagate(u, v, ew, sw, g)
        if edge_w.requires_grad:
            edge_w.ensure_grad()[:, 0] += _kernels.edge_pair_dot(u, v, g, xd)
        if self_w.requires_grad:
            self_w.ensure_grad()[:, 0] += np.einsum("ij,ij->i", g, xd)

    return Tensor(out, (edge_w, self_w, x), bw)


def argmax_straight_through(pi: Tensor) -> Tensor:
    """Forward: exact one-hot of the row argmax (ties pick the lowest index).
    Backward: identity, as if the output were pi itself."""
    idx = pi.data.argmax(axis=1)
    hard = np.zeros_like(pi.data)
    hard[np.arange(hard.shape[0]), idx] = 1.0
    return Tensor(hard, (pi,), lambda g: _accum(pi, g))
