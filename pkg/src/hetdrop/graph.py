"""Undirected attributed graphs: construction, splits, edge labels, normalization.

A Graph is immutable after construction: edges are stored once as (u, v)
with u < v, deduplicated and self-loop free, and all arrays are marked
read-only. Structure edits go through apply_deletion, which returns a new
Graph sharing the feature/label arrays.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _kernels

UNLABELED = -1

# ternary edge tags
EDGE_HOMOPHILOUS = 0
EDGE_HETEROPHILIOUS = 1
EDGE_UNKNOWN = -1


def _frozen(a, dtype=None):
    out = np.array(a, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Graph:
    """Undirected graph with node features, labels, and split masks."""

    n: int
    edges: np.ndarray  # (m, 2) int64, u < v, lexsorted, unique
    features: np.ndarray  # (n, f) float64
    labels: np.ndarray  # (n,) int64, UNLABELED for missing
    n_classes: int
    train_mask: np.ndarray  # (n,) bool, pairwise disjoint with val/test
    val_mask: np.ndarray
    test_mask: np.ndarray

    @property
    def m(self) -> int:
        return self.edges.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def degrees(self) -> np.ndarray:
        deg = np.bincount(self.edges[:, 0], minlength=self.n)
        deg += np.bincount(self.edges[:, 1], minlength=self.n)
        return deg


@dataclass(frozen=True)
class PropagationMatrix:
    """Sparse symmetric n x n matrix in CSR form.

    Built by sym_normalize: pattern of A + I, entries dinv[i] * dinv[j]
    with dinv = (1 + degree) ** -0.5, so (i, j) and (j, i) are bitwise equal.
    """

    n: int
    indptr: np.ndarray  # (n + 1,) int64
    indices: np.ndarray  # (nnz,) int64
    data: np.ndarray  # (nnz,) float64
    with_self_loops: bool = True

    def matmul(self, x: np.ndarray) -> np.ndarray:
        x = np.ascontiguousarray(x, dtype=np.float64)
        return _kernels.csr_dense_matmul(self.indptr, self.indices, self.data, x)

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n, self.n))
        for i in range(self.n):
            lo, hi = self.indptr[i], self.indptr[i + 1]
            out[i, self.indices[lo:hi]] = self.data[lo:hi]
        return out

    def trace(self) -> float:
        diag = 0.0
        for i in range(self.n):
            lo, hi = self.indptr[i], self.indptr[i + 1]
            pos = np.searchsorted(self.indices[lo:hi], i)
            if pos < hi - lo and self.indices[lo + pos] == i:
                diag += self.data[lo + pos]
        return diag


def build_graph(edge_list, features, labels, masks, n_classes=None) -> Graph:
    """Canonicalize raw inputs into a Graph.

    Self-loops are stripped (with a warning carrying the count), duplicate
    and reversed edges collapse to a single (u, v) pair with u < v.
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2:
        raise ValueError("features must be a 2-D matrix")
    n = features.shape[0]
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (n,):
        raise ValueError(f"labels must have shape ({n},), got {labels.shape}")

    edges = np.asarray(edge_list, dtype=np.int64).reshape(-1, 2)
    if edges.size and (edges.min() < 0 or edges.max() >= n):
        raise ValueError("edge endpoint out of range")
    loops = edges[:, 0] == edges[:, 1]
    n_loops = int(loops.sum())
    if n_loops:
        warnings.warn(f"stripped {n_loops} self-loop(s) from edge list")
        edges = edges[~loops]
    lo = np.minimum(edges[:, 0], edges[:, 1])
    hi = np.maximum(edges[:, 0], edges[:, 1])
    edges = np.unique(np.stack([lo, hi], axis=1), axis=0) if edges.size else edges.reshape(0, 2)

    train, val, test = (np.asarray(m, dtype=bool) for m in masks)
    for name, mask in (("train", train), ("val", val), ("test", test)):
        if mask.shape != (n,):
            raise ValueError(f"{name} mask must have shape ({n},)")
    if ((train & val) | (train & test) | (val & test)).any():
        raise ValueError("train/val/test masks overlap")
    covered = train | val | test
    if (labels[covered] == UNLABELED).any():
        raise ValueError("masked node without a label")

    if n_classes is None:
        n_classes = int(labels.max()) + 1 if (labels != UNLABELED).any() else 0
    if (labels != UNLABELED).any() and labels.max() >= n_classes:
        raise ValueError("label exceeds class count")
    if ((labels < 0) & (labels != UNLABELED)).any():
        raise ValueError("negative label other than the unlabeled sentinel")

    return Graph(
        n=n,
        edges=_frozen(edges, np.int64),
        features=_frozen(features, np.float64),
        labels=_frozen(labels, np.int64),
        n_classes=int(n_classes),
        train_mask=_frozen(train, bool),
        val_mask=_frozen(val, bool),
        test_mask=_frozen(test, bool),
    )


def _resolve_mask(graph: Graph, label_source):
    if isinstance(label_source, str):
        if label_source == "all":
            return None
        try:
            return {"train": graph.train_mask, "val": graph.val_mask, "test": graph.test_mask}[label_source]
        except KeyError:
            raise ValueError(f"unknown label source {label_source!r}") from None
    return np.asarray(label_source, dtype=bool)


def homophily_ratio(graph: Graph, label_source="all") -> float:
    """Fraction of counted edges whose endpoints share a class.

    label_source "all" counts every edge with two labeled endpoints; a mask
    (or "train"/"val"/"test") restricts to edges with both endpoints inside
    the mask. Edges with an unlabeled endpoint never count on either side.
    """
    if graph.m == 0:
        raise ValueError("graph has no edges")
    u, v = graph.edges[:, 0], graph.edges[:, 1]
    ok = (graph.labels[u] != UNLABELED) & (graph.labels[v] != UNLABELED)
    mask = _resolve_mask(graph, label_source)
    if mask is not None:
        ok &= mask[u] & mask[v]
    total = int(ok.sum())
    if total == 0:
        raise ValueError("no countable edges under the given label source")
    same = int((graph.labels[u[ok]] == graph.labels[v[ok]]).sum())
    return same / total


def sym_normalize(graph: Graph) -> PropagationMatrix:
    """Symmetrically normalized adjacency with self-loops.

    Pattern is A + I; entry (i, j) is dinv[i] * dinv[j] where dinv is the
    inverse square root of the self-loop-augmented degree.
    """
    n = graph.n
    deg = graph.degrees() + 1  # self loop
    dinv = deg.astype(np.float64) ** -0.5

    u, v = graph.edges[:, 0], graph.edges[:, 1]
    rows = np.concatenate([u, v, np.arange(n, dtype=np.int64)])
    cols = np.concatenate([v, u, np.arange(n, dtype=np.int64)])
    order = np.lexsort((cols, rows))
    rows, cols = rows[order], cols[order]
    data = dinv[rows] * dinv[cols]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=n), out=indptr[1:])
    return PropagationMatrix(
        n=n,
        indptr=_frozen(indptr, np.int64),
        indices=_frozen(cols, np.int64),
        data=_frozen(data, np.float64),
    )


def label_edges(graph: Graph, mask=None) -> np.ndarray:
    """Ternary tag per edge: homophilous, heterophilious, or unknown.

    With a mask, an edge is unknown unless both endpoints lie inside the
    mask; without one, unknown means an unlabeled endpoint.
    """
    u, v = graph.edges[:, 0], graph.edges[:, 1]
    known = (graph.labels[u] != UNLABELED) & (graph.labels[v] != UNLABELED)
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        known &= mask[u] & mask[v]
    tags = np.full(graph.m, EDGE_UNKNOWN, dtype=np.int8)
    same = graph.labels[u] == graph.labels[v]
    tags[known & same] = EDGE_HOMOPHILOUS
    tags[known & ~same] = EDGE_HETEROPHILIOUS
    return tags


def apply_deletion(graph: Graph, keep_mask) -> Graph:
    """New Graph keeping only the masked-in edges; everything else shared."""
    keep_mask = np.asarray(keep_mask, dtype=bool)
    if keep_mask.shape != (graph.m,):
        raise ValueError(f"keep mask must have shape ({graph.m},)")
    return Graph(
        n=graph.n,
        edges=_frozen(graph.edges[keep_mask], np.int64),
        features=graph.features,
        labels=graph.labels,
        n_classes=graph.n_classes,
        train_mask=graph.train_mask,
        val_mask=graph.val_mask,
        test_mask=graph.test_mask,
    )


def stratified_split_masks(labels, rng, train_frac=0.48, val_frac=0.32):
    """Per-class random train/val/test masks (remainder goes to test)."""
    labels = np.asarray(labels)
    n = labels.shape[0]
    train = np.zeros(n, dtype=bool)
    val = np.zeros(n, dtype=bool)
    test = np.zeros(n, dtype=bool)
    for c in np.unique(labels[labels != UNLABELED]):
        idx = np.flatnonzero(labels == c)
        idx = idx[rng.permutation(idx.shape[0])]
        n_tr = int(round(train_frac * idx.shape[0]))
        n_va = int(round(val_frac * idx.shape[0]))
        train[idx[:n_tr]] = True
        val[idx[n_tr:n_tr + n_va]] = True
        test[idx[n_tr + n_va:]] = True
    return train, val, test


def with_masks(graph: Graph, train, val, test) -> Graph:
    """Same graph with replaced split masks (re-validated)."""
    return build_graph(graph.edges, graph.features, graph.labels, (train, val, test), graph.n_classes)
