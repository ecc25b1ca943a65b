"""Measurement suite: deletion ratios, edge-distance statistics, spectra.

The eigensolver is the package's own Jacobi routine (compiled or numpy
backend); it densifies the propagation matrix, so a configurable size
limit guards against accidental huge inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .graph import Graph, PropagationMatrix, UNLABELED, sym_normalize

DENSE_EIG_LIMIT = 4000


@dataclass(frozen=True)
class DeletionStats:
    total_edges: int
    deleted_edges: int
    total_heterophilious: int
    deleted_heterophilious: int
    total_deletion_ratio: float
    heterophilious_deletion_ratio: float | None  # None when nothing was deleted

    def to_dict(self):
        return {
            "total_edges": self.total_edges,
            "deleted_edges": self.deleted_edges,
            "total_heterophilious": self.total_heterophilious,
            "deleted_heterophilious": self.deleted_heterophilious,
            "total_deletion_ratio": self.total_deletion_ratio,
            "heterophilious_deletion_ratio": self.heterophilious_deletion_ratio,
        }


def deletion_stats(original: Graph, keep_mask, labels=None) -> DeletionStats:
    """Deleted-over-total and deleted-heterophilious-over-deleted ratios."""
    keep_mask = np.asarray(keep_mask, dtype=bool)
    if keep_mask.shape != (original.m,):
        raise ValueError("keep mask length mismatch")
    labels = original.labels if labels is None else np.asarray(labels, dtype=np.int64)
    u, v = original.edges[:, 0], original.edges[:, 1]
    if (labels[u] == UNLABELED).any() or (labels[v] == UNLABELED).any():
        raise ValueError("deletion stats need full ground-truth labels")
    hetero = labels[u] != labels[v]
    deleted = ~keep_mask
    n_del = int(deleted.sum())
    n_del_het = int((deleted & hetero).sum())
    return DeletionStats(
        total_edges=original.m,
        deleted_edges=n_del,
        total_heterophilious=int(hetero.sum()),
        deleted_heterophilious=n_del_het,
        total_deletion_ratio=n_del / original.m if original.m else 0.0,
        heterophilious_deletion_ratio=(n_del_het / n_del) if n_del else None,
    )


@dataclass(frozen=True)
class DistanceStats:
    """Endpoint-distance statistics per class pair and aggregated.

    pair_stats maps an unordered class pair (l, l') with l <= l' to
    (mean, variance, edge count); pairs with no edges are absent. The
    aggregates average pair means uniformly over present pairs (each pair's
    variance uses that pair's own mean); with per_edge=True they pool all
    edges of the category instead.
    """

    pair_stats: dict
    in_class: tuple | None  # (mean, variance) or None when no such edges
    between_class: tuple | None
    per_edge: bool = False

    def to_rows(self):
        rows = []
        for (a, b), (mu, var, cnt) in sorted(self.pair_stats.items()):
            rows.append({"class_a": a, "class_b": b, "mean": mu, "variance": var, "edges": cnt})
        return rows


def distance_stats(graph: Graph, labels=None, per_edge=False) -> DistanceStats:
    labels = graph.labels if labels is None else np.asarray(labels, dtype=np.int64)
    u, v = graph.edges[:, 0], graph.edges[:, 1]
    known = (labels[u] != UNLABELED) & (labels[v] != UNLABELED)
    d = np.linalg.norm(graph.features[u] - graph.features[v], axis=1)

    pair_stats = {}
    la = np.minimum(labels[u], labels[v])
    lb = np.maximum(labels[u], labels[v])
    for a, b in {(int(x), int(y)) for x, y in zip(la[known], lb[known])}:
        sel = known & (la == a) & (lb == b)
        dd = d[sel]
        mu = float(dd.mean())
        pair_stats[(a, b)] = (mu, float(((dd - mu) ** 2).mean()), int(sel.sum()))

    def aggregate(same: bool):
        keys = [k for k in pair_stats if (k[0] == k[1]) == same]
        if not keys:
            return None
        if per_edge:
            sel = known & ((la == lb) if same else (la != lb))
            dd = d[sel]
            mu = float(dd.mean())
            return (mu, float(((dd - mu) ** 2).mean()))
        mus = [pair_stats[k][0] for k in keys]
        vs = [pair_stats[k][1] for k in keys]
        return (float(np.mean(mus)), float(np.mean(vs)))

    return DistanceStats(
        pair_stats=pair_stats,
        in_class=aggregate(True),
        between_class=aggregate(False),
        per_edge=per_edge,
    )


def recommend_gamma(stats: DistanceStats, threshold: float = 1.0):
    """1 (squared difference) when the in-class and between-class distance
    distributions separate by more than `threshold` pooled standard
    deviations, else 0 (summation). None when a category is absent."""
    if stats.in_class is None or stats.between_class is None:
        return None
    mu_in, var_in = stats.in_class
    mu_bw, var_bw = stats.between_class
    pooled = np.sqrt((var_in + var_bw) / 2.0)
    return 1 if abs(mu_bw - mu_in) > threshold * pooled else 0


def symmetric_eigenvalues(prop: PropagationMatrix, dense_limit: int = DENSE_EIG_LIMIT) -> np.ndarray:
    """All eigenvalues of the densified matrix, ascending."""
    if prop.n > dense_limit:
        raise ValueError(f"n={prop.n} exceeds dense eigensolver limit {dense_limit}")
    if prop.n == 0:
        return np.empty(0)
    return _kernels.jacobi_eigenvalues(prop.to_dense())


@dataclass(frozen=True)
class SpectrumReport:
    eigenvalues_before: np.ndarray
    eigenvalues_after: np.ndarray
    bin_edges: np.ndarray
    counts_before: np.ndarray
    counts_after: np.ndarray
    ones_before: int  # eigenvalues equal to 1 within 1e-6 (isolated parts)
    ones_after: int


def spectrum_report(before: Graph, after: Graph, bins: int = 50,
                    dense_limit: int = DENSE_EIG_LIMIT) -> SpectrumReport:
    ev_b = symmetric_eigenvalues(sym_normalize(before), dense_limit)
    ev_a = symmetric_eigenvalues(sym_normalize(after), dense_limit)
    edges = np.linspace(-1.0, 1.0, bins + 1)
    cb, _ = np.histogram(np.clip(ev_b, -1.0, 1.0), bins=edges)
    ca, _ = np.histogram(np.clip(ev_a, -1.0, 1.0), bins=edges)
    return SpectrumReport(
        eigenvalues_before=ev_b,
        eigenvalues_after=ev_a,
        bin_edges=edges,
        counts_before=cb,
        counts_after=ca,
        ones_before=int((np.abs(ev_b - 1.0) <= 1e-6).sum()),
        ones_after=int((np.abs(ev_a - 1.0) <= 1e-6).sum()),
    )
