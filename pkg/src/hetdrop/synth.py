"""Synthetic graphs with a controllable edge homophily ratio.

Edges are drawn one at a time: with probability target_h the pair is
same-class, otherwise cross-class (uniform over class pairs, or weighted
by an optional mixing matrix). Features are class centers at scaled
one-hot corners plus isotropic Gaussian noise, so the center separation is
exactly `separation`.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .graph import Graph, build_graph, stratified_split_masks


@dataclass(frozen=True)
class SbmSpec:
    n: int = 1000
    c: int = 5
    target_h: float = 0.2
    mean_degree: float = 10.0
    n_features: int = 16
    separation: float = 5.0
    noise: float = 1.0
    seed: int = 0
    cross_mix: tuple | None = None  # optional c x c weights for cross-class pairs

    def validate(self):
        if self.n < self.c:
            raise ValueError("need at least one node per class")
        if not 0.0 <= self.target_h <= 1.0:
            raise ValueError("target_h must be in [0, 1]")
        if self.mean_degree < 1:
            raise ValueError("mean_degree must be >= 1")
        if self.n_features < self.c:
            raise ValueError("n_features must be >= c (one-hot class centers)")
        if self.separation < 0 or self.noise < 0:
            raise ValueError("separation and noise must be >= 0")


def _class_members(labels, c):
    return [np.flatnonzero(labels == k) for k in range(c)]


def generate_sbm(spec: SbmSpec) -> Graph:
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    n, c = spec.n, spec.c

    labels = np.arange(n, dtype=np.int64) % c  # balanced within +-1
    members = _class_members(labels, c)
    sizes = np.array([len(m) for m in members])

    m_target = int(round(n * spec.mean_degree / 2.0))
    same_capacity = int((sizes * (sizes - 1) // 2).sum())
    cross_capacity = n * (n - 1) // 2 - same_capacity
    if m_target > n * (n - 1) // 2:
        raise ValueError("requested edges exceed available distinct pairs")
    if spec.target_h == 1.0 and m_target > same_capacity:
        raise ValueError("requested edges exceed available same-class pairs")
    if spec.target_h == 0.0 and m_target > cross_capacity:
        raise ValueError("requested edges exceed available cross-class pairs")

    cross_pairs = [(a, b) for a in range(c) for b in range(a + 1, c)]
    if spec.cross_mix is not None:
        mix = np.asarray(spec.cross_mix, dtype=np.float64)
        if mix.shape != (c, c):
            raise ValueError("cross_mix must be c x c")
        weights = np.array([mix[a, b] + mix[b, a] for a, b in cross_pairs])
        if weights.sum() <= 0:
            raise ValueError("cross_mix has no mass off the diagonal")
    else:
        weights = np.ones(len(cross_pairs))
    weights = weights / weights.sum()

    seen = set()
    edges = []
    attempts = 0
    max_attempts = 200 * m_target + 1000
    while len(edges) < m_target:
        attempts += 1
        if attempts > max_attempts:
            raise ValueError("edge sampling stalled; graph too dense for the requested mix")
        if rng.random() < spec.target_h:
            k = int(rng.integers(c))
            if sizes[k] < 2:
                continue
            i, j = rng.choice(members[k], size=2, replace=False)
        else:
            a, b = cross_pairs[int(rng.choice(len(cross_pairs), p=weights))]
            i = int(rng.choice(members[a]))
            j = int(rng.choice(members[b]))
        u, v = (int(i), int(j)) if i < j else (int(j), int(i))
        if u == v or (u, v) in seen:
            continue
        seen.add((u, v))
        edges.append((u, v))

    # centers at one-hot corners scaled by `separation`; any two centers sit
    # at distance separation * sqrt(2)
    centers = np.zeros((c, spec.n_features))
    for k in range(c):
        centers[k, k] = spec.separation
    features = centers[labels] + spec.noise * rng.standard_normal((n, spec.n_features))

    train, val, test = stratified_split_masks(labels, rng)
    return build_graph(np.asarray(edges, dtype=np.int64).reshape(-1, 2),
                       features, labels, (train, val, test), n_classes=c)


def feature_regime(spec: SbmSpec, regime: str) -> SbmSpec:
    """Reparameterize the feature geometry.

    "separated": centers far apart relative to noise (suits squared-
    difference edge representations); "overlapping": centers close
    (suits summation).
    """
    if regime == "separated":
        return replace(spec, separation=5.0 * spec.noise)
    if regime == "overlapping":
        return replace(spec, separation=0.3 * spec.noise)
    raise ValueError(f"unknown regime {regime!r}")
