"""Node classification models and the binary edge classifier.

Node model variants:
  mlp   softmax(MLP2(X))
  sgc   softmax(S^K X W), one weight matrix, no dropout
  sgc2  softmax(MLP2(S^K X)), the K-step propagation feeding a 2-layer head
  gcn   softmax(S relu(S X W0) W1) with dropout before each linear map

For fixed structures the K-step propagation is precomputed once with
sgc_precompute (no gradient); when the structure itself is being learned,
forward() is given a differentiable `propagate` closure instead and applies
it K times on the tape.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .graph import Graph, PropagationMatrix, sym_normalize
from .optim import Parameter, glorot_uniform

NODE_VARIANTS = ("mlp", "sgc", "sgc2", "gcn")

GAMMA_SUM = 0
GAMMA_SQDIFF = 1


def sgc_precompute(prop: PropagationMatrix, x: np.ndarray, k: int) -> np.ndarray:
    """S^K X by repeated sparse-dense products; no gradient flows through."""
    if k < 0:
        raise ValueError("k must be >= 0")
    out = np.asarray(x, dtype=np.float64)
    for _ in range(k):
        out = prop.matmul(out)
    return out


class NodeModel:
    """One of the four node-classification families."""

    def __init__(self, variant, in_dim, n_classes, hidden=64, k=2, dropout=0.6, rng=None):
        if variant not in NODE_VARIANTS:
            raise ValueError(f"unknown variant {variant!r}")
        if rng is None:
            rng = np.random.default_rng(0)
        self.variant = variant
        self.in_dim = in_dim
        self.n_classes = n_classes
        self.hidden = hidden
        self.k = k
        self.dropout = dropout
        if variant == "sgc":
            self.params = {"w": Parameter("w", glorot_uniform(rng, in_dim, n_classes))}
        else:
            self.params = {
                "w0": Parameter("w0", glorot_uniform(rng, in_dim, hidden)),
                "w1": Parameter("w1", glorot_uniform(rng, hidden, n_classes)),
            }

    def parameters(self):
        return list(self.params.values())

    @property
    def needs_propagation(self) -> bool:
        return self.variant != "mlp"

    def _mlp2(self, x, training, rng):
        h = ad.dropout(x, self.dropout, training, rng)
        h = ad.relu(ad.matmul(h, self.params["w0"].tensor()))
        h = ad.dropout(h, self.dropout, training, rng)
        return ad.matmul(h, self.params["w1"].tensor())

    def forward(self, x: ad.Tensor, propagate=None, training=False, rng=None) -> ad.Tensor:
        """Class probabilities, one row per node.

        For sgc/sgc2, pass either raw features plus a `propagate` closure
        (applied k times on the tape) or the already-propagated features
        with propagate=None. gcn always needs `propagate`.
        """
        if self.variant == "mlp":
            logits = self._mlp2(x, training, rng)
        elif self.variant in ("sgc", "sgc2"):
            p = x
            if propagate is not None:
                for _ in range(self.k):
                    p = propagate(p)
            if self.variant == "sgc":
                logits = ad.matmul(p, self.params["w"].tensor())
            else:
                logits = self._mlp2(p, training, rng)
        else:  # gcn
            if propagate is None:
                raise ValueError("gcn forward needs a propagate closure")
            h = ad.dropout(x, self.dropout, training, rng)
            h = ad.relu(propagate(ad.matmul(h, self.params["w0"].tensor())))
            h = ad.dropout(h, self.dropout, training, rng)
            logits = propagate(ad.matmul(h, self.params["w1"].tensor()))
        return ad.softmax_rows(logits)

    def header(self) -> dict:
        return {
            "kind": "node_model",
            "variant": self.variant,
            "in_dim": self.in_dim,
            "n_classes": self.n_classes,
            "hidden": self.hidden,
            "k": self.k,
            "dropout": self.dropout,
        }


class EdgeClassifier:
    """Binary homophilous/heterophilious edge classifier.

    Endpoint features are projected by a shared map, combined symmetrically
    (elementwise sum for gamma 0, elementwise squared difference for
    gamma 1), and scored by a single softmax layer. Output column 0 is the
    homophilous probability.
    """

    def __init__(self, in_dim, proj_dim=64, gamma=GAMMA_SQDIFF, rng=None):
        if gamma not in (GAMMA_SUM, GAMMA_SQDIFF):
            raise ValueError("gamma must be 0 (sum) or 1 (squared difference)")
        if rng is None:
            rng = np.random.default_rng(0)
        self.in_dim = in_dim
        self.proj_dim = proj_dim
        self.gamma = gamma
        self.params = {
            "w": Parameter("w", glorot_uniform(rng, in_dim, proj_dim)),
            "wc": Parameter("wc", glorot_uniform(rng, proj_dim, 2)),
            "bc": Parameter("bc", np.zeros((1, 2))),
        }

    def parameters(self):
        return list(self.params.values())

    def weight_parameters(self):
        return [self.params["w"], self.params["wc"]]

    def bias_parameters(self):
        return [self.params["bc"]]

    def pair_representation(self, x: ad.Tensor, u, v) -> ad.Tensor:
        proj = ad.matmul(x, self.params["w"].tensor())
        pu = ad.gather_rows(proj, u)
        pv = ad.gather_rows(proj, v)
        if self.gamma == GAMMA_SUM:
            return ad.add(pu, pv)
        d = ad.sub(pu, pv)
        return ad.mul(d, d)

    def forward_logits(self, x: ad.Tensor, u, v) -> ad.Tensor:
        e = self.pair_representation(x, u, v)
        return ad.linear(e, self.params["wc"].tensor(), self.params["bc"].tensor())

    def forward(self, x: ad.Tensor, u, v) -> ad.Tensor:
        return ad.softmax_rows(self.forward_logits(x, u, v))

    def header(self) -> dict:
        return {
            "kind": "edge_classifier",
            "in_dim": self.in_dim,
            "proj_dim": self.proj_dim,
            "gamma": self.gamma,
        }


def classify_edges(ec: EdgeClassifier, graph: Graph, edge_subset=None) -> np.ndarray:
    """(p_homophilous, p_heterophilious) per selected edge, no gradients."""
    if edge_subset is None:
        edges = graph.edges
    else:
        edges = graph.edges[np.asarray(edge_subset)]
    x = ad.constant(graph.features)
    return ec.forward(x, edges[:, 0], edges[:, 1]).data


def edge_representation(xi, xj, w, gamma):
    """Symmetric pair representation of two raw feature vectors (numpy only)."""
    a = np.asarray(xi, dtype=np.float64) @ w
    b = np.asarray(xj, dtype=np.float64) @ w
    if gamma == GAMMA_SUM:
        return a + b
    if gamma == GAMMA_SQDIFF:
        return (a - b) ** 2
    raise ValueError("gamma must be 0 or 1")


def forward_node_model(model: NodeModel, graph: Graph, training=False, rng=None) -> np.ndarray:
    """Convenience full forward on a fixed structure; returns probabilities."""
    x = graph.features
    if model.needs_propagation:
        prop = sym_normalize(graph)
        if model.variant in ("sgc", "sgc2"):
            out = model.forward(ad.constant(sgc_precompute(prop, x, model.k)),
                                training=training, rng=rng)
        else:
            out = model.forward(ad.constant(x), propagate=lambda t: ad.propagate_fixed(prop, t),
                                training=training, rng=rng)
    else:
        out = model.forward(ad.constant(x), training=training, rng=rng)
    return out.data
