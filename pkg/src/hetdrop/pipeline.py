"""Training orchestration: classifier pretraining, the two joint schemes,
fixed-structure baselines, oracle deletion, and random (DropEdge-style)
deletion.

Randomness is split into independent streams derived from the config seed
(base-model init, classifier init, dropout, structure sampling), so runs
that share a structure schedule produce bit-identical base-model
trajectories regardless of what the classifier does.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from . import autodiff as ad
from .analysis import DeletionStats, deletion_stats
from .graph import (EDGE_UNKNOWN, Graph, UNLABELED, apply_deletion,
                    label_edges, sym_normalize)
from .models import EdgeClassifier, NodeModel, sgc_precompute
from .optim import adam_step

MODES = ("end_to_end", "separate", "base_only", "base_on_fixed", "oracle", "random_drop")


class NoTrainableEdgesError(RuntimeError):
    """The training split induces no labeled edges to pretrain on."""


class DivergenceError(RuntimeError):
    def __init__(self, message, epoch=None, loss=None):
        super().__init__(message)
        self.epoch = epoch
        self.loss = loss


@dataclass
class TrainConfig:
    mode: str = "separate"
    epochs: int = 500
    patience: int = 100
    pretrain_epochs: int = 200
    pretrain_patience: int = 30
    lr: float = 0.01
    lr_pretrain: float = 0.005
    weight_decay: float = 5e-4
    dropout: float = 0.6
    hidden: int = 64
    k: int = 2
    gamma: int = 1
    seed: int = 0
    pretrain: bool = True
    ground_truth_policy: str = "train_oracle"  # or "classifier_all"
    edge_class_weight: float | None = None  # pretraining weight on heterophilious rows
    oracle_rate: float = 1.0
    drop_rate: float = 0.5

    def validate(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.epochs < 1 or self.pretrain_epochs < 1:
            raise ValueError("epoch budgets must be >= 1")
        for name in ("lr", "lr_pretrain"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        if self.gamma not in (0, 1):
            raise ValueError("gamma must be 0 or 1")
        if self.ground_truth_policy not in ("train_oracle", "classifier_all"):
            raise ValueError(f"unknown ground_truth_policy {self.ground_truth_policy!r}")


@dataclass
class EdgeDecision:
    """Soft probabilities, hard one-hot, and keep verdict per edge."""

    probabilities: np.ndarray  # (m, 2), column 0 = homophilous
    hard: np.ndarray  # (m, 2) exact one-hot, ties toward column 0
    keep: np.ndarray  # (m,) bool, True = retain


def decide_edges(logits) -> EdgeDecision:
    """Hard decisions from classifier logits; forward value of the
    straight-through estimator equals `hard`."""
    logits = np.atleast_2d(np.asarray(logits, dtype=np.float64))
    if not np.isfinite(logits).all():
        raise ValueError("non-finite edge logits")
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    pi = e / e.sum(axis=1, keepdims=True)
    idx = pi.argmax(axis=1)  # ties pick the lower index (homophilous)
    hard = np.zeros_like(pi)
    hard[np.arange(hard.shape[0]), idx] = 1.0
    return EdgeDecision(probabilities=pi, hard=hard, keep=idx == 0)


def classifier_scope(graph: Graph, policy: str = "train_oracle") -> np.ndarray:
    """Boolean mask of edges the classifier decides. Under "train_oracle",
    edges between two training nodes are handled by their known labels."""
    if policy == "classifier_all":
        return np.ones(graph.m, dtype=bool)
    u, v = graph.edges[:, 0], graph.edges[:, 1]
    return ~(graph.train_mask[u] & graph.train_mask[v])


def structure_from_decisions(graph: Graph, keep_scoped, policy: str = "train_oracle"):
    """Compose classifier verdicts with the ground-truth policy into a new
    structure. Returns (graph, keep_mask over the original edges)."""
    scope = classifier_scope(graph, policy)
    keep_scoped = np.asarray(keep_scoped, dtype=bool)
    if keep_scoped.shape != (int(scope.sum()),):
        raise ValueError("one decision per classifier-scoped edge required")
    keep = np.ones(graph.m, dtype=bool)
    keep[scope] = keep_scoped
    fixed = ~scope
    if fixed.any():
        u, v = graph.edges[:, 0], graph.edges[:, 1]
        keep[fixed] = graph.labels[u[fixed]] == graph.labels[v[fixed]]
    return apply_deletion(graph, keep), keep


def _round_count(x: float) -> int:
    return int(np.floor(x + 0.5))


def _oracle_keep_mask(graph: Graph, deletion_rate: float, rng) -> np.ndarray:
    if not 0.0 <= deletion_rate <= 1.0:
        raise ValueError("deletion rate must be in [0, 1]")
    tags = label_edges(graph)
    if (tags == EDGE_UNKNOWN).any():
        raise ValueError("oracle deletion needs full ground-truth labels")
    het = np.flatnonzero(tags == 1)
    n_drop = _round_count(deletion_rate * het.shape[0])
    keep = np.ones(graph.m, dtype=bool)
    if n_drop:
        keep[rng.choice(het, size=n_drop, replace=False)] = False
    return keep


def oracle_drop(graph: Graph, deletion_rate: float, rng) -> Graph:
    """Remove a uniform random subset of exactly round(rate * #heterophilious)
    heterophilious edges; homophilous edges are untouched."""
    return apply_deletion(graph, _oracle_keep_mask(graph, deletion_rate, rng))


def random_drop(graph: Graph, drop_rate: float, rng) -> Graph:
    """Remove a uniform random subset of exactly round(rate * |E|) edges."""
    if not 0.0 <= drop_rate < 1.0:
        raise ValueError("drop rate must be in [0, 1)")
    n_drop = _round_count(drop_rate * graph.m)
    keep = np.ones(graph.m, dtype=bool)
    if n_drop:
        keep[rng.choice(graph.m, size=n_drop, replace=False)] = False
    return apply_deletion(graph, keep)


class _FixedStructure:
    """Cached per-structure state: normalization, precomputed propagation."""

    def __init__(self, structure: Graph, model: NodeModel, features: np.ndarray):
        self.structure = structure
        self.x = ad.constant(features)
        if model.variant == "mlp":
            self.prop = None
            self.inputs = self.x
        else:
            self.prop = sym_normalize(structure)
            if model.variant in ("sgc", "sgc2"):
                self.inputs = ad.constant(sgc_precompute(self.prop, features, model.k))
            else:
                self.inputs = self.x

    def forward(self, model: NodeModel, training=False, rng=None) -> np.ndarray | ad.Tensor:
        if model.variant == "gcn":
            prop = self.prop
            return model.forward(self.x, propagate=lambda t: ad.propagate_fixed(prop, t),
                                 training=training, rng=rng)
        return model.forward(self.inputs, training=training, rng=rng)


def _accuracy(probs: np.ndarray, labels: np.ndarray, mask: np.ndarray) -> float:
    if mask.sum() == 0:
        return float("nan")
    pred = probs.argmax(axis=1)
    return float((pred[mask] == labels[mask]).mean())


def _masked_ce(probs: np.ndarray, labels: np.ndarray, mask: np.ndarray) -> float:
    if mask.sum() == 0:
        return float("nan")
    with np.errstate(divide="ignore"):  # inf is a meaningful reported value
        return float(-np.log(probs[mask, labels[mask]]).mean())


def evaluate(model: NodeModel, graph: Graph, mask) -> float:
    """Accuracy of the model on the masked nodes (evaluation mode)."""
    mask = np.asarray(mask, dtype=bool)
    if mask.sum() == 0:
        raise ValueError("evaluate: empty mask")
    fixed = _FixedStructure(graph, model, graph.features)
    probs = fixed.forward(model).data
    return _accuracy(probs, graph.labels, mask)


@dataclass
class RunReport:
    config: dict
    model_variant: str
    mode: str
    seed: int
    split: int
    epochs_run: int
    best_epoch: int
    train_loss: list
    train_acc: list
    val_loss: list
    val_acc: list
    structure_changes: list
    test_accuracy: float
    final_train_loss: float
    final_val_accuracy: float
    keep_mask: np.ndarray | None
    deletion: DeletionStats | None
    pretrain: dict | None
    notes: list = field(default_factory=list)
    wall_clock_s: float = 0.0


class _EpochTracker:
    """Per-epoch curves plus best-validation-epoch bookkeeping.

    Test accuracy (and the structure, when one is being learned) is
    recorded at the epoch of best validation accuracy; early stopping
    fires after `patience` epochs without improvement.
    """

    def __init__(self, patience, notes):
        self.patience = patience
        self.train_loss, self.train_acc = [], []
        self.val_loss, self.val_acc = [], []
        self.structure_changes = []
        self.best_criterion = -np.inf
        self.best_epoch = -1
        self.best = {}
        self.notes = notes
        self._warned_empty_val = False

    def record(self, epoch, step_loss, probs_eval, graph, keep_mask=None, structure_change=None):
        labels = graph.labels
        tr_acc = _accuracy(probs_eval, labels, graph.train_mask)
        va_acc = _accuracy(probs_eval, labels, graph.val_mask)
        te_acc = _accuracy(probs_eval, labels, graph.test_mask)
        tr_ce = _masked_ce(probs_eval, labels, graph.train_mask)
        va_ce = _masked_ce(probs_eval, labels, graph.val_mask)
        self.train_loss.append(step_loss)
        self.train_acc.append(tr_acc)
        self.val_loss.append(va_ce)
        self.val_acc.append(va_acc)
        if structure_change is not None:
            self.structure_changes.append(int(structure_change))
        criterion = va_acc
        if np.isnan(criterion):
            if not self._warned_empty_val:
                self.notes.append("empty validation mask: selecting on train accuracy")
                self._warned_empty_val = True
            criterion = tr_acc
        if criterion > self.best_criterion:
            self.best_criterion = criterion
            self.best_epoch = epoch
            self.best = {
                "test_accuracy": te_acc,
                "final_train_loss": tr_ce,
                "final_val_accuracy": va_acc,
                "keep_mask": None if keep_mask is None else keep_mask.copy(),
            }
        return epoch - self.best_epoch >= self.patience

    def report(self, config, model, graph, pretrain=None):
        keep = self.best.get("keep_mask")
        deletion = None
        if keep is not None and (graph.labels != UNLABELED).all() and graph.m > 0:
            deletion = deletion_stats(graph, keep)
        return RunReport(
            config=asdict(config),
            model_variant=model.variant,
            mode=config.mode,
            seed=config.seed,
            split=0,
            epochs_run=len(self.train_loss),
            best_epoch=self.best_epoch,
            train_loss=self.train_loss,
            train_acc=self.train_acc,
            val_loss=self.val_loss,
            val_acc=self.val_acc,
            structure_changes=self.structure_changes,
            test_accuracy=self.best.get("test_accuracy", float("nan")),
            final_train_loss=self.best.get("final_train_loss", float("nan")),
            final_val_accuracy=self.best.get("final_val_accuracy", float("nan")),
            keep_mask=keep,
            deletion=deletion,
            pretrain=pretrain,
            notes=self.notes,
        )


def _rng_streams(seed):
    return {
        "base_init": np.random.default_rng([seed, 0]),
        "ec_init": np.random.default_rng([seed, 1]),
        "dropout": np.random.default_rng([seed, 2]),
        "sample": np.random.default_rng([seed, 3]),
    }


def _check_finite(loss, epoch, context):
    value = loss.item()
    if not np.isfinite(value):
        raise DivergenceError(f"non-finite loss {value} at epoch {epoch} ({context})",
                              epoch=epoch, loss=value)
    return value


def _base_step(model, fixed, graph, config, rng_dropout):
    probs = fixed.forward(model, training=True, rng=rng_dropout)
    loss = ad.cross_entropy(probs, graph.labels, graph.train_mask)
    value = _check_finite(loss, None, "task loss")
    loss.backward()
    adam_step(model.parameters(), config.lr, weight_decay=config.weight_decay)
    return value


def pretrain_edge_classifier(ec: EdgeClassifier, graph: Graph, config: TrainConfig):
    """Supervised homophilous/heterophilious pretraining on training-set edges.

    Early stops on validation-edge accuracy when validation edges exist,
    on training loss otherwise. Restores the best classifier state.
    Raises NoTrainableEdgesError when no edge has both endpoints in the
    training split.
    """
    tags_tr = label_edges(graph, graph.train_mask)
    idx_tr = np.flatnonzero(tags_tr != EDGE_UNKNOWN)
    if idx_tr.size == 0:
        raise NoTrainableEdgesError("no edges with both endpoints in the training set")
    targets_tr = tags_tr[idx_tr].astype(np.int64)
    tags_va = label_edges(graph, graph.val_mask)
    idx_va = np.flatnonzero(tags_va != EDGE_UNKNOWN)
    targets_va = tags_va[idx_va].astype(np.int64)

    row_weights = None
    if config.edge_class_weight is not None:
        row_weights = np.where(targets_tr == 1, float(config.edge_class_weight), 1.0)

    x = ad.constant(graph.features)
    u_tr, v_tr = graph.edges[idx_tr, 0], graph.edges[idx_tr, 1]
    u_va, v_va = graph.edges[idx_va, 0], graph.edges[idx_va, 1]

    curves = {"loss": [], "train_accuracy": [], "val_accuracy": []}
    best_criterion, best_epoch, best_state = -np.inf, -1, None
    for epoch in range(config.pretrain_epochs):
        probs = ec.forward(x, u_tr, v_tr)
        loss = ad.cross_entropy(probs, targets_tr, row_weights=row_weights)
        value = _check_finite(loss, epoch, "edge pretraining")
        loss.backward()
        adam_step(ec.weight_parameters(), config.lr_pretrain, weight_decay=config.weight_decay)
        adam_step(ec.bias_parameters(), config.lr_pretrain)

        tr_acc = float((probs.data.argmax(axis=1) == targets_tr).mean())
        va_acc = None
        if idx_va.size:
            va_probs = ec.forward(x, u_va, v_va).data
            va_acc = float((va_probs.argmax(axis=1) == targets_va).mean())
        curves["loss"].append(value)
        curves["train_accuracy"].append(tr_acc)
        curves["val_accuracy"].append(va_acc)

        criterion = va_acc if va_acc is not None else -value
        if criterion > best_criterion:
            best_criterion, best_epoch = criterion, epoch
            best_state = {name: p.state() for name, p in ec.params.items()}
        if epoch - best_epoch >= config.pretrain_patience:
            break
    for name, p in ec.params.items():
        p.load_state(best_state[name])
    return {
        "epochs_run": len(curves["loss"]),
        "best_epoch": best_epoch,
        "loss": curves["loss"],
        "train_accuracy": curves["train_accuracy"],
        "val_accuracy": curves["val_accuracy"],
        "final_train_accuracy": curves["train_accuracy"][best_epoch],
        "final_val_accuracy": curves["val_accuracy"][best_epoch],
    }


def _train_fixed(graph: Graph, structure: Graph, model: NodeModel, config: TrainConfig,
                 rng_dropout, notes, keep_mask=None, pretrain=None,
                 resample=None) -> RunReport:
    """Shared loop for every mode whose per-epoch structure needs no gradient.

    `resample` (used by random_drop) returns a fresh training structure per
    epoch; evaluation then runs on the full graph.
    """
    tracker = _EpochTracker(config.patience, notes)
    fixed_eval = _FixedStructure(graph if resample is not None else structure,
                                 model, graph.features)
    fixed_train = fixed_eval if resample is None else None
    for epoch in range(config.epochs):
        if resample is not None:
            fixed_train = _FixedStructure(resample(), model, graph.features)
        value = _base_step(model, fixed_train, graph, config, rng_dropout)
        probs_eval = fixed_eval.forward(model).data
        if tracker.record(epoch, value, probs_eval, graph, keep_mask=keep_mask):
            break
    return tracker.report(config, model, graph, pretrain=pretrain)


def _pretrain_or_fallback(ec, graph, config, notes):
    if not config.pretrain:
        notes.append("pretraining disabled by config")
        return None, True
    try:
        return pretrain_edge_classifier(ec, graph, config), True
    except NoTrainableEdgesError:
        warnings.warn("no trainable edges; falling back to base-only training")
        notes.append("pretraining skipped: no trainable edges; base-only fallback")
        return None, False


def train_separate(graph: Graph, base_model: NodeModel, ec: EdgeClassifier,
                   config: TrainConfig, forced_keep=None) -> RunReport:
    """Joint scheme with decoupled updates: the classifier steps on its own
    edge loss, the structure is re-derived from its hard verdicts, and the
    base model steps on the renewed structure."""
    streams = _rng_streams(config.seed)
    notes = []
    pretrain, ok = _pretrain_or_fallback(ec, graph, config, notes)
    if not ok:
        return _train_fixed(graph, graph, base_model, config, streams["dropout"], notes,
                            keep_mask=np.ones(graph.m, dtype=bool))

    scope = classifier_scope(graph, config.ground_truth_policy)
    scoped_idx = np.flatnonzero(scope)
    u_s, v_s = graph.edges[scoped_idx, 0], graph.edges[scoped_idx, 1]

    tags_tr = label_edges(graph, graph.train_mask)
    idx_tr = np.flatnonzero(tags_tr != EDGE_UNKNOWN)
    targets_tr = tags_tr[idx_tr].astype(np.int64)
    u_tr, v_tr = graph.edges[idx_tr, 0], graph.edges[idx_tr, 1]
    row_weights = None
    if config.edge_class_weight is not None:
        row_weights = np.where(targets_tr == 1, float(config.edge_class_weight), 1.0)

    x = ad.constant(graph.features)
    tracker = _EpochTracker(config.patience, notes)
    cache_key, fixed, prev_keep = None, None, None
    for epoch in range(config.epochs):
        # (a) classifier step on its own loss
        probs = ec.forward(x, u_tr, v_tr)
        ec_loss = ad.cross_entropy(probs, targets_tr, row_weights=row_weights)
        _check_finite(ec_loss, epoch, "edge loss")
        ec_loss.backward()
        adam_step(ec.weight_parameters(), config.lr_pretrain, weight_decay=config.weight_decay)
        adam_step(ec.bias_parameters(), config.lr_pretrain)

        # (b) structure from current hard verdicts
        if forced_keep is not None:
            keep_scoped = np.asarray(forced_keep, dtype=bool)
        elif scoped_idx.size:
            keep_scoped = decide_edges(ec.forward_logits(x, u_s, v_s).data).keep
        else:
            keep_scoped = np.zeros(0, dtype=bool)
        structure, keep = structure_from_decisions(graph, keep_scoped, config.ground_truth_policy)
        key = keep.tobytes()
        if key != cache_key:
            fixed = _FixedStructure(structure, base_model, graph.features)
            cache_key = key
        change = 0 if prev_keep is None else int((keep != prev_keep).sum())
        prev_keep = keep

        # (c) base model step on the renewed structure
        value = _base_step(base_model, fixed, graph, config, streams["dropout"])
        probs_eval = fixed.forward(base_model).data
        if tracker.record(epoch, value, probs_eval, graph, keep_mask=keep, structure_change=change):
            break
    return tracker.report(config, base_model, graph, pretrain=pretrain)


def soft_normalization(graph: Graph, base_w, scoped_idx, w_scoped):
    """Differentiable normalized-adjacency weights from straight-through
    edge decisions.

    base_w holds the constant 0/1 weights of edges outside the classifier
    scope; w_scoped (a (k, 1) tensor of straight-through values) overwrites
    the scoped positions. Returns (s_edge, s_self) whose forward values
    equal the sym_normalize entries of the hard structure exactly, while
    gradients flow into the soft probabilities through both the edge
    weights and the degrees.
    """
    u_all, v_all = graph.edges[:, 0], graph.edges[:, 1]
    w_full = ad.place_rows(base_w, scoped_idx, w_scoped)
    deg = ad.add(ad.incident_sum(w_full, u_all, v_all, graph.n), 1.0)
    dinv = ad.power(deg, -0.5)
    s_self = ad.mul(dinv, dinv)
    s_edge = ad.mul(w_full, ad.mul(ad.gather_rows(dinv, u_all), ad.gather_rows(dinv, v_all)))
    return s_edge, s_self


def train_end_to_end(graph: Graph, base_model: NodeModel, ec: EdgeClassifier,
                     config: TrainConfig, forced_keep=None) -> RunReport:
    """Joint scheme where the task loss reaches the classifier through the
    straight-through estimator: the forward pass uses the hard 0/1 edge
    weights, the backward pass differentiates the soft probabilities, and
    the normalization is recomputed from the surviving structure."""
    streams = _rng_streams(config.seed)
    notes = []
    pretrain, ok = _pretrain_or_fallback(ec, graph, config, notes)
    if not ok:
        return _train_fixed(graph, graph, base_model, config, streams["dropout"], notes,
                            keep_mask=np.ones(graph.m, dtype=bool))

    scope = classifier_scope(graph, config.ground_truth_policy)
    scoped_idx = np.flatnonzero(scope)
    u_s, v_s = graph.edges[scoped_idx, 0], graph.edges[scoped_idx, 1]
    u_all = graph.edges[:, 0]
    v_all = graph.edges[:, 1]
    # ground-truth-policy edges enter as constant 0/1 weights
    base_w = np.ones((graph.m, 1))
    fixedsel = ~scope
    if fixedsel.any():
        base_w[fixedsel, 0] = (graph.labels[u_all[fixedsel]] == graph.labels[v_all[fixedsel]]).astype(float)

    x = ad.constant(graph.features)
    tracker = _EpochTracker(config.patience, notes)
    cache_key, fixed_eval, prev_keep = None, None, None
    for epoch in range(config.epochs):
        if forced_keep is not None or scoped_idx.size == 0:
            # no gradient can reach the classifier: use the fixed-structure path
            keep_scoped = (np.asarray(forced_keep, dtype=bool) if forced_keep is not None
                           else np.zeros(0, dtype=bool))
            structure, keep = structure_from_decisions(graph, keep_scoped, config.ground_truth_policy)
            key = keep.tobytes()
            if key != cache_key:
                fixed_eval = _FixedStructure(structure, base_model, graph.features)
                cache_key = key
            value = _base_step(base_model, fixed_eval, graph, config, streams["dropout"])
        else:
            logits = ec.forward_logits(x, u_s, v_s)
            pi = ad.softmax_rows(logits)
            st = ad.argmax_straight_through(pi)
            w_scoped = ad.column(st, 0)
            s_edge, s_self = soft_normalization(graph, base_w, scoped_idx, w_scoped)
            prop = lambda t: ad.propagate_weighted(u_all, v_all, s_edge, s_self, t)
            probs = base_model.forward(x, propagate=prop, training=True, rng=streams["dropout"])
            loss = ad.cross_entropy(probs, graph.labels, graph.train_mask)
            value = _check_finite(loss, epoch, "task loss")
            loss.backward()
            adam_step(base_model.parameters(), config.lr, weight_decay=config.weight_decay)
            adam_step(ec.weight_parameters(), config.lr_pretrain, weight_decay=config.weight_decay)
            adam_step(ec.bias_parameters(), config.lr_pretrain)
            keep_scoped = st.data[:, 0] == 1.0
            structure, keep = structure_from_decisions(graph, keep_scoped, config.ground_truth_policy)
            key = keep.tobytes()
            if key != cache_key:
                fixed_eval = _FixedStructure(structure, base_model, graph.features)
                cache_key = key

        change = 0 if prev_keep is None else int((keep != prev_keep).sum())
        prev_keep = keep
        probs_eval = fixed_eval.forward(base_model).data
        if tracker.record(epoch, value, probs_eval, graph, keep_mask=keep, structure_change=change):
            break
    return tracker.report(config, base_model, graph, pretrain=pretrain)


def train_base_only(graph: Graph, base_model: NodeModel, config: TrainConfig) -> RunReport:
    streams = _rng_streams(config.seed)
    return _train_fixed(graph, graph, base_model, config, streams["dropout"], [],
                        keep_mask=np.ones(graph.m, dtype=bool))


def train_base_on_fixed(graph: Graph, base_model: NodeModel, ec: EdgeClassifier,
                        config: TrainConfig) -> RunReport:
    """One-off variant: pretrain, fix the structure once, then train the base."""
    streams = _rng_streams(config.seed)
    notes = []
    pretrain, ok = _pretrain_or_fallback(ec, graph, config, notes)
    if not ok:
        return _train_fixed(graph, graph, base_model, config, streams["dropout"], notes,
                            keep_mask=np.ones(graph.m, dtype=bool))
    scope = classifier_scope(graph, config.ground_truth_policy)
    scoped_idx = np.flatnonzero(scope)
    if scoped_idx.size:
        x = ad.constant(graph.features)
        u_s, v_s = graph.edges[scoped_idx, 0], graph.edges[scoped_idx, 1]
        keep_scoped = decide_edges(ec.forward_logits(x, u_s, v_s).data).keep
    else:
        keep_scoped = np.zeros(0, dtype=bool)
    structure, keep = structure_from_decisions(graph, keep_scoped, config.ground_truth_policy)
    return _train_fixed(graph, structure, base_model, config, streams["dropout"], notes,
                        keep_mask=keep, pretrain=pretrain)


def train_oracle(graph: Graph, base_model: NodeModel, config: TrainConfig) -> RunReport:
    streams = _rng_streams(config.seed)
    keep = _oracle_keep_mask(graph, config.oracle_rate, streams["sample"])
    return _train_fixed(graph, apply_deletion(graph, keep), base_model, config,
                        streams["dropout"], [f"oracle deletion rate {config.oracle_rate}"],
                        keep_mask=keep)


def train_random_drop(graph: Graph, base_model: NodeModel, config: TrainConfig) -> RunReport:
    """DropEdge-style baseline: a fresh uniform deletion each epoch during
    training; evaluation uses the full structure."""
    streams = _rng_streams(config.seed)
    resample = lambda: random_drop(graph, config.drop_rate, streams["sample"])
    return _train_fixed(graph, graph, base_model, config, streams["dropout"],
                        [f"random drop rate {config.drop_rate}"],
                        keep_mask=np.ones(graph.m, dtype=bool), resample=resample)


def run_experiment(graph: Graph, model_variant: str, config: TrainConfig,
                   split: int = 0) -> RunReport:
    """Build models from the config's seed streams and dispatch on mode."""
    config.validate()
    streams = _rng_streams(config.seed)
    base = NodeModel(model_variant, graph.n_features, graph.n_classes,
                     hidden=config.hidden, k=config.k, dropout=config.dropout,
                     rng=streams["base_init"])
    start = time.perf_counter()
    if config.mode == "base_only":
        report = train_base_only(graph, base, config)
    elif config.mode == "oracle":
        report = train_oracle(graph, base, config)
    elif config.mode == "random_drop":
        report = train_random_drop(graph, base, config)
    else:
        ec = EdgeClassifier(graph.n_features, gamma=config.gamma, rng=streams["ec_init"])
        if config.mode == "separate":
            report = train_separate(graph, base, ec, config)
        elif config.mode == "end_to_end":
            report = train_end_to_end(graph, base, ec, config)
        else:
            report = train_base_on_fixed(graph, base, ec, config)
    report.split = split
    report.wall_clock_s = time.perf_counter() - start
    return report
