"""hetdrop: boost message-passing GNNs by learning which heterophilious
edges to drop.

Edges between same-class nodes are homophilous, edges between classes are
heterophilious; a binary edge classifier learns to tell them apart and the
graph structure is pruned accordingly, jointly with node-model training.
"""

from ._kernels import BACKEND
from .analysis import (DeletionStats, DistanceStats, SpectrumReport,
                       deletion_stats, distance_stats, recommend_gamma,
                       spectrum_report, symmetric_eigenvalues)
from .graph import (EDGE_HETEROPHILIOUS, EDGE_HOMOPHILOUS, EDGE_UNKNOWN,
                    UNLABELED, Graph, PropagationMatrix, apply_deletion,
                    build_graph, homophily_ratio, label_edges,
                    stratified_split_masks, sym_normalize, with_masks)
from .models import (EdgeClassifier, NodeModel, classify_edges,
                     edge_representation, forward_node_model, sgc_precompute)
from .optim import Parameter, adam_step
from .pipeline import (DivergenceError, EdgeDecision, NoTrainableEdgesError,
                       RunReport, TrainConfig, classifier_scope, decide_edges,
                       evaluate, oracle_drop, pretrain_edge_classifier,
                       random_drop, run_experiment, soft_normalization,
                       structure_from_decisions, train_base_on_fixed,
                       train_base_only, train_end_to_end, train_oracle,
                       train_random_drop, train_separate)
from .synth import SbmSpec, feature_regime, generate_sbm

__version__ = "0.1.0"
