"""Robust graph structure learning: jointly learn a clean structure and a GCN.

The learned structure matrix is kept close to the observed adjacency while
being pushed toward sparsity, low rank and feature smoothness, and it is
trained together with a two-layer GCN that consumes it.
"""
from .errors import (
    CapacityError,
    DivergenceError,
    NodeRangeError,
    NumericalError,
    ParseError,
    RobustGSLError,
    ShapeError,
    ValidationError,
)
from .graph import (
    Graph,
    PerturbationRecord,
    feature_smoothness,
    feature_smoothness_grad,
    load_graph,
    load_graph_dir,
    normalize_adj,
    normalized_laplacian,
    save_graph,
    save_graph_dir,
    sbm_generate,
)
from .gcn import GcnParams, accuracy, gcn_forward, gcn_grad_S, gcn_grad_theta, gcn_loss, init_params, predict
from .prox import ProxConfig, objective, project_S, prox_descent_step, prox_l1, prox_nuclear, smooth_grad, svd
from .learner import HyperParams, TrainResult, ablation_variant, train, train_two_stage
from .attacks import dissimilar_feature_attack, random_attack
from .baselines import METHODS, gcn_baseline, gcn_jaccard_baseline, gcn_nograph, gcn_svd_baseline, run_method
from .analysis import edge_weight_report, feature_diff_density, numerical_rank, rank_decrease_curve, singular_spectrum
from .kernels import BACKEND

__version__ = "0.1.0"
