"""Preprocessing defenses and reference models sharing the TrainResult schema."""
from __future__ import annotations

import numpy as np

from .errors import ValidationError
from .graph import Graph
from .learner import HyperParams, TrainResult, fit_fixed_structure, train, train_two_stage
from .prox import project_S, svd


def gcn_baseline(graph: Graph, hp: HyperParams) -> TrainResult:
    """Plain GCN on the observed adjacency."""
    return fit_fixed_structure(graph, graph.adjacency, hp, method="gcn")


def gcn_nograph(graph: Graph, hp: HyperParams) -> TrainResult:
    """GCN on the zero matrix, whose normalization is the identity (a 2-layer MLP)."""
    return fit_fixed_structure(graph, np.zeros((graph.n, graph.n)), hp, method="gcn_nograph")


def low_rank_approximation(A, k: int) -> np.ndarray:
    """Best rank-``k`` approximation of ``A`` in Frobenius norm."""
    A = np.asarray(A, dtype=float)
    if not 1 <= k <= A.shape[0]:
        raise ValidationError(f"rank must lie in [1, {A.shape[0]}], got {k}")
    res = svd(A)
    return (res.u[:, :k] * res.sigma[:k]) @ res.v[:, :k].T


def gcn_svd_baseline(graph: Graph, k: int, hp: HyperParams) -> TrainResult:
    """GCN on the rank-``k`` reconstruction of the adjacency, projected into [0, 1]."""
    S = project_S(low_rank_approximation(graph.adjacency, k))
    return fit_fixed_structure(graph, S, hp, method="gcn_svd")


def binarize_features(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if not np.all(np.isfinite(X)):
        raise ValidationError("features contain non-finite values and cannot be binarized")
    return (X > 0).astype(float)


def jaccard_similarity(B, pairs) -> np.ndarray:
    """Jaccard similarity of binary rows of ``B`` for each ``(i, j)`` in ``pairs``.

    Two all-zero rows have similarity 0.
    """
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if pairs.size == 0:
        return np.zeros(0)
    Bi, Bj = B[pairs[:, 0]], B[pairs[:, 1]]
    inter = np.sum(Bi * Bj, axis=1)
    union = np.sum(np.maximum(Bi, Bj), axis=1)
    return np.divide(inter, union, out=np.zeros_like(inter), where=union > 0)


def jaccard_prune(graph: Graph, threshold: float) -> np.ndarray:
    """Adjacency with every edge of Jaccard similarity below ``threshold`` removed."""
    if not 0.0 <= threshold <= 1.0:
        raise ValidationError(f"threshold must lie in [0, 1], got {threshold}")
    B = binarize_features(graph.features)
    edges = graph.edges()
    sim = jaccard_similarity(B, edges)
    A = graph.adjacency.copy()
    drop = edges[sim < threshold]
    A[drop[:, 0], drop[:, 1]] = 0.0
    A[drop[:, 1], drop[:, 0]] = 0.0
    return A


def gcn_jaccard_baseline(graph: Graph, threshold: float, hp: HyperParams) -> TrainResult:
    return fit_fixed_structure(graph, jaccard_prune(graph, threshold), hp, method="gcn_jaccard")


SVD_RANKS = (5, 10, 15, 50)
JACCARD_THRESHOLDS = (0.01, 0.02, 0.05)


def _best_by_validation(results):
    # first candidate wins ties, so grid order is the tie-break
    best = results[0]
    for r in results[1:]:
        if r.best_val_accuracy > best.best_val_accuracy:
            best = r
    return best


def gcn_svd_tuned(graph: Graph, hp: HyperParams, ranks=SVD_RANKS) -> TrainResult:
    """:func:`gcn_svd_baseline` with the rank picked on validation accuracy."""
    ranks = [k for k in ranks if k <= graph.n] or [graph.n]
    return _best_by_validation([gcn_svd_baseline(graph, k, hp) for k in ranks])


def gcn_jaccard_tuned(graph: Graph, hp: HyperParams, thresholds=JACCARD_THRESHOLDS) -> TrainResult:
    return _best_by_validation([gcn_jaccard_baseline(graph, t, hp) for t in thresholds])


def run_method(name: str, graph: Graph, hp: HyperParams, svd_rank=None, jaccard_threshold=None) -> TrainResult:
    """Dispatch a defense by its registry name."""
    if name == "prognn":
        return train(graph, hp.replace(mode="joint"))
    if name == "prognn_two":
        return train_two_stage(graph, hp)
    if name == "gcn":
        return gcn_baseline(graph, hp)
    if name == "gcn_nograph":
        return gcn_nograph(graph, hp)
    if name == "gcn_svd":
        return gcn_svd_tuned(graph, hp) if svd_rank is None else gcn_svd_baseline(graph, int(svd_rank), hp)
    if name == "gcn_jaccard":
        if jaccard_threshold is None:
            return gcn_jaccard_tuned(graph, hp)
        return gcn_jaccard_baseline(graph, float(jaccard_threshold), hp)
    raise ValidationError(f"unknown method {name!r}; expected one of {', '.join(METHODS)}")


METHODS = ("prognn", "prognn_two", "gcn", "gcn_svd", "gcn_jaccard", "gcn_nograph")
