"""Edge-injection attacks producing a poisoned graph and its perturbation record."""
from __future__ import annotations

import math

import numpy as np

from .errors import CapacityError, ValidationError
from .graph import Graph, PerturbationRecord


def budget(graph: Graph, rate: float) -> int:
    """Number of edges to inject: ``rate * |E|`` rounded half up."""
    if not (0.0 <= rate <= 1.0):
        raise ValidationError(f"perturbation rate must lie in [0, 1], got {rate}")
    return int(math.floor(rate * graph.num_edges + 0.5))


def _absent_pairs(graph):
    i, j = np.triu_indices(graph.n, k=1)
    keep = graph.adjacency[i, j] == 0
    return i[keep], j[keep]


def _poison(graph, rate, pairs):
    record = PerturbationRecord(added_edges=[tuple(map(int, p)) for p in pairs], perturbation_rate=float(rate))
    return graph.with_adjacency(record.apply(graph.adjacency)), record


def random_attack(graph: Graph, rate: float, seed=0):
    """Inject ``rate * |E|`` uniformly random new edges. Returns ``(poisoned, record)``."""
    k = budget(graph, rate)
    i, j = _absent_pairs(graph)
    if k > i.size:
        raise CapacityError(f"cannot inject {k} edges: only {i.size} node pairs are absent")
    rng = np.random.default_rng(seed)
    pick = np.sort(rng.choice(i.size, size=k, replace=False))
    return _poison(graph, rate, zip(i[pick], j[pick]))


def dissimilar_feature_attack(graph: Graph, rate: float, seed=0, use_labels=True, max_per_node="auto"):
    """Inject absent pairs greedily in order of decreasing squared feature distance.

    With ``use_labels`` only pairs whose labels differ are candidates. Pairs
    are scanned from the largest distance down (ties: lexicographically
    smaller pair first) and a pair is skipped once either endpoint has
    received ``max_per_node`` injected edges. ``"auto"`` sets the cap to
    ``ceil(2k / n) + 1``, one more than the even share of the budget, so the
    injection is spread over the graph instead of piling onto the few nodes
    with the most extreme features. ``None`` disables the cap (plain top-k).
    The result does not depend on ``seed``.
    """
    k = budget(graph, rate)
    i, j = _absent_pairs(graph)
    if use_labels:
        keep = graph.labels[i] != graph.labels[j]
        i, j = i[keep], j[keep]
    if k > i.size:
        raise CapacityError(f"cannot inject {k} edges: only {i.size} candidate pairs")
    if max_per_node == "auto":
        max_per_node = math.ceil(2 * k / graph.n) + 1
    X = graph.features
    sq = np.einsum("ij,ij->i", X, X)
    dist = np.maximum(sq[i] + sq[j] - 2.0 * np.einsum("ij,ij->i", X[i], X[j]), 0.0)
    order = np.lexsort((j, i, -dist))
    if max_per_node is None:
        chosen = order[:k]
    else:
        used = np.zeros(graph.n, dtype=np.int64)
        chosen = []
        for t in order:
            if len(chosen) == k:
                break
            a, b = i[t], j[t]
            if used[a] < max_per_node and used[b] < max_per_node:
                used[a] += 1
                used[b] += 1
                chosen.append(t)
        if len(chosen) < k:
            raise CapacityError(f"cannot inject {k} edges with at most {max_per_node} per node")
        chosen = np.array(chosen, dtype=np.int64)
    pick = chosen[np.lexsort((j[chosen], i[chosen]))]
    return _poison(graph, rate, zip(i[pick], j[pick]))


ATTACKS = {
    "random": random_attack,
    "dissimilar": dissimilar_feature_attack,
}
