"""Diagnostics: spectra, rank-decrease curves, feature-difference densities, edge weights."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .graph import Graph, PerturbationRecord
from .prox import svd

RANK_RTOL = 1e-6


@dataclass
class SpectrumReport:
    singular_values: np.ndarray
    numerical_rank: int
    tol: float

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", "singular_value"])
        for i, s in enumerate(self.singular_values):
            w.writerow([i, repr(float(s))])
        return buf.getvalue()

    def to_json(self) -> dict:
        return {"numerical_rank": self.numerical_rank, "tol": self.tol, "sigma_max": _first(self.singular_values)}


def _first(v):
    return float(v[0]) if len(v) else 0.0


def singular_spectrum(M, tol=None) -> SpectrumReport:
    """Singular values of ``M`` and the count above ``tol``.

    ``tol=None`` uses ``1e-6 * sigma_max``.
    """
    if tol is not None and not tol > 0:
        raise ValidationError("tol must be positive")
    sigma = svd(np.asarray(M, dtype=float)).sigma
    if tol is None:
        tol = RANK_RTOL * _first(sigma)
    return SpectrumReport(sigma, int(np.count_nonzero(sigma > tol)), float(tol))


def numerical_rank(M, tol=None) -> int:
    return singular_spectrum(M, tol).numerical_rank


@dataclass
class RankCurves:
    removed: list
    adversarial: list
    normal: list

    def area(self, which) -> float:
        y = np.asarray(getattr(self, which), dtype=float)
        x = np.asarray(self.removed, dtype=float)
        return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(x)))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["removed", "rank_adversarial_removed", "rank_normal_removed"])
        for row in zip(self.removed, self.adversarial, self.normal):
            w.writerow(row)
        return buf.getvalue()


def rank_decrease_curve(poisoned: Graph, record: PerturbationRecord, steps: int, tol=None, seed=0) -> RankCurves:
    """Numerical rank while removing injected edges vs. the same number of normal edges.

    Point ``t`` removes ``round(t * |added| / steps)`` edges: injected ones in
    record order, normal ones in a seeded random order.
    """
    added = list(record.added_edges)
    if not added:
        raise ValidationError("perturbation record has no injected edges")
    if steps < 1 or steps > len(added):
        raise ValidationError(f"steps must lie in [1, {len(added)}], got {steps}")
    injected = set(added)
    normal = [tuple(e) for e in poisoned.edges().tolist() if tuple(e) not in injected]
    if len(normal) < len(added):
        raise ValidationError("fewer normal edges than injected edges")
    for i, j in added:
        if poisoned.adjacency[i, j] == 0:
            raise ValidationError(f"injected edge ({i}, {j}) is not present in the poisoned graph")
    order = np.random.default_rng(seed).permutation(len(normal))
    normal = [normal[t] for t in order[: len(added)]]

    def rank_without(edges):
        A = poisoned.adjacency.copy()
        for i, j in edges:
            A[i, j] = A[j, i] = 0.0
        return numerical_rank(A, tol)

    removed, adv, nor = [], [], []
    for t in range(steps + 1):
        m = int(math.floor(t * len(added) / steps + 0.5))
        removed.append(m)
        adv.append(rank_without(added[:m]))
        nor.append(rank_without(normal[:m]))
    return RankCurves(removed, adv, nor)


def edge_feature_distances(X, edges) -> np.ndarray:
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    diff = X[edges[:, 0]] - X[edges[:, 1]]
    return np.einsum("ij,ij->i", diff, diff)


@dataclass
class FeatureDiffDensity:
    bin_edges: np.ndarray
    normal: np.ndarray
    adversarial: np.ndarray
    adversarial_empty: bool
    mean_normal: float
    mean_adversarial: float

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["bin_left", "bin_right", "density_normal", "density_adversarial"])
        for t in range(len(self.normal)):
            w.writerow([repr(float(self.bin_edges[t])), repr(float(self.bin_edges[t + 1])),
                        repr(float(self.normal[t])), repr(float(self.adversarial[t]))])
        return buf.getvalue()


def feature_diff_density(graph: Graph, record: PerturbationRecord, bins: int = 20) -> FeatureDiffDensity:
    """Histograms of ``|x_i - x_j|^2`` over normal and injected edges on shared bins.

    ``graph`` is the poisoned graph. Densities integrate to 1 over the bins.
    """
    if bins < 1:
        raise ValidationError("bins must be >= 1")
    injected = set(record.added_edges)
    normal = [e for e in map(tuple, graph.edges().tolist()) if e not in injected]
    dn = edge_feature_distances(graph.features, normal)
    da = edge_feature_distances(graph.features, sorted(injected))
    both = np.concatenate([dn, da])
    lo, hi = (float(both.min()), float(both.max())) if both.size else (0.0, 1.0)
    if hi <= lo:
        hi = lo + 1.0
    edges = np.linspace(lo, hi, bins + 1)

    def density(v):
        if v.size == 0:
            return np.zeros(bins)
        return np.histogram(v, bins=edges, density=True)[0]

    return FeatureDiffDensity(
        bin_edges=edges,
        normal=density(dn),
        adversarial=density(da),
        adversarial_empty=da.size == 0,
        mean_normal=float(dn.mean()) if dn.size else float("nan"),
        mean_adversarial=float(da.mean()) if da.size else float("nan"),
    )


@dataclass
class EdgeWeightReport:
    normal_weights: np.ndarray
    adversarial_weights: np.ndarray
    mean_normal: float
    mean_adversarial: float

    def to_json(self) -> dict:
        return {
            "n_normal": int(self.normal_weights.size),
            "n_adversarial": int(self.adversarial_weights.size),
            "mean_normal": self.mean_normal,
            "mean_adversarial": self.mean_adversarial,
        }

    def to_csv(self, bins=20) -> str:
        edges = np.linspace(0.0, 1.0, bins + 1)

        def density(v):
            return np.histogram(v, bins=edges, density=True)[0] if v.size else np.zeros(bins)

        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["bin_left", "bin_right", "density_normal", "density_adversarial"])
        dn, da = density(self.normal_weights), density(self.adversarial_weights)
        for t in range(bins):
            w.writerow([repr(float(edges[t])), repr(float(edges[t + 1])), repr(float(dn[t])), repr(float(da[t]))])
        return buf.getvalue()


def edge_weight_report(learned_S, clean: Graph, record: PerturbationRecord) -> EdgeWeightReport:
    """Learned weights on clean edges vs. injected edges."""
    S = np.asarray(learned_S, dtype=float)
    if S.shape != (clean.n, clean.n):
        raise ValidationError(f"learned structure is {S.shape}, expected {(clean.n, clean.n)}")
    ce = clean.edges()
    ad = np.asarray(record.added_edges, dtype=np.int64).reshape(-1, 2)
    if ad.size and (ad.min() < 0 or ad.max() >= clean.n):
        raise ValidationError("record refers to nodes outside the graph")
    wn = S[ce[:, 0], ce[:, 1]]
    wa = S[ad[:, 0], ad[:, 1]]
    return EdgeWeightReport(
        normal_weights=wn,
        adversarial_weights=wa,
        mean_normal=float(wn.mean()) if wn.size else float("nan"),
        mean_adversarial=float(wa.mean()) if wa.size else float("nan"),
    )
