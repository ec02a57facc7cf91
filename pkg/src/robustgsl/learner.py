"""Alternating structure/parameter training, the two-stage variant and ablations."""
from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError, ValidationError
from .gcn import GcnParams, _Pass, accuracy, init_params, train_gcn_step
from .graph import DEFAULT_EPS, Graph, normalize_adj
from .prox import ProxConfig, prox_descent_step, structure_objective

log = logging.getLogger(__name__)

MODES = ("joint", "two_stage", "gcn_only")
WEIGHTS = ("alpha", "beta", "gamma", "lam")


@dataclass(frozen=True)
class HyperParams:
    alpha: float = 5e-4
    beta: float = 1.5
    gamma: float = 1.0
    lam: float = 1.0
    eta: float = 1e-2
    eps: float = DEFAULT_EPS
    eta_prime: float = 1e-2
    tau: int = 2
    outer_iters: int = 400
    hidden: int = 16
    seed: int = 0
    mode: str = "joint"
    patience: int | None = None

    def __post_init__(self):
        self.prox_config()
        if self.tau < 1 or self.outer_iters < 1 or self.hidden < 1:
            raise ValidationError("tau, outer_iters and hidden must be >= 1")
        if not (math.isfinite(self.eta_prime) and self.eta_prime > 0):
            raise ValidationError(f"eta_prime must be positive, got {self.eta_prime}")
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.patience is not None and self.patience < 1:
            raise ValidationError("patience must be >= 1")

    def prox_config(self, **overrides) -> ProxConfig:
        kw = {k: getattr(self, k) for k in ("alpha", "beta", "gamma", "lam", "eta", "eps")}
        kw.update(overrides)
        return ProxConfig(**kw)

    def replace(self, **changes) -> "HyperParams":
        return dataclasses.replace(self, **changes)

    def to_json(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_json(cls, obj) -> "HyperParams":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(obj) - names
        if unknown:
            raise ValidationError(f"unknown hyperparameters: {sorted(unknown)}")
        return cls(**obj)


@dataclass
class TrainResult:
    learned_S: np.ndarray
    params: GcnParams
    history: list = field(default_factory=list)
    best_val_accuracy: float = float("nan")
    test_accuracy: float = float("nan")
    best_iteration: int = 0
    method: str = "prognn"

    def to_json(self, sparse=False, threshold=1e-4) -> dict:
        S = self.learned_S
        if sparse:
            i, j = np.nonzero(S > threshold)
            learned = {"n": S.shape[0], "triplets": [[int(a), int(b), float(S[a, b])] for a, b in zip(i, j)]}
        else:
            learned = S.tolist()
        return {
            "method": self.method,
            "best_val_accuracy": self.best_val_accuracy,
            "test_accuracy": self.test_accuracy,
            "best_iteration": self.best_iteration,
            "params": self.params.to_json(),
            "history": self.history,
            "learned_S": learned,
        }

    @classmethod
    def from_json(cls, obj) -> "TrainResult":
        learned = obj["learned_S"]
        if isinstance(learned, dict):
            S = np.zeros((learned["n"], learned["n"]))
            for a, b, v in learned["triplets"]:
                S[a, b] = v
        else:
            S = np.array(learned, dtype=float)
        return cls(
            learned_S=S,
            params=GcnParams.from_json(obj["params"]),
            history=list(obj.get("history", [])),
            best_val_accuracy=float(obj["best_val_accuracy"]),
            test_accuracy=float(obj["test_accuracy"]),
            best_iteration=int(obj.get("best_iteration", 0)),
            method=obj.get("method", "prognn"),
        )


def ablation_variant(hp: HyperParams, variant: str, value: float) -> HyperParams:
    """Keep one of the four regularization weights at ``value``, zero the others."""
    key = "lam" if variant == "lambda" else variant
    if key not in WEIGHTS:
        raise ValidationError(f"unknown ablation variant {variant!r}; expected alpha, beta, gamma or lambda")
    if not value >= 0:
        raise ValidationError("ablation value must be nonnegative")
    changes = {w: 0.0 for w in WEIGHTS}
    changes[key] = float(value)
    return hp.replace(**changes)


class _Tracker:
    """Per-iteration bookkeeping and best-validation snapshotting.

    A snapshot replaces the current best when validation accuracy is strictly
    higher, or equal with a strictly lower validation loss. The small
    validation set makes accuracy ties common, and the loss breaks them
    toward the better-fitted iterate.
    """

    def __init__(self, graph, hp, cfg):
        self.graph, self.hp, self.cfg = graph, hp, cfg
        self.history = []
        self.best_val = -1.0
        self.best_val_loss = math.inf
        self.best = None
        self.best_iter = 0
        self.stale = 0

    def record(self, it, S, params, A_hat, struct=None):
        g = self.graph
        if struct is None:
            struct = structure_objective(S, g.adjacency, g.features, self.cfg)
        fp = _Pass(params, g.features, S, A_hat=A_hat)
        loss = fp.loss(g.labels, g.train_idx)
        obj = struct + self.cfg.gamma * loss
        if not math.isfinite(obj):
            raise DivergenceError(f"objective became non-finite at iteration {it}", iterations=it)
        pred = np.argmax(fp.logits, axis=1)
        val = float(np.mean(pred[g.val_idx] == g.labels[g.val_idx]))
        val_loss = fp.loss(g.labels, g.val_idx)
        self.history.append({"iteration": it, "objective": obj, "train_loss": loss, "val_accuracy": val})
        if val > self.best_val or (val == self.best_val and val_loss < self.best_val_loss):
            self.best_val, self.best_val_loss = val, val_loss
            self.best, self.best_iter, self.stale = (S.copy(), params), it, 0
        else:
            self.stale += 1
        return self.hp.patience is not None and self.stale >= self.hp.patience

    def result(self, method) -> TrainResult:
        g = self.graph
        S, params = self.best
        return TrainResult(
            learned_S=S,
            params=params,
            history=self.history,
            best_val_accuracy=self.best_val,
            test_accuracy=accuracy(params, g.features, S, g.labels, g.test_idx),
            best_iteration=self.best_iter,
            method=method,
        )


def _check_graph(graph):
    if graph.train_idx.size == 0:
        raise ValidationError("graph has no training nodes")
    if graph.val_idx.size == 0:
        raise ValidationError("graph has no validation nodes")


def fit_fixed_structure(graph: Graph, S, hp: HyperParams, method="gcn", cfg=None) -> TrainResult:
    """Train only the GCN weights on a frozen structure matrix.

    Runs ``outer_iters`` rounds of ``tau`` gradient steps, evaluating once per
    round, so the history has the same shape as a joint run.
    """
    _check_graph(graph)
    S = np.array(S, dtype=float)
    cfg = cfg or hp.prox_config()
    params = init_params(graph.d, hp.hidden, graph.c, seed=hp.seed)
    A_hat = normalize_adj(S)
    tracker = _Tracker(graph, hp, cfg)
    struct = structure_objective(S, graph.adjacency, graph.features, cfg)
    for it in range(1, hp.outer_iters + 1):
        for _ in range(hp.tau):
            params = train_gcn_step(params, S, graph.features, graph.labels, graph.train_idx, hp.eta_prime, A_hat=A_hat)
        if tracker.record(it, S, params, A_hat, struct):
            log.debug("early stop at iteration %d", it)
            break
    return tracker.result(method)


def train(graph: Graph, hp: HyperParams, callback=None) -> TrainResult:
    """Alternate one proximal structure step with ``tau`` GCN weight steps.

    The structure starts at the observed adjacency. The returned pair is the
    snapshot with the best validation accuracy. ``callback(it, S, params)``,
    if given, runs after every outer iteration of the joint mode.
    """
    if hp.mode == "two_stage":
        return train_two_stage(graph, hp)
    if hp.mode == "gcn_only":
        return fit_fixed_structure(graph, graph.adjacency, hp, method="gcn")
    _check_graph(graph)
    cfg = hp.prox_config()
    A, X, y, train_idx = graph.adjacency, graph.features, graph.labels, graph.train_idx
    gram = X @ X.T
    S = A.copy()
    params = init_params(graph.d, hp.hidden, graph.c, seed=hp.seed)
    tracker = _Tracker(graph, hp, cfg)
    for it in range(1, hp.outer_iters + 1):
        S = prox_descent_step(S, A, X, params, y, train_idx, cfg, gram=gram)
        if not np.all(np.isfinite(S)):
            raise DivergenceError(f"structure matrix became non-finite at iteration {it}", iterations=it)
        A_hat = normalize_adj(S)
        for _ in range(hp.tau):
            params = train_gcn_step(params, S, X, y, train_idx, hp.eta_prime, A_hat=A_hat)
        if callback is not None:
            callback(it, S, params)
        if tracker.record(it, S, params, A_hat):
            log.debug("early stop at iteration %d", it)
            break
    return tracker.result("prognn")


def learn_structure(graph: Graph, hp: HyperParams) -> np.ndarray:
    """Structure-only optimization (GCN loss weight forced to zero)."""
    cfg = hp.prox_config(gamma=0.0)
    A, X = graph.adjacency, graph.features
    gram = X @ X.T
    params = init_params(graph.d, hp.hidden, graph.c, seed=hp.seed)
    S = A.copy()
    for it in range(1, hp.outer_iters + 1):
        S = prox_descent_step(S, A, X, params, graph.labels, graph.train_idx, cfg, gram=gram)
        if not np.all(np.isfinite(S)):
            raise DivergenceError(f"structure matrix became non-finite at iteration {it}", iterations=it)
    return S


def train_two_stage(graph: Graph, hp: HyperParams) -> TrainResult:
    """Learn the structure without the GCN loss, then fit the GCN on it."""
    _check_graph(graph)
    S = learn_structure(graph, hp)
    return fit_fixed_structure(graph, S, hp, method="prognn_two", cfg=hp.prox_config())
