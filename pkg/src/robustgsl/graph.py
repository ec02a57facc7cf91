"""Graph container, file I/O, normalizations and the feature-smoothness term."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .errors import NodeRangeError, ParseError, ShapeError, ValidationError

DEFAULT_EPS = 1e-8


@dataclass
class Graph:
    """Undirected attributed graph with a node split.

    ``adjacency`` is dense, symmetric, zero on the diagonal, with entries in
    ``[0, 1]``. Self-loops are only ever added inside :func:`normalize_adj`.
    """

    adjacency: np.ndarray
    features: np.ndarray
    labels: np.ndarray
    train_idx: np.ndarray
    val_idx: np.ndarray
    test_idx: np.ndarray
    n_classes: int = field(default=0)

    def __post_init__(self):
        self.adjacency = np.asarray(self.adjacency, dtype=float)
        self.features = np.asarray(self.features, dtype=float)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.train_idx = np.asarray(self.train_idx, dtype=np.int64)
        self.val_idx = np.asarray(self.val_idx, dtype=np.int64)
        self.test_idx = np.asarray(self.test_idx, dtype=np.int64)
        if not self.n_classes:
            self.n_classes = int(self.labels.max()) + 1 if self.labels.size else 0
        self.validate()

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def c(self) -> int:
        return self.n_classes

    def validate(self):
        A = self.adjacency
        n = A.shape[0]
        if A.ndim != 2 or A.shape != (n, n):
            raise ShapeError(f"adjacency must be square, got {A.shape}")
        if self.features.ndim != 2 or self.features.shape[0] != n:
            raise ShapeError(f"features must have {n} rows, got {self.features.shape}")
        if self.labels.shape != (n,):
            raise ShapeError(f"labels must have length {n}, got {self.labels.shape}")
        if not np.array_equal(A, A.T):
            raise ValidationError("adjacency is not symmetric")
        if np.any(np.diag(A) != 0):
            raise ValidationError("adjacency has nonzero diagonal")
        if A.size and (A.min() < 0 or A.max() > 1):
            raise ValidationError("adjacency entries must lie in [0, 1]")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
            raise ValidationError(f"labels must lie in [0, {self.n_classes})")
        seen = set()
        for name in ("train_idx", "val_idx", "test_idx"):
            idx = getattr(self, name)
            if idx.size and (idx.min() < 0 or idx.max() >= n):
                raise NodeRangeError(f"{name} contains ids outside [0, {n})")
            ids = set(idx.tolist())
            if len(ids) != idx.size:
                raise ValidationError(f"{name} contains duplicate ids")
            if seen & ids:
                raise ValidationError(f"{name} overlaps another split")
            seen |= ids

    def edges(self) -> np.ndarray:
        """Nonzero upper-triangle pairs ``(i, j)``, ``i < j``, in row-major order."""
        i, j = np.nonzero(np.triu(self.adjacency, k=1))
        return np.stack([i, j], axis=1)

    @property
    def num_edges(self) -> int:
        return int(np.count_nonzero(np.triu(self.adjacency, k=1)))

    def with_adjacency(self, adjacency) -> "Graph":
        return Graph(
            adjacency=np.array(adjacency, dtype=float),
            features=self.features,
            labels=self.labels,
            train_idx=self.train_idx,
            val_idx=self.val_idx,
            test_idx=self.test_idx,
            n_classes=self.n_classes,
        )

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            self.n_classes == other.n_classes
            and np.array_equal(self.adjacency, other.adjacency)
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.labels, other.labels)
            and np.array_equal(self.train_idx, other.train_idx)
            and np.array_equal(self.val_idx, other.val_idx)
            and np.array_equal(self.test_idx, other.test_idx)
        )


@dataclass
class PerturbationRecord:
    """Edges changed by an attack, as ``(i, j)`` pairs with ``i < j``."""

    added_edges: list = field(default_factory=list)
    removed_edges: list = field(default_factory=list)
    perturbation_rate: float = 0.0

    def __post_init__(self):
        self.added_edges = [_ordered_pair(e) for e in self.added_edges]
        self.removed_edges = [_ordered_pair(e) for e in self.removed_edges]
        if set(self.added_edges) & set(self.removed_edges):
            raise ValidationError("an edge cannot be both added and removed")

    def apply(self, adjacency) -> np.ndarray:
        A = np.array(adjacency, dtype=float)
        for i, j in self.added_edges:
            A[i, j] = A[j, i] = 1.0
        for i, j in self.removed_edges:
            A[i, j] = A[j, i] = 0.0
        return A

    def revert(self, adjacency) -> np.ndarray:
        A = np.array(adjacency, dtype=float)
        for i, j in self.added_edges:
            A[i, j] = A[j, i] = 0.0
        for i, j in self.removed_edges:
            A[i, j] = A[j, i] = 1.0
        return A

    def to_json(self) -> dict:
        return {
            "added": [list(e) for e in self.added_edges],
            "removed": [list(e) for e in self.removed_edges],
            "rate": self.perturbation_rate,
        }

    @classmethod
    def from_json(cls, obj) -> "PerturbationRecord":
        return cls(
            added_edges=[tuple(e) for e in obj.get("added", [])],
            removed_edges=[tuple(e) for e in obj.get("removed", [])],
            perturbation_rate=float(obj.get("rate", 0.0)),
        )

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_json()) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "PerturbationRecord":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def _ordered_pair(e):
    i, j = int(e[0]), int(e[1])
    if i == j:
        raise ValidationError(f"self-loop ({i}, {j}) in perturbation record")
    return (i, j) if i < j else (j, i)


# --------------------------------------------------------------------------
# file I/O


def _read_edges(path):
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            parts = body.split()
            if len(parts) != 2:
                raise ParseError(path, lineno, f"expected two node ids, got {body!r}")
            try:
                i, j = int(parts[0]), int(parts[1])
            except ValueError:
                raise ParseError(path, lineno, f"non-integer node id in {body!r}") from None
            pairs.append((lineno, i, j))
    return pairs


def _read_matrix_csv(path):
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            body = line.strip()
            if not body:
                continue
            try:
                rows.append([float(v) for v in body.split(",")])
            except ValueError:
                raise ParseError(path, lineno, "non-numeric feature value") from None
            if len(rows[-1]) != len(rows[0]):
                raise ParseError(path, lineno, f"expected {len(rows[0])} columns, got {len(rows[-1])}")
    return np.array(rows, dtype=float).reshape(len(rows), -1)


def _read_labels(path):
    labels = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            body = line.strip()
            if not body:
                continue
            try:
                labels.append(int(body))
            except ValueError:
                raise ParseError(path, lineno, f"label must be an integer, got {body!r}") from None
    return np.array(labels, dtype=np.int64)


def load_graph(edge_path, feature_path, label_path, split_path) -> Graph:
    """Read a graph from an edge list, feature CSV, label file and split JSON.

    The node count comes from the feature file. Duplicate and reversed edge
    lines collapse to one undirected edge; self-loop lines are dropped.
    """
    features = _read_matrix_csv(feature_path)
    labels = _read_labels(label_path)
    n = features.shape[0]
    if labels.shape[0] != n:
        raise ValidationError(
            f"{label_path}: {labels.shape[0]} labels for {n} feature rows; node ids must be contiguous"
        )
    A = np.zeros((n, n))
    for lineno, i, j in _read_edges(edge_path):
        if i < 0 or j < 0:
            raise ValidationError(f"{edge_path}:{lineno}: node ids must be 0-based and contiguous")
        if i >= n or j >= n:
            raise NodeRangeError(f"{edge_path}:{lineno}: node id {max(i, j)} out of range for {n} nodes")
        if i != j:
            A[i, j] = A[j, i] = 1.0
    try:
        split = json.loads(Path(split_path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(split_path, exc.lineno, exc.msg) from None
    missing = {"train", "val", "test"} - set(split)
    if missing:
        raise ValidationError(f"{split_path}: missing keys {sorted(missing)}")
    return Graph(
        adjacency=A,
        features=features,
        labels=labels,
        train_idx=split["train"],
        val_idx=split["val"],
        test_idx=split["test"],
    )


GRAPH_FILES = ("edges.txt", "features.csv", "labels.txt", "split.json")


def save_graph(graph: Graph, edge_path, feature_path, label_path, split_path):
    """Write the four files read by :func:`load_graph`. Output is byte-stable."""
    if np.any((graph.adjacency != 0) & (graph.adjacency != 1)):
        raise ValidationError("only binary adjacency can be written as an edge list")
    with open(edge_path, "w", encoding="utf-8") as fh:
        for i, j in graph.edges():
            fh.write(f"{i} {j}\n")
    with open(feature_path, "w", encoding="utf-8") as fh:
        for row in graph.features:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    with open(label_path, "w", encoding="utf-8") as fh:
        fh.writelines(f"{int(y)}\n" for y in graph.labels)
    split = {
        "train": graph.train_idx.tolist(),
        "val": graph.val_idx.tolist(),
        "test": graph.test_idx.tolist(),
    }
    Path(split_path).write_text(json.dumps(split) + "\n", encoding="utf-8")


def save_graph_dir(graph: Graph, directory):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_graph(graph, *(directory / name for name in GRAPH_FILES))


def load_graph_dir(directory) -> Graph:
    directory = Path(directory)
    return load_graph(*(directory / name for name in GRAPH_FILES))


# --------------------------------------------------------------------------
# normalizations


def normalize_adj(S) -> np.ndarray:
    """Symmetric GCN normalization ``D^-1/2 (S + I) D^-1/2`` with ``D_ii = 1 + sum_j S_ij``."""
    S = np.asarray(S, dtype=float)
    q = 1.0 / np.sqrt(1.0 + S.sum(axis=1))
    return (S + np.eye(S.shape[0])) * np.outer(q, q)


def floored_degrees(S, eps=DEFAULT_EPS):
    """Row sums of ``S`` floored at ``eps``, and the mask of unfloored rows."""
    deg = np.asarray(S, dtype=float).sum(axis=1)
    free = deg > eps
    return np.where(free, deg, eps), free


def normalized_laplacian(S, eps=DEFAULT_EPS) -> np.ndarray:
    """``D^-1/2 (D - S) D^-1/2`` with degrees floored at ``eps``.

    An isolated node gets the identity row (``eps / eps`` on the diagonal).
    """
    S = np.asarray(S, dtype=float)
    deg, _ = floored_degrees(S, eps)
    q = 1.0 / np.sqrt(deg)
    L = -S * np.outer(q, q)
    L[np.diag_indices_from(L)] += deg * q * q
    return L


def feature_smoothness(S, X, eps=DEFAULT_EPS) -> float:
    """Degree-normalized smoothness ``tr(X^T L X)`` of features ``X`` over ``S``."""
    X = np.asarray(X, dtype=float)
    return float(np.sum(X * (normalized_laplacian(S, eps) @ X)))


def feature_smoothness_grad(S, X, eps=DEFAULT_EPS, gram=None) -> np.ndarray:
    """Gradient of :func:`feature_smoothness` with respect to every entry of ``S``.

    Uses ``tr(X^T L X) = sum_i |x_i|^2 - <X X^T, D^-1/2 S D^-1/2>``. Degrees
    held at the ``eps`` floor are constants, so their rows get no degree term.
    The result is not symmetrized.
    """
    S = np.asarray(S, dtype=float)
    K = X @ X.T if gram is None else gram
    deg, free = floored_degrees(S, eps)
    q = 1.0 / np.sqrt(deg)
    return kernels.sym_norm_backward(-K, S, q, free.astype(float))


# --------------------------------------------------------------------------
# synthetic data


def random_split(labels, rng, train_frac=0.1, val_frac=0.1):
    """Class-stratified random split into train/val/test index arrays."""
    labels = np.asarray(labels)
    train, val, test = [], [], []
    for cls in np.unique(labels):
        members = rng.permutation(np.flatnonzero(labels == cls))
        n_train = int(round(train_frac * members.size))
        n_val = int(round(val_frac * members.size))
        train.append(members[:n_train])
        val.append(members[n_train : n_train + n_val])
        test.append(members[n_train + n_val :])
    return tuple(np.sort(np.concatenate(part)) for part in (train, val, test))


def sbm_generate(n_per_block, blocks, p_in, p_out, feature_noise=0.0, seed=0):
    """Sample a stochastic block model graph with block-indicator features.

    Labels are block ids. Features are the one-hot block indicator plus
    Gaussian noise with standard deviation ``feature_noise``. Returns
    ``(graph, block_assignment)``.
    """
    if not (0.0 <= p_out < p_in <= 1.0):
        raise ValidationError(f"need 0 <= p_out < p_in <= 1, got p_in={p_in}, p_out={p_out}")
    if n_per_block < 1 or blocks < 1:
        raise ValidationError("n_per_block and blocks must be positive")
    if feature_noise < 0:
        raise ValidationError("feature_noise must be nonnegative")
    rng = np.random.default_rng(seed)
    n = n_per_block * blocks
    block = np.repeat(np.arange(blocks), n_per_block)
    prob = np.where(block[:, None] == block[None, :], p_in, p_out)
    upper = np.triu(rng.random((n, n)) < prob, k=1)
    A = (upper | upper.T).astype(float)
    X = np.eye(blocks)[block] + feature_noise * rng.standard_normal((n, blocks))
    train, val, test = random_split(block, rng)
    graph = Graph(A, X, block, train, val, test, n_classes=blocks)
    return graph, block.copy()
