"""Two-layer GCN in numpy with hand-written backward passes.

The model is ``softmax(A_hat relu(A_hat X W1) W2)`` with ``A_hat`` the
symmetric normalization of the structure matrix. Gradients are exact and are
taken both with respect to the weights and with respect to the structure.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ShapeError, ValidationError
from .graph import normalize_adj


@dataclass(frozen=True)
class GcnParams:
    W1: np.ndarray
    W2: np.ndarray

    @property
    def hidden(self) -> int:
        return self.W1.shape[1]

    def to_json(self) -> dict:
        return {"W1": self.W1.tolist(), "W2": self.W2.tolist()}

    @classmethod
    def from_json(cls, obj) -> "GcnParams":
        W1 = np.array(obj["W1"], dtype=float)
        W2 = np.array(obj["W2"], dtype=float)
        if W1.ndim != 2 or W2.ndim != 2 or W1.shape[1] != W2.shape[0]:
            raise ShapeError(f"incompatible weight shapes {W1.shape} and {W2.shape}")
        return cls(W1, W2)

    def allclose(self, other, **kw) -> bool:
        return np.allclose(self.W1, other.W1, **kw) and np.allclose(self.W2, other.W2, **kw)


@dataclass(frozen=True)
class GcnOutput:
    probs: np.ndarray
    hidden: np.ndarray
    logits: np.ndarray


def init_params(d, hidden, c, seed=0) -> GcnParams:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization."""
    rng = np.random.default_rng(seed)
    b1 = 1.0 / np.sqrt(d)
    b2 = 1.0 / np.sqrt(hidden)
    return GcnParams(rng.uniform(-b1, b1, (d, hidden)), rng.uniform(-b2, b2, (hidden, c)))


def _check(params, X, S):
    n = X.shape[0]
    if S.shape != (n, n):
        raise ShapeError(f"structure matrix must be {n}x{n}, got {S.shape}")
    if params.W1.shape[0] != X.shape[1]:
        raise ShapeError(f"W1 has {params.W1.shape[0]} rows but X has {X.shape[1]} columns")
    if params.W2.shape[0] != params.W1.shape[1]:
        raise ShapeError("W1 and W2 hidden widths differ")


def _softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _log_softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def _index(idx):
    idx = np.unique(np.asarray(idx, dtype=np.int64))
    if idx.size == 0:
        raise ValidationError("index set must be nonempty")
    return idx


class _Pass:
    """Forward pass with the intermediates kept for backprop."""

    def __init__(self, params, X, S, A_hat=None):
        X = np.asarray(X, dtype=float)
        S = np.asarray(S, dtype=float)
        _check(params, X, S)
        self.params, self.X, self.S = params, X, S
        self.A_hat = normalize_adj(S) if A_hat is None else A_hat
        self.AX = self.A_hat @ X
        self.pre = self.AX @ params.W1
        self.H = np.maximum(self.pre, 0.0)
        self.HW = self.H @ params.W2
        self.logits = self.A_hat @ self.HW

    def output(self) -> GcnOutput:
        return GcnOutput(_softmax(self.logits), self.H, self.logits)

    def loss(self, labels, idx):
        logp = _log_softmax(self.logits[idx])
        return float(-logp[np.arange(idx.size), labels[idx]].mean())

    def dlogits(self, labels, idx):
        g = np.zeros_like(self.logits)
        p = _softmax(self.logits[idx])
        p[np.arange(idx.size), labels[idx]] -= 1.0
        g[idx] = p / idx.size
        return g

    def backward(self, labels, idx, wrt_S=False):
        G = self.dlogits(labels, idx)
        W1, W2 = self.params.W1, self.params.W2
        AH = self.A_hat @ self.H
        dW2 = AH.T @ G
        dH = self.A_hat.T @ G @ W2.T
        dpre = dH * (self.pre > 0)
        dW1 = self.AX.T @ dpre
        if not wrt_S:
            return dW1, dW2, None
        dA = G @ self.HW.T + dpre @ (self.X @ W1).T
        n = self.S.shape[0]
        q = 1.0 / np.sqrt(1.0 + self.S.sum(axis=1))
        grad = kernels.sym_norm_backward(dA, self.S + np.eye(n), q, np.ones(n))
        return dW1, dW2, 0.5 * (grad + grad.T)


def gcn_forward(params: GcnParams, X, S) -> GcnOutput:
    return _Pass(params, X, S).output()


def gcn_loss(params: GcnParams, S, X, labels, idx) -> float:
    """Mean cross-entropy of the true labels over ``idx``."""
    idx = _index(idx)
    return _Pass(params, X, S).loss(np.asarray(labels), idx)


def gcn_grad_theta(params: GcnParams, S, X, labels, idx):
    idx = _index(idx)
    dW1, dW2, _ = _Pass(params, X, S).backward(np.asarray(labels), idx)
    return dW1, dW2


def gcn_grad_S(params: GcnParams, S, X, labels, idx) -> np.ndarray:
    """Gradient of :func:`gcn_loss` in ``S``, through the degree normalization.

    Returned symmetrized, ``(G + G^T) / 2``.
    """
    idx = _index(idx)
    return _Pass(params, X, S).backward(np.asarray(labels), idx, wrt_S=True)[2]


def gcn_loss_and_grads(params, S, X, labels, idx, wrt_S=False, A_hat=None):
    """Loss plus ``(dW1, dW2, dS)`` from a single forward pass; ``dS`` is None unless requested."""
    idx = _index(idx)
    labels = np.asarray(labels)
    fp = _Pass(params, X, S, A_hat=A_hat)
    return fp.loss(labels, idx), fp.backward(labels, idx, wrt_S=wrt_S)


def train_gcn_step(params: GcnParams, S, X, labels, idx, lr, A_hat=None) -> GcnParams:
    """One full-batch gradient-descent step on ``(W1, W2)``. Returns new params."""
    if lr < 0:
        raise ValidationError("learning rate must be nonnegative")
    idx = _index(idx)
    dW1, dW2, _ = _Pass(params, X, S, A_hat=A_hat).backward(np.asarray(labels), idx)
    return GcnParams(params.W1 - lr * dW1, params.W2 - lr * dW2)


def predict(params, X, S, A_hat=None) -> np.ndarray:
    return np.argmax(_Pass(params, X, S, A_hat=A_hat).logits, axis=1)


def accuracy(params, X, S, labels, idx, A_hat=None) -> float:
    idx = np.asarray(idx, dtype=np.int64)
    if idx.size == 0:
        return float("nan")
    pred = predict(params, X, S, A_hat=A_hat)
    return float(np.mean(pred[idx] == np.asarray(labels)[idx]))
