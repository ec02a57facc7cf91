"""Structure-matrix subproblem: smooth gradient, proximal maps and projection."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DivergenceError, NumericalError, ShapeError, ValidationError
from .gcn import gcn_loss_and_grads
from .graph import DEFAULT_EPS, feature_smoothness, feature_smoothness_grad


@dataclass(frozen=True)
class ProxConfig:
    """Weights of the structure objective and the structure step size.

    ``alpha`` l1, ``beta`` nuclear norm, ``gamma`` GCN loss, ``lam`` feature
    smoothness, ``eta`` step size, ``eps`` degree floor.
    """

    alpha: float = 5e-4
    beta: float = 1.5
    gamma: float = 1.0
    lam: float = 1.0
    eta: float = 1e-2
    eps: float = DEFAULT_EPS

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma", "lam"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ValidationError(f"{name} must be finite and nonnegative, got {v}")
        if not (math.isfinite(self.eta) and self.eta > 0):
            raise ValidationError(f"eta must be positive, got {self.eta}")
        if not self.eps > 0:
            raise ValidationError(f"eps must be positive, got {self.eps}")


@dataclass(frozen=True)
class SvdResult:
    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.sigma) @ self.v.T


def _sym_eig(Z, method):
    if method == "jacobi":
        w, Q, _ = kernels.jacobi_eigh(Z)
        return w, Q
    try:
        return np.linalg.eigh(Z)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"symmetric eigensolver failed: {exc}") from None


def svd(Z, method="lapack") -> SvdResult:
    """Full SVD, ``sigma`` nonincreasing.

    Symmetric input goes through an eigendecomposition: ``sigma = |lambda|``
    and the right vectors carry the eigenvalue signs. ``method="jacobi"``
    selects the cyclic Jacobi kernel for that path instead of LAPACK.
    """
    Z = np.asarray(Z, dtype=float)
    if Z.ndim != 2:
        raise ShapeError(f"expected a matrix, got shape {Z.shape}")
    if Z.shape[0] == Z.shape[1] and np.array_equal(Z, Z.T):
        w, Q = _sym_eig(Z, method)
        order = np.argsort(-np.abs(w), kind="stable")
        w, Q = w[order], Q[:, order]
        sign = np.where(w < 0, -1.0, 1.0)
        return SvdResult(Q, np.abs(w), Q * sign)
    try:
        U, s, Vt = np.linalg.svd(Z)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD failed to converge: {exc}") from None
    return SvdResult(U, s, Vt.T)


def prox_l1(Z, t) -> np.ndarray:
    """Soft thresholding ``sign(Z) * max(|Z| - t, 0)``."""
    if t < 0:
        raise ValidationError(f"threshold must be nonnegative, got {t}")
    Z = np.asarray(Z, dtype=float)
    return np.sign(Z) * np.maximum(np.abs(Z) - t, 0.0)


def prox_nuclear(Z, t, method="lapack") -> np.ndarray:
    """Singular value thresholding: shrink every singular value by ``t``."""
    if t < 0:
        raise ValidationError(f"threshold must be nonnegative, got {t}")
    Z = np.asarray(Z, dtype=float)
    if t == 0:
        return Z.copy()
    res = svd(Z, method=method)
    return (res.u * np.maximum(res.sigma - t, 0.0)) @ res.v.T


def project_S(S) -> np.ndarray:
    """Symmetrize, then clip every entry to ``[0, 1]``."""
    S = np.asarray(S, dtype=float)
    return np.clip(0.5 * (S + S.T), 0.0, 1.0)


def smooth_grad(S, A, X, params, labels, idx, cfg: ProxConfig, gram=None) -> np.ndarray:
    """Gradient of ``|A - S|_F^2 + gamma * gcn_loss + lam * smoothness`` in ``S`` (symmetrized)."""
    S = np.asarray(S, dtype=float)
    A = np.asarray(A, dtype=float)
    if S.shape != A.shape or S.shape[0] != S.shape[1]:
        raise ShapeError(f"S {S.shape} and A {A.shape} must be equal square shapes")
    G = 2.0 * (S - A)
    if cfg.gamma:
        _, (_, _, dS) = gcn_loss_and_grads(params, S, X, labels, idx, wrt_S=True)
        G += cfg.gamma * dS
    if cfg.lam:
        gs = feature_smoothness_grad(S, X, cfg.eps, gram=gram)
        G += 0.5 * cfg.lam * (gs + gs.T)
    return G


def prox_descent_step(S, A, X, params, labels, idx, cfg: ProxConfig, gram=None, svd_method="lapack"):
    """One incremental proximal cycle: gradient, nuclear prox, l1 prox, projection."""
    S = np.asarray(S, dtype=float)
    S = S - cfg.eta * smooth_grad(S, A, X, params, labels, idx, cfg, gram=gram)
    if not np.all(np.isfinite(S)):
        raise DivergenceError("gradient step produced non-finite entries")
    if cfg.beta:
        S = prox_nuclear(S, cfg.eta * cfg.beta, method=svd_method)
    if cfg.alpha:
        S = prox_l1(S, cfg.eta * cfg.alpha)
    return project_S(S)


def nuclear_norm(S) -> float:
    S = np.asarray(S, dtype=float)
    if np.array_equal(S, S.T):
        return float(np.abs(np.linalg.eigvalsh(S)).sum())
    return float(np.linalg.svd(S, compute_uv=False).sum())


def structure_objective(S, A, X, cfg: ProxConfig) -> float:
    """Every term of the joint objective except the GCN loss."""
    S = np.asarray(S, dtype=float)
    val = float(np.sum((np.asarray(A) - S) ** 2))
    if cfg.alpha:
        val += cfg.alpha * float(np.abs(S).sum())
    if cfg.beta:
        val += cfg.beta * nuclear_norm(S)
    if cfg.lam:
        val += cfg.lam * feature_smoothness(S, X, cfg.eps)
    return val


def objective(S, A, X, params, labels, idx, cfg: ProxConfig) -> float:
    """Full joint objective at ``(S, params)``."""
    val = structure_objective(S, A, X, cfg)
    if cfg.gamma:
        val += cfg.gamma * gcn_loss_and_grads(params, S, X, labels, idx)[0]
    return val
