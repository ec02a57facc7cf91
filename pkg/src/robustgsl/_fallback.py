"""Pure numpy implementations of the hot kernels.

These are the reference versions; ``_ckernels.pyx`` must agree with them to
rounding. Selection between the two happens in :mod:`robustgsl.kernels`.
"""
import math

import numpy as np

from .errors import NumericalError


def sym_norm_backward(grad_out, M, q, active):
    """Backpropagate through ``N = diag(q) M diag(q)`` with ``q_i = deg_i**-1/2``.

    ``deg_i`` is a row sum of the differentiated matrix, so every entry of row
    ``a`` also moves ``q_a``. ``active`` masks rows whose degree is free
    (a floored degree is constant and contributes no chain term).
    """
    scale = np.outer(q, q)
    direct = grad_out * scale
    T = direct * M
    r = T.sum(axis=1) + T.sum(axis=0)
    return direct - (0.5 * active * q * q * r)[:, None]


def jacobi_eigh(A, tol=1e-10, max_sweeps=100):
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Returns ``(w, V, sweeps)`` with ``A = V diag(w) V^T``, ``w`` ascending.
    Converged when the off-diagonal Frobenius norm is at most ``tol`` times the
    Frobenius norm of ``A``.
    """
    a = np.array(A, dtype=float, copy=True)
    n = a.shape[0]
    V = np.eye(n)
    scale = np.linalg.norm(a)
    if n < 2 or scale == 0.0:
        w = np.diag(a).copy()
        order = np.argsort(w, kind="stable")
        return w[order], V[:, order], 0
    target = tol * scale
    offdiag = ~np.eye(n, dtype=bool)
    sweep = 0
    while True:
        off = math.sqrt(np.sum(a[offdiag] ** 2))
        if off <= target:
            break
        if sweep == max_sweeps:
            raise NumericalError(
                f"Jacobi eigensolver did not converge after {max_sweeps} sweeps "
                f"(off-diagonal norm {off:.3e})",
                iterations=max_sweeps,
            )
        sweep += 1
        for p in range(n - 1):
            for r in range(p + 1, n):
                apr = a[p, r]
                if apr == 0.0:
                    continue
                theta = (a[r, r] - a[p, p]) / (2.0 * apr)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(1.0 + theta * theta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                colp = a[:, p].copy()
                colr = a[:, r].copy()
                a[:, p] = c * colp - s * colr
                a[:, r] = s * colp + c * colr
                rowp = a[p, :].copy()
                rowr = a[r, :].copy()
                a[p, :] = c * rowp - s * rowr
                a[r, :] = s * rowp + c * rowr
                a[p, r] = a[r, p] = 0.0
                vp = V[:, p].copy()
                vr = V[:, r].copy()
                V[:, p] = c * vp - s * vr
                V[:, r] = s * vp + c * vr
    w = np.diag(a).copy()
    order = np.argsort(w, kind="stable")
    return w[order], V[:, order], sweep
