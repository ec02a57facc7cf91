# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``_fallback.py``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, copysign

from .errors import NumericalError

cnp.import_array()


def sym_norm_backward(const double[:, ::1] grad_out, const double[:, ::1] M,
                      const double[::1] q, const double[::1] active):
    cdef Py_ssize_t n = grad_out.shape[0]
    cdef Py_ssize_t i, j
    cdef double t, qi
    out_arr = np.empty((n, n), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double[::1] r = np.zeros(n, dtype=np.float64)
    for i in range(n):
        qi = q[i]
        for j in range(n):
            t = grad_out[i, j] * qi * q[j]
            out[i, j] = t
            t = t * M[i, j]
            r[i] += t
            r[j] += t
    for i in range(n):
        t = 0.5 * active[i] * q[i] * q[i] * r[i]
        if t != 0.0:
            for j in range(n):
                out[i, j] -= t
    return out_arr


cdef double _offdiag_norm(double[:, ::1] a, Py_ssize_t n) nogil:
    cdef double acc = 0.0
    cdef Py_ssize_t i, j
    for i in range(n):
        for j in range(n):
            if i != j:
                acc += a[i, j] * a[i, j]
    return sqrt(acc)


def jacobi_eigh(A, double tol=1e-10, int max_sweeps=100):
    a_arr = np.array(A, dtype=np.float64, order="C", copy=True)
    cdef double[:, ::1] a = a_arr
    cdef Py_ssize_t n = a.shape[0]
    V_arr = np.eye(n, dtype=np.float64)
    cdef double[:, ::1] V = V_arr
    cdef double scale = np.linalg.norm(a_arr)
    cdef Py_ssize_t p, r, k
    cdef double apr, theta, t, c, s, x, y, off, target
    cdef int sweep = 0
    cdef bint converged = False
    if n < 2 or scale == 0.0:
        w = np.diag(a_arr).copy()
        order = np.argsort(w, kind="stable")
        return w[order], V_arr[:, order], 0
    target = tol * scale
    with nogil:
        while sweep <= max_sweeps:
            off = _offdiag_norm(a, n)
            if off <= target:
                converged = True
                break
            if sweep == max_sweeps:
                break
            sweep += 1
            for p in range(n - 1):
                for r in range(p + 1, n):
                    apr = a[p, r]
                    if apr == 0.0:
                        continue
                    theta = (a[r, r] - a[p, p]) / (2.0 * apr)
                    t = copysign(1.0, theta) / (fabs(theta) + sqrt(1.0 + theta * theta))
                    c = 1.0 / sqrt(1.0 + t * t)
                    s = t * c
                    for k in range(n):
                        x = a[k, p]
                        y = a[k, r]
                        a[k, p] = c * x - s * y
                        a[k, r] = s * x + c * y
                    for k in range(n):
                        x = a[p, k]
                        y = a[r, k]
                        a[p, k] = c * x - s * y
                        a[r, k] = s * x + c * y
                    a[p, r] = 0.0
                    a[r, p] = 0.0
                    for k in range(n):
                        x = V[k, p]
                        y = V[k, r]
                        V[k, p] = c * x - s * y
                        V[k, r] = s * x + c * y
    if not converged:
        raise NumericalError(
            f"Jacobi eigensolver did not converge after {max_sweeps} sweeps "
            f"(off-diagonal norm {off:.3e})",
            iterations=max_sweeps,
        )
    w = np.diag(a_arr).copy()
    order = np.argsort(w, kind="stable")
    return w[order], V_arr[:, order], sweep
