"""Kernel backend selection.

The compiled extension is used when it was built and ``ROBUSTGSL_PURE_PYTHON``
is unset; otherwise the numpy fallback is used. Both expose the same functions.
"""
import os

import numpy as np

from . import _fallback

try:
    if os.environ.get("ROBUSTGSL_PURE_PYTHON"):
        raise ImportError("pure-python backend forced")
    from . import _ckernels as _impl

    BACKEND = "cython"
except ImportError:
    _impl = _fallback
    BACKEND = "python"


def available_backends():
    names = {"python": _fallback}
    try:
        from . import _ckernels

        names["cython"] = _ckernels
    except ImportError:
        pass
    return names


def sym_norm_backward(grad_out, M, q, active):
    return _impl.sym_norm_backward(
        np.ascontiguousarray(grad_out, dtype=float),
        np.ascontiguousarray(M, dtype=float),
        np.ascontiguousarray(q, dtype=float),
        np.ascontiguousarray(active, dtype=float),
    )


def jacobi_eigh(A, tol=1e-10, max_sweeps=100):
    return _impl.jacobi_eigh(A, tol, max_sweeps)
