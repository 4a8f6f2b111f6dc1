"""Numerical core: compiled extension if built, numpy fallback otherwise.

The two backends implement the same three functions and are
cross-checked in the test suite. ``BACKEND`` records which one is live.
"""
import numpy as np

from . import _kernels_py

try:
    from . import _kernels_cy as _impl

    BACKEND = "cython"
except ImportError:  # extension not built
    _impl = _kernels_py
    BACKEND = "python"


def _c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def pairwise_sq_dists(z):
    return _impl.pairwise_sq_dists(_c(z))


def rbf_gram(z, h):
    return _impl.rbf_gram(_c(z), float(h))


def svgd_drift(z, grad_logp, gram, h):
    return _impl.svgd_drift(_c(z), _c(grad_logp), _c(gram), float(h))


__all__ = ["BACKEND", "pairwise_sq_dists", "rbf_gram", "svgd_drift", "_kernels_py"]
