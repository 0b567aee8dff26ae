"""Hot-kernel dispatch: compiled Cython core when built, numpy fallback otherwise.

Set ``SOTPDEG_PURE_PYTHON=1`` to force the fallback (used by the benchmark
and by the cross-backend tests).
"""

import os

import numpy as np

from . import _pykernels
from ._pykernels import parity_terms

BACKEND = "python"
_impl = _pykernels

if os.environ.get("SOTPDEG_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels


def kron_sum(factors):
    """Reversed-order Kronecker sum of 1-D arrays; ``factors[0]`` varies fastest."""
    return _impl.kron_sum([_as_f64(f) for f in factors])


def separable_cos_sin(cos_factors, sin_factors):
    """Return (cos, sin) of the product spectrum from per-factor cos/sin vectors."""
    return _impl.separable_cos_sin(
        [_as_f64(c) for c in cos_factors], [_as_f64(s) for s in sin_factors]
    )


def dirichlet_edge_energy(adjacency, X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    return _impl.dirichlet_edge_energy(
        np.ascontiguousarray(adjacency, dtype=np.float64), np.ascontiguousarray(X)
    )


def _as_f64(a):
    return np.ascontiguousarray(a, dtype=np.float64).ravel()


__all__ = ["BACKEND", "kron_sum", "separable_cos_sin", "dirichlet_edge_energy", "parity_terms"]
