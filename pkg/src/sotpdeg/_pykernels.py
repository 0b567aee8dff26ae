"""Pure-numpy fallbacks for the compiled kernels in ``_ckernels.pyx``."""

import itertools

import numpy as np


def parity_terms(P):
    """All selectors e in {0,1}^P with their real coefficient Re(i^|e|).

    Returns ``(even, odd)`` lists of ``(selector, sign)``; ``odd`` carries the
    sign used by the companion sine expansion, Re(-i * i^|e|).
    """
    even, odd = [], []
    for eps in itertools.product((0, 1), repeat=P):
        w = sum(eps)
        if w % 2 == 0:
            even.append((eps, (-1) ** (w // 2)))
        else:
            odd.append((eps, (-1) ** ((w - 1) // 2)))
    return even, odd


def _reversed_kron(vectors):
    # vectors[0] varies fastest in the result
    out = np.asarray(vectors[-1], dtype=float)
    for v in reversed(vectors[:-1]):
        out = np.multiply.outer(out, v).ravel()
    return out


def kron_sum(factors):
    out = np.asarray(factors[-1], dtype=float)
    for v in reversed(factors[:-1]):
        out = np.add.outer(out, v).ravel()
    return out


def separable_cos_sin(cos_factors, sin_factors):
    P = len(cos_factors)
    even, odd = parity_terms(P)
    size = int(np.prod([len(c) for c in cos_factors]))
    cos_out = np.zeros(size)
    sin_out = np.zeros(size)
    for terms, out in ((even, cos_out), (odd, sin_out)):
        for eps, sign in terms:
            picks = [sin_factors[p] if e else cos_factors[p] for p, e in enumerate(eps)]
            out += sign * _reversed_kron(picks)
    return cos_out, sin_out


def dirichlet_edge_energy(adjacency, X):
    A = np.asarray(adjacency, dtype=float)
    X = np.asarray(X, dtype=float)
    deg = A.sum(axis=1)
    inv_sqrt = np.zeros_like(deg)
    np.divide(1.0, np.sqrt(deg), out=inv_sqrt, where=deg > 0)
    Y = X * inv_sqrt[:, None]
    i, j = np.nonzero(A)
    diff = Y[i] - Y[j]
    return 0.5 * float(np.sum(A[i, j] * np.sum(diff * diff, axis=1)))
