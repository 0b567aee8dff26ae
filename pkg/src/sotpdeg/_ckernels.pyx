# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled scalar kernels. Signatures mirror :mod:`sotpdeg._pykernels`."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


def _pack(list factors):
    cdef Py_ssize_t P = len(factors)
    cdef cnp.ndarray[cnp.intp_t, ndim=1] sizes = np.empty(P, dtype=np.intp)
    cdef Py_ssize_t p
    for p in range(P):
        sizes[p] = (<cnp.ndarray> factors[p]).shape[0]
    flat = np.ascontiguousarray(np.concatenate(factors), dtype=np.float64)
    offsets = np.zeros(P, dtype=np.intp)
    if P > 1:
        offsets[1:] = np.cumsum(sizes)[:-1]
    return flat, sizes, offsets


def kron_sum(list factors):
    """Reversed-order Kronecker sum of eigenvalue vectors (factor 0 varies fastest)."""
    flat_, sizes_, offsets_ = _pack(factors)
    cdef double[::1] flat = flat_
    cdef cnp.intp_t[::1] sizes = sizes_
    cdef cnp.intp_t[::1] offsets = offsets_
    cdef Py_ssize_t P = sizes.shape[0]
    cdef Py_ssize_t total = 1, p, j, i0, n0 = sizes[0]
    for p in range(P):
        total *= sizes[p]
    out_ = np.empty(total, dtype=np.float64)
    cdef double[::1] out = out_
    idx_ = np.zeros(P, dtype=np.intp)
    cdef cnp.intp_t[::1] idx = idx_
    cdef double rest
    # odometer over factors 1..P-1; factor 0 is the contiguous inner run
    for j in range(0, total, n0):
        rest = 0.0
        for p in range(1, P):
            rest += flat[offsets[p] + idx[p]]
        for i0 in range(n0):
            out[j + i0] = flat[i0] + rest
        p = 1
        while p < P:
            idx[p] += 1
            if idx[p] < sizes[p]:
                break
            idx[p] = 0
            p += 1
    return out_


def separable_cos_sin(list cos_factors, list sin_factors):
    """Even/odd-parity expansions of cos and sin over the product spectrum.

    For every product index all 2**P selector products are formed (one
    factor at a time, 2**(P+1) multiplies) and summed; even selectors feed the cosine with sign (-1)**(|e|/2), odd selectors
    feed the sine with sign (-1)**((|e|-1)/2).
    """
    cflat_, sizes_, offsets_ = _pack(cos_factors)
    sflat_, _, _ = _pack(sin_factors)
    cdef double[::1] cf = cflat_
    cdef double[::1] sf = sflat_
    cdef cnp.intp_t[::1] sizes = sizes_
    cdef cnp.intp_t[::1] offsets = offsets_
    cdef Py_ssize_t P = sizes.shape[0]
    cdef Py_ssize_t total = 1, p, j, eps, weight
    cdef Py_ssize_t n_eps = 1 << P
    for p in range(P):
        total *= sizes[p]
    cos_out_ = np.empty(total, dtype=np.float64)
    sin_out_ = np.empty(total, dtype=np.float64)
    cdef double[::1] cos_out = cos_out_
    cdef double[::1] sin_out = sin_out_
    # per-selector signs: cosine entry is 0 for odd selectors, sine entry 0 for even
    sign_c_ = np.zeros(n_eps)
    sign_s_ = np.zeros(n_eps)
    cdef double[::1] sign_c = sign_c_
    cdef double[::1] sign_s = sign_s_
    for eps in range(n_eps):
        weight = 0
        for p in range(P):
            weight += (eps >> p) & 1
        if weight % 2 == 0:
            sign_c[eps] = 1.0 if (weight // 2) % 2 == 0 else -1.0
        else:
            sign_s[eps] = 1.0 if ((weight - 1) // 2) % 2 == 0 else -1.0
    idx_ = np.zeros(P, dtype=np.intp)
    cdef cnp.intp_t[::1] idx = idx_
    terms_ = np.empty(n_eps)
    cdef double[::1] terms = terms_
    cdef double cp, sp, c_acc, s_acc
    cdef Py_ssize_t width, k
    for j in range(total):
        # terms[eps] = prod_p (sin_p if bit p of eps else cos_p), grown one factor at a time
        terms[0] = 1.0
        width = 1
        for p in range(P):
            cp = cf[offsets[p] + idx[p]]
            sp = sf[offsets[p] + idx[p]]
            for k in range(width):
                terms[width + k] = terms[k] * sp
                terms[k] = terms[k] * cp
            width *= 2
        c_acc = 0.0
        s_acc = 0.0
        for eps in range(n_eps):
            c_acc += sign_c[eps] * terms[eps]
            s_acc += sign_s[eps] * terms[eps]
        cos_out[j] = c_acc
        sin_out[j] = s_acc
        p = 0
        while p < P:
            idx[p] += 1
            if idx[p] < sizes[p]:
                break
            idx[p] = 0
            p += 1
    return cos_out_, sin_out_


def dirichlet_edge_energy(const double[:, ::1] adjacency, const double[:, ::1] X):
    """0.5 * sum_ij A_ij ||x_i/sqrt(d_i) - x_j/sqrt(d_j)||^2."""
    cdef Py_ssize_t n = adjacency.shape[0], F = X.shape[1]
    cdef Py_ssize_t i, j, f
    deg_ = np.empty(n, dtype=np.float64)
    cdef double[::1] inv_sqrt = deg_
    cdef double d, diff, total = 0.0, w
    for i in range(n):
        d = 0.0
        for j in range(n):
            d += adjacency[i, j]
        inv_sqrt[i] = 1.0 / sqrt(d) if d > 0.0 else 0.0
    for i in range(n):
        for j in range(n):
            w = adjacency[i, j]
            if w == 0.0:
                continue
            for f in range(F):
                diff = X[i, f] * inv_sqrt[i] - X[j, f] * inv_sqrt[j]
                total += w * diff * diff
    return 0.5 * total
