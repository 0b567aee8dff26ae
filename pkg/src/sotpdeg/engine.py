"""Cosine (and heat) filtering of multidomain signals on Cartesian product graphs.

The production path never forms a product-sized matrix: signals are projected
factor by factor onto the (possibly truncated) eigenbases, scaled entrywise by
the filtered product spectrum, and projected back.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InvalidArgumentError, NumericPreconditionError
from .graph import COMBINATORIAL, ProductSpectrum, eigendecompose, product_spectrum
from .tensor import TensorSignal, mode_product

METHODS = ("auto", "expansion", "direct")


def _check_t(t):
    if not np.isfinite(t):
        raise NumericPreconditionError(f"receptive field t must be finite, got {t}")


def factor_cos_sin(spectrum: ProductSpectrum, t: float):
    cos_f = [np.cos(t * b.eigenvalues) for b in spectrum.factor_bases]
    sin_f = [np.sin(t * b.eigenvalues) for b in spectrum.factor_bases]
    return cos_f, sin_f


def filtered_eigenvalues(spectrum: ProductSpectrum, t: float, method: str = "auto") -> np.ndarray:
    """``cos(t * lambda)`` over the product spectrum.

    ``expansion`` sums the even-parity selectors of per-factor cos/sin
    vectors; ``direct`` takes the cosine of the Kronecker-sum eigenvalues.
    ``auto`` uses the expansion when the compiled kernel is present (no
    transcendental calls per product entry) and ``direct`` otherwise.
    """
    _check_t(t)
    if method not in METHODS:
        raise InvalidArgumentError(f"unknown method {method!r}")
    if method == "auto":
        method = "expansion" if kernels.BACKEND == "cython" else "direct"
    if method == "direct":
        out = np.cos(t * spectrum.product_eigenvalues)
    else:
        out, _ = kernels.separable_cos_sin(*factor_cos_sin(spectrum, t))
    if not np.all(np.isfinite(out)):
        raise NumericPreconditionError("non-finite filtered eigenvalues")
    return out


def filtered_eigenvalues_dt(spectrum: ProductSpectrum, t: float) -> np.ndarray:
    """Entrywise ``d/dt cos(t*lambda) = -lambda * sin(t*lambda)``."""
    lam = spectrum.product_eigenvalues
    return -lam * np.sin(t * lam)


@dataclass(frozen=True)
class CosineKernel:
    t: float
    spectrum: ProductSpectrum

    def __post_init__(self):
        lt = self.spectrum.filtered_eigenvalues
        if lt is None:
            raise InvalidArgumentError("kernel spectrum has no filtered eigenvalues")
        if np.any(np.abs(lt) > 1.0 + 1e-12):
            raise NumericPreconditionError("filtered eigenvalues outside [-1, 1]")


def cosine_kernel(spectrum: ProductSpectrum, t: float, method: str = "auto") -> CosineKernel:
    return CosineKernel(float(t), spectrum.with_filtered(filtered_eigenvalues(spectrum, t, method)))


# -- separable projection ----------------------------------------------------------


def _check_dims(data: np.ndarray, spectrum: ProductSpectrum, lead: int):
    dom = data.shape[lead:-1]
    if tuple(dom) != spectrum.ns:
        raise InvalidArgumentError(f"signal domain shape {tuple(dom)} does not match graphs {spectrum.ns}")


def project(data: np.ndarray, spectrum: ProductSpectrum, lead: int = 0) -> np.ndarray:
    """Coefficients in the product eigenbasis, shape ``(*lead, K_1..K_P, F)``."""
    _check_dims(data, spectrum, lead)
    out = data
    for p, basis in enumerate(spectrum.factor_bases):
        out = mode_product(out, basis.eigenvectors.T, lead + p)
    return out


def back_project(coeffs: np.ndarray, spectrum: ProductSpectrum, lead: int = 0) -> np.ndarray:
    out = coeffs
    for p, basis in enumerate(spectrum.factor_bases):
        out = mode_product(out, basis.eigenvectors, lead + p)
    return out


def multiplier_tensor(values: np.ndarray, spectrum: ProductSpectrum) -> np.ndarray:
    """Product-indexed vector reshaped to ``(K_1..K_P, 1)`` (first axis fastest)."""
    return np.reshape(values, spectrum.ks, order="F")[..., None]


def spectral_filter(data: np.ndarray, spectrum: ProductSpectrum, multipliers, weights=None, lead: int = 0):
    """``V diag(m) V^T`` applied over the domain axes, then ``x W`` on features."""
    coeffs = project(data, spectrum, lead) * multiplier_tensor(multipliers, spectrum)
    out = back_project(coeffs, spectrum, lead)
    if weights is not None:
        out = out @ weights
    return out


def _weights(weights, n_features):
    if weights is None:
        return None
    W = np.asarray(weights, dtype=float)
    if W.ndim != 2 or W.shape[0] != n_features:
        raise InvalidArgumentError(f"weights of shape {W.shape} do not accept {n_features} input features")
    return W


def apply_cosine_filter(signal: TensorSignal, kernel: CosineKernel, weights=None) -> TensorSignal:
    """Filter ``signal`` with ``cos(t L)`` over the product graph, then mix features by ``weights``."""
    W = _weights(weights, signal.n_features)
    out = spectral_filter(signal.data, kernel.spectrum, kernel.spectrum.filtered_eigenvalues, W)
    return TensorSignal(out)


def apply_heat_filter(signal: TensorSignal, graphs, t: float, weights=None, which=COMBINATORIAL, ks=None) -> TensorSignal:
    """First-order comparator: spectral multiplier ``exp(-t * lambda)``."""
    _check_t(t)
    spectrum = graphs if isinstance(graphs, ProductSpectrum) else product_spectrum(graphs, which, ks)
    W = _weights(weights, signal.n_features)
    mult = np.exp(-t * spectrum.product_eigenvalues)
    return TensorSignal(spectral_filter(signal.data, spectrum, mult, W))


def solve_sotpdeg(u0: TensorSignal, graphs, t: float, which: str = COMBINATORIAL) -> TensorSignal:
    """Closed-form solution with zero initial velocity.

    Sums ``(-1)^(|e|/2) u0 x_1 g_e1(L_1) ... x_P g_eP(L_P)`` over even
    selectors ``e``, with ``g_0 = cos(tL)`` and ``g_1 = sin(tL)`` formed from
    each factor's eigendecomposition.
    """
    _check_t(t)
    graphs = list(graphs)
    if tuple(u0.domain_shape) != tuple(g.node_count for g in graphs):
        raise InvalidArgumentError(
            f"signal domain shape {u0.domain_shape} does not match graphs "
            f"{tuple(g.node_count for g in graphs)}"
        )
    bases = [eigendecompose(g, which) for g in graphs]
    g = [
        (b.apply(lambda lam: np.cos(t * lam)), b.apply(lambda lam: np.sin(t * lam)))
        for b in bases
    ]
    even, _ = kernels.parity_terms(len(graphs))
    out = np.zeros_like(u0.data)
    for eps, sign in even:
        term = u0.data
        for p, e in enumerate(eps):
            term = mode_product(term, g[p][e], p)
        out = out + sign * term
    return TensorSignal(out)
