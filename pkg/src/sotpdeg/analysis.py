"""Stability and over-smoothing checks for the cosine filter.

Energies use the normalized Laplacian: ``E(X) = tr(X^T L_hat X)``. For
product graphs the averaged operator ``(1/P) * sum of normalized factor terms``
is used everywhere, including for the worst-case eigenvalue ``lambda_phi``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .engine import spectral_filter
from .errors import DegenerateSpectrumError, InvalidArgumentError, NumericPreconditionError
from .graph import (
    NORMALIZED,
    FactorGraph,
    SpectralBasis,
    assemble_product_spectrum,
    dense_product_laplacian,
    eigendecompose,
)
from .oracle import dense_cosine
from .sampling import random_factor_set, random_symmetric, symmetric_with_norm
from .tensor import TensorSignal

NONZERO_EIG = 1e-10


# -- Dirichlet energy -------------------------------------------------------------


def dirichlet_energy(X, L_hat) -> float:
    """``tr(X^T L_hat X)``; tiny negative roundoff is clamped to zero."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    L_hat = np.asarray(L_hat, dtype=float)
    if L_hat.shape != (X.shape[0], X.shape[0]):
        raise InvalidArgumentError(f"Laplacian {L_hat.shape} does not match {X.shape[0]} nodes")
    e = float(np.sum(X * (L_hat @ X)))
    if e < 0:
        if e < -1e-12 * max(1.0, float(np.sum(X * X)) * float(np.abs(L_hat).max(initial=0.0))):
            raise NumericPreconditionError(f"negative Dirichlet energy {e}: Laplacian is not PSD")
        e = 0.0
    return e


def dirichlet_energy_edges(graph: FactorGraph, X) -> float:
    """Edge-sum form ``0.5 * sum_ij A_ij ||x_i/sqrt(d_i) - x_j/sqrt(d_j)||^2``."""
    return float(kernels.dirichlet_edge_energy(graph.adjacency, X))


# -- Lipschitz / stability --------------------------------------------------------


def check_lipschitz(A, B, t: float) -> dict:
    """``||cos(tA) - cos(tB)||_2 <= t ||A - B||_2``."""
    if t < 0:
        raise InvalidArgumentError("t must be nonnegative")
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape != B.shape:
        raise InvalidArgumentError(f"shape mismatch {A.shape} vs {B.shape}")
    lhs = float(np.linalg.norm(dense_cosine(A, t) - dense_cosine(B, t), 2))
    rhs = float(t * np.linalg.norm(A - B, 2))
    return {"lhs": lhs, "rhs": rhs, "holds": lhs <= rhs + 1e-10}


def lipschitz_trials(trials: int = 1000, seed: int = 0, n: int = 6, t_max: float = 10.0, sabotage: bool = False) -> dict:
    rng = np.random.default_rng(seed)
    violations, worst = 0, -np.inf
    for _ in range(trials):
        A = random_symmetric(rng, n)
        # mix small and large gaps so both the linear and saturated regimes are hit
        B = A + random_symmetric(rng, n, scale=10.0 ** rng.uniform(-3, 0))
        t = float(rng.uniform(0, t_max))
        rep = _sabotaged(A, B, t) if sabotage else check_lipschitz(A, B, t)
        violations += not rep["holds"]
        worst = max(worst, rep["lhs"] - rep["rhs"])
    return {"check": "lipschitz", "trials": trials, "seed": seed, "violations": violations, "max_excess": float(worst), "passed": violations == 0}


def _sabotaged(A, B, t):
    # test-only fault: flip the sign of the bound
    rep = check_lipschitz(A, B, t)
    rep["rhs"] = -rep["rhs"]
    rep["holds"] = rep["lhs"] <= rep["rhs"] + 1e-10
    return rep


@dataclass(frozen=True)
class Perturbation:
    per_factor_errors: tuple
    per_factor_bounds: tuple

    def __post_init__(self):
        errs = tuple(np.asarray(E, dtype=float) for E in self.per_factor_errors)
        bounds = tuple(float(b) for b in self.per_factor_bounds)
        if len(errs) != len(bounds):
            raise InvalidArgumentError("one bound per factor error matrix required")
        for p, (E, eps) in enumerate(zip(errs, bounds)):
            if np.max(np.abs(E - E.T), initial=0.0) > 1e-12:
                raise InvalidArgumentError(f"perturbation {p} is not symmetric")
            if np.linalg.norm(E, 2) > eps + 1e-12:
                raise InvalidArgumentError(f"perturbation {p} has spectral norm above its bound {eps}")
        object.__setattr__(self, "per_factor_errors", errs)
        object.__setattr__(self, "per_factor_bounds", bounds)

    @classmethod
    def exact(cls, errors):
        errors = [np.asarray(E, dtype=float) for E in errors]
        return cls(tuple(errors), tuple(float(np.linalg.norm(E, 2)) for E in errors))


def basis_from_matrix(M) -> SpectralBasis:
    lam, V = np.linalg.eigh(0.5 * (M + M.T))
    return SpectralBasis(lam, V, {"k": len(lam), "n": len(lam), "rule": "all", "laplacian": "explicit"})


def _cos_solve(u0: np.ndarray, mats, t):
    spectrum = assemble_product_spectrum([basis_from_matrix(M) for M in mats])
    return spectral_filter(u0, spectrum, np.cos(t * spectrum.product_eigenvalues))


def stability_experiment(graphs, perturbation: Perturbation, u0: TensorSignal, t: float) -> dict:
    """Output error of the cosine solution under factor perturbations vs ``t ||u0|| sum eps_p``."""
    graphs = list(graphs)
    if len(perturbation.per_factor_errors) != len(graphs):
        raise InvalidArgumentError("one perturbation per factor graph required")
    for p, g in enumerate(graphs):
        if g.has_isolated_nodes:
            raise NumericPreconditionError(f"factor graph {p} has isolated nodes")
        if perturbation.per_factor_errors[p].shape != g.laplacian.shape:
            raise InvalidArgumentError(f"perturbation {p} has the wrong shape")
    Ls = [g.laplacian for g in graphs]
    Lt = [L + E for L, E in zip(Ls, perturbation.per_factor_errors)]
    phi = _cos_solve(u0.data, Ls, t)
    phi_t = _cos_solve(u0.data, Lt, t)
    err = float(np.linalg.norm(phi - phi_t))
    bound = float(t * np.linalg.norm(u0.data) * sum(perturbation.per_factor_bounds))
    ratio = err / bound if bound > 0 else (0.0 if err == 0 else math.inf)
    return {"output_error": err, "bound": bound, "ratio": ratio}


def stability_trials(trials: int = 200, seed: int = 0, t_max: float = 5.0) -> dict:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for k in range(trials):
        graphs = random_factor_set(rng, n_min=2, n_max=5)
        eps = [float(10.0 ** rng.uniform(-4, -0.5)) for _ in graphs]
        errs = [symmetric_with_norm(rng, g.node_count, e, structured=bool(k % 2)) for g, e in zip(graphs, eps)]
        u0 = TensorSignal(rng.standard_normal(tuple(g.node_count for g in graphs) + (1,)))
        rep = stability_experiment(graphs, Perturbation(tuple(errs), tuple(eps)), u0, float(rng.uniform(0.01, t_max)))
        worst = max(worst, rep["ratio"])
    return {"check": "stability", "trials": trials, "seed": seed, "max_ratio": worst, "passed": worst <= 1.0}


# -- over-smoothing ---------------------------------------------------------------


def cosine_of_sum(angles) -> float:
    """``cos(sum a_p)`` via the signed sum over even-size subsets of sines."""
    angles = list(angles)
    P = len(angles)
    total = 0.0
    for mask in range(1 << P):
        size = bin(mask).count("1")
        if size % 2:
            continue
        term = 1.0
        for p, a in enumerate(angles):
            term *= math.sin(a) if (mask >> p) & 1 else math.cos(a)
        total += (-1) ** (size // 2) * term
    return total


def averaged_normalized_bases(graphs):
    """Normalized factor bases with eigenvalues divided by P."""
    P = len(graphs)
    out = []
    for g in graphs:
        b = eigendecompose(g, NORMALIZED)
        out.append(SpectralBasis(b.eigenvalues / P, b.eigenvectors, dict(b.selection, scale=1.0 / P)))
    return out


def lambda_phi(product_eigs, t: float) -> float:
    nz = product_eigs[product_eigs > NONZERO_EIG]
    if nz.size == 0:
        raise DegenerateSpectrumError("all product eigenvalues are zero (edgeless product graph)")
    c2 = np.cos(t * nz) ** 2
    return float(nz[int(np.argmax(c2))])


def admissible_t_intervals(lam_phi: float, s: float, k_range=range(0, 3)):
    """Closed-form t-intervals with ``s cos^2(t lam_phi) < 1`` (requires ``s >= 1``)."""
    if s < 1:
        return [(-math.inf, math.inf)]
    a = math.acos(min(1.0, 2.0 / s - 1.0))
    return [((2 * k * math.pi + a) / (2 * lam_phi), (2 * (k + 1) * math.pi - a) / (2 * lam_phi)) for k in k_range]


def admissible(t: float, product_eigs, s: float) -> bool:
    """Direct test of ``s cos^2(t lam) < 1`` for every nonzero eigenvalue."""
    nz = product_eigs[product_eigs > NONZERO_EIG]
    return bool(np.all(s * np.cos(t * nz) ** 2 < 1.0))


def oversmoothing_bound(spectra, t: float, s: float, k_range=range(0, 3)) -> dict:
    """Worst-case energy contraction rate for the averaged normalized product Laplacian.

    ``spectra`` are normalized factor bases (unscaled); the 1/P averaging is
    applied here.
    """
    if not s > 0:
        raise InvalidArgumentError("s must be positive")
    spectra = list(spectra)
    P = len(spectra)
    eigs = kernels.kron_sum([b.eigenvalues / P for b in spectra])
    lp = lambda_phi(eigs, t)
    rate = s * math.cos(t * lp) ** 2
    return {
        "lambda_phi": lp,
        "rate": rate,
        "admissible": admissible(t, eigs, s),
        "admissible_intervals": admissible_t_intervals(lp, s, k_range),
        "note": "eigenvalues include the 1/P averaging; the unaveraged sum differs by a factor P",
    }


@dataclass
class WeightsSpec:
    """Per-layer MLP weights: ``identity`` or ``gaussian`` rescaled to ``sigma_max``."""

    kind: str = "identity"
    depth: int = 1
    features: int = 1
    sigma_max: float = 1.0
    seed: int = 0

    def build(self, layers: int):
        rng = np.random.default_rng(self.seed)
        out = []
        for _ in range(layers):
            mats = []
            for _ in range(self.depth):
                if self.kind == "identity":
                    W = np.eye(self.features)
                elif self.kind == "gaussian":
                    W = rng.standard_normal((self.features, self.features))
                    W *= self.sigma_max / np.linalg.norm(W, 2)
                else:
                    raise InvalidArgumentError(f"unknown weights kind {self.kind!r}")
                mats.append(W)
            out.append(mats)
        return out


ACTIVATIONS = {
    "relu": lambda x: np.maximum(x, 0.0),
}


def activation(name: str, slope: float = 0.01):
    if name == "relu":
        return ACTIVATIONS["relu"]
    if name == "leaky_relu":
        return lambda x: np.where(x > 0, x, slope * x)
    raise InvalidArgumentError(f"unknown activation {name!r}")


@dataclass
class EnergyReport:
    per_layer_energy: np.ndarray
    bound_curve: np.ndarray
    s: float
    lambda_phi: float
    admissible: bool
    rate: float = field(default=float("nan"))

    def holds(self, atol: float = 1e-9) -> bool:
        return bool(np.all(self.per_layer_energy <= self.bound_curve + atol))

    def to_dict(self) -> dict:
        return {
            "per_layer_energy": self.per_layer_energy.tolist(),
            "bound_curve": self.bound_curve.tolist(),
            "s": self.s,
            "lambda_phi": self.lambda_phi,
            "rate": self.rate,
            "admissible": self.admissible,
            "bound_holds": self.holds(),
        }


def energy_decay_experiment(graphs, t: float, layer_count: int, weights_spec=None, X0=None, act="relu", slope=0.01, seed=0) -> EnergyReport:
    """Run ``X <- MLP(cos(t L_hat) X)`` for ``layer_count`` layers and track energies.

    ``weights_spec`` is a :class:`WeightsSpec` or explicit per-layer lists of
    matrices. The MLP is ``sigma(...sigma(sigma(X) W_1) W_2 ... W_H)``.
    """
    if layer_count < 1:
        raise InvalidArgumentError("layer_count must be >= 1")
    graphs = list(graphs)
    P = len(graphs)
    N = int(np.prod([g.node_count for g in graphs]))
    weights_spec = weights_spec or WeightsSpec()
    if isinstance(weights_spec, WeightsSpec):
        layers = weights_spec.build(layer_count)
        F = weights_spec.features
    else:
        layers = [[np.asarray(W, dtype=float) for W in mats] for mats in weights_spec]
        if len(layers) != layer_count:
            raise InvalidArgumentError("explicit weights must list one MLP per layer")
        F = layers[0][0].shape[0]
    if X0 is None:
        X0 = np.random.default_rng(seed).standard_normal((N, F))
    X = np.asarray(X0, dtype=float).reshape(N, -1)
    sigma = activation(act, slope)

    spectrum = assemble_product_spectrum(averaged_normalized_bases(graphs))
    mult = np.cos(t * spectrum.product_eigenvalues)
    L_hat = dense_product_laplacian(graphs, "normalized-averaged")
    shape = tuple(g.node_count for g in graphs)

    s = max(math.prod(float(np.linalg.norm(W.T, 2)) ** 2 for W in mats) for mats in layers)
    lp = lambda_phi(spectrum.product_eigenvalues, t)
    rate = s * math.cos(t * lp) ** 2

    energies = [dirichlet_energy(X, L_hat)]
    for mats in layers:
        Y = spectral_filter(X.reshape(shape + (-1,), order="F"), spectrum, mult)
        Y = sigma(Y.reshape(N, -1, order="F"))
        for W in mats:
            Y = sigma(Y @ W)
        X = Y
        energies.append(dirichlet_energy(X, L_hat))
    energies = np.array(energies)
    bound = rate ** np.arange(layer_count + 1) * energies[0]
    return EnergyReport(energies, bound, s, lp, admissible(t, spectrum.product_eigenvalues, s), rate)


def energy_trials(trials: int = 20, seed: int = 0, layers: int = 50) -> dict:
    """Energy decay bound over random graphs, weights and both activations.

    Also tracks the 0.9**layer decay check on configurations whose rate is <= 0.9.
    """
    rng = np.random.default_rng(seed)
    bound_ok, decay_ok, n_cor = True, True, 0
    worst_excess = -np.inf
    for k in range(trials):
        graphs = random_factor_set(rng, n_min=2, n_max=4)
        act = ("relu", "leaky_relu")[k % 2]
        spec = WeightsSpec(
            kind="gaussian",
            depth=int(rng.integers(1, 4)),
            features=int(rng.integers(1, 4)),
            sigma_max=float(rng.uniform(0.8, 1.2)),
            seed=int(rng.integers(2**31)),
        )
        t = float(rng.uniform(0.1, 5.0))
        rep = energy_decay_experiment(graphs, t, layers, spec, act=act, slope=0.1, seed=int(rng.integers(2**31)))
        worst_excess = max(worst_excess, float(np.max(rep.per_layer_energy - rep.bound_curve)))
        bound_ok &= rep.holds()
        if rep.rate <= 0.9:
            n_cor += 1
            ratio = rep.per_layer_energy / rep.per_layer_energy[0]
            decay_ok &= bool(np.all(ratio <= 0.9 ** np.arange(layers + 1) + 1e-9))
    return {
        "check": "energy",
        "trials": trials,
        "seed": seed,
        "layers": layers,
        "max_excess_over_bound": worst_excess,
        "decay_configs": n_cor,
        "passed": bool(bound_ok and decay_ok),
    }


def cosine_of_sum_trials(trials: int = 1000, seed: int = 0, max_p: int = 4) -> dict:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        P = int(rng.integers(1, max_p + 1))
        t = rng.uniform(0, 10)
        lams = rng.uniform(0, 2, P)
        worst = max(worst, abs(cosine_of_sum(t * lams) - math.cos(t * lams.sum())))
    return {"check": "cosine-of-sum", "trials": trials, "seed": seed, "max_abs_err": worst, "passed": worst <= 1e-12}


def normalized_spectrum_trials(trials: int = 200, seed: int = 0) -> dict:
    rng = np.random.default_rng(seed)
    lo, hi = np.inf, -np.inf
    for _ in range(trials):
        graphs = random_factor_set(rng, n_min=2, n_max=5, p_choices=(1, 2, 3))
        ev = np.linalg.eigvalsh(dense_product_laplacian(graphs, "normalized-averaged"))
        lo, hi = min(lo, float(ev.min())), max(hi, float(ev.max()))
    ok = lo >= -1e-10 and hi <= 2 + 1e-10
    return {"check": "normalized-spectrum", "trials": trials, "seed": seed, "min_eig": lo, "max_eig": hi, "passed": ok}
