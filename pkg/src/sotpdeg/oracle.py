"""Brute-force ground truth: dense matrix cosine and direct RK4 integration.

Nothing here calls into :mod:`sotpdeg.engine`; the checks at the bottom pit
the two sides against each other.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError, InvalidArgumentError, NumericPreconditionError, ResourceLimitError
from .graph import DENSE_LIMIT, dense_product_laplacian
from .tensor import TensorSignal, fold, mode_product


def dense_cosine(L, t: float, dense_limit: int = DENSE_LIMIT) -> np.ndarray:
    L = np.asarray(L, dtype=float)
    if L.ndim != 2 or L.shape[0] != L.shape[1]:
        raise InvalidArgumentError(f"expected a square matrix, got {L.shape}")
    if L.shape[0] > dense_limit:
        raise ResourceLimitError(f"matrix of size {L.shape[0]} exceeds dense limit {dense_limit}")
    if np.max(np.abs(L - L.T), initial=0.0) > 1e-9:
        raise NumericPreconditionError("dense_cosine needs a symmetric matrix")
    lam, V = np.linalg.eigh(0.5 * (L + L.T))
    return (V * np.cos(t * lam)) @ V.T


def dense_solution_via_vec(u0: TensorSignal, graphs, t: float, dense_limit: int = DENSE_LIMIT) -> TensorSignal:
    """``cos(t L) vec(u0)`` with the product Laplacian formed explicitly."""
    L = dense_product_laplacian(graphs, dense_limit=dense_limit)
    if L.shape[0] != int(np.prod(u0.domain_shape)):
        raise InvalidArgumentError("signal and graphs disagree on the product size")
    out = dense_cosine(L, t, dense_limit) @ u0.vec()
    return TensorSignal(fold(out.T, u0.shape))


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float = 1e-3
    t_end: float = 1.0
    scheme: str = "rk4"

    def __post_init__(self):
        if not self.dt > 0:
            raise InvalidArgumentError(f"dt must be positive, got {self.dt}")
        if not self.t_end >= 0:
            raise InvalidArgumentError(f"t_end must be nonnegative, got {self.t_end}")
        if self.scheme != "rk4":
            raise InvalidArgumentError(f"unsupported scheme {self.scheme!r}")

    @property
    def steps(self) -> int:
        return int(round(self.t_end / self.dt))


def pde_rhs(U: np.ndarray, laplacians, squares=None) -> np.ndarray:
    """Acceleration ``-sum_i U x_i L_i^2 - 2 sum_{i<j} U x_i L_i x_j L_j``."""
    P = len(laplacians)
    squares = squares or [L @ L for L in laplacians]
    acc = np.zeros_like(U)
    for i in range(P):
        acc -= mode_product(U, squares[i], i)
    for i, j in itertools.combinations(range(P), 2):
        acc -= 2.0 * mode_product(mode_product(U, laplacians[i], i), laplacians[j], j)
    return acc


def integrate_pde(u0: TensorSignal, graphs, cfg: IntegratorConfig = IntegratorConfig(), dense_limit: int = DENSE_LIMIT) -> TensorSignal:
    """RK4 on the first-order system ``(U, dU/dt)`` starting at rest."""
    graphs = list(graphs)
    if tuple(u0.domain_shape) != tuple(g.node_count for g in graphs):
        raise InvalidArgumentError("signal domain shape does not match graphs")
    if u0.data.size > dense_limit:
        raise ResourceLimitError(f"signal of size {u0.data.size} exceeds dense limit {dense_limit}")
    Ls = [g.laplacian for g in graphs]
    sq = [L @ L for L in Ls]
    U = np.array(u0.data)
    V = np.zeros_like(U)
    n = cfg.steps
    if n == 0:
        return TensorSignal(U)
    h = cfg.t_end / n
    limit = 1e6 * max(np.linalg.norm(U), np.finfo(float).tiny)
    for step in range(n):
        k1u, k1v = V, pde_rhs(U, Ls, sq)
        k2u, k2v = V + 0.5 * h * k1v, pde_rhs(U + 0.5 * h * k1u, Ls, sq)
        k3u, k3v = V + 0.5 * h * k2v, pde_rhs(U + 0.5 * h * k2u, Ls, sq)
        k4u, k4v = V + h * k3v, pde_rhs(U + h * k3u, Ls, sq)
        U = U + (h / 6.0) * (k1u + 2 * k2u + 2 * k3u + k4u)
        V = V + (h / 6.0) * (k1v + 2 * k2v + 2 * k3v + k4v)
        if not np.linalg.norm(U) <= limit:
            raise DivergenceError(f"RK4 diverged at step {step + 1}; reduce dt (dt={h})")
    return TensorSignal(U)


def kron_embed(mats, i: int) -> np.ndarray:
    """``I (x) .. (x) M_i (x) .. (x) I`` in reversed order (factor 0 fastest)."""
    out = np.ones((1, 1))
    for p, M in enumerate(mats):
        block = M if p == i else np.eye(M.shape[0])
        out = np.kron(block, out)
    return out


def kron_square_expanded(mats) -> np.ndarray:
    """``sum_i (L_i^(i))^2 + 2 sum_{i<j} L_i^(i) L_j^(j)``."""
    emb = [kron_embed(mats, i) for i in range(len(mats))]
    out = sum(E @ E for E in emb)
    for i, j in itertools.combinations(range(len(mats)), 2):
        out = out + 2.0 * emb[i] @ emb[j]
    return out


def _rel(a, b):
    nb = np.linalg.norm(b)
    return float(np.linalg.norm(a - b) / nb) if nb > 0 else float(np.linalg.norm(a - b))


# -- checks ---------------------------------------------------------------------


def check_separability(trials: int = 100, seed: int = 0, t_max: float = 5.0, n_max: int = 5) -> dict:
    """Separable engine path vs dense ``cos(t L)`` on random products."""
    from .engine import apply_cosine_filter, cosine_kernel
    from .graph import product_spectrum
    from .sampling import random_factor_set

    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        graphs = random_factor_set(rng, n_min=1, n_max=n_max)
        t = float(rng.uniform(0, t_max))
        F = int(rng.integers(1, 4))
        u = TensorSignal(rng.standard_normal(tuple(g.node_count for g in graphs) + (F,)))
        kernel = cosine_kernel(product_spectrum(graphs), t, method="expansion")
        sep = apply_cosine_filter(u, kernel).data
        dense = dense_solution_via_vec(u, graphs, t).data
        worst = max(worst, _rel(sep, dense))
    return {"check": "separability", "trials": trials, "seed": seed, "max_rel_err": worst, "tolerance": 1e-10, "passed": worst <= 1e-10}


def check_pde(trials: int = 20, seed: int = 0, dt: float = 1e-3, t_end: float = 1.0, n_max: int = 4) -> dict:
    """RK4 integration vs closed form; also the dt-halving error ratio."""
    from .engine import solve_sotpdeg
    from .sampling import random_factor_set

    rng = np.random.default_rng(seed)
    worst, ratios = 0.0, []
    for _ in range(trials):
        graphs = random_factor_set(rng, n_min=2, n_max=n_max)
        u = TensorSignal(rng.standard_normal(tuple(g.node_count for g in graphs) + (1,)))
        exact = solve_sotpdeg(u, graphs, t_end).data
        e1 = _rel(integrate_pde(u, graphs, IntegratorConfig(dt, t_end)).data, exact)
        e2 = _rel(integrate_pde(u, graphs, IntegratorConfig(dt / 2, t_end)).data, exact)
        worst = max(worst, e1)
        ratios.append(e1 / e2 if e2 > 0 else np.inf)
    ok = worst <= 1e-6 and all(8.0 <= r <= 32.0 for r in ratios)
    return {
        "check": "pde",
        "trials": trials,
        "seed": seed,
        "dt": dt,
        "max_rel_err": worst,
        "halving_ratio_min": float(min(ratios)),
        "halving_ratio_max": float(max(ratios)),
        "tolerance": 1e-6,
        "passed": bool(ok),
    }


def check_kron_square(trials: int = 50, seed: int = 0, n_max: int = 4) -> dict:
    from .sampling import random_factor_set

    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        graphs = random_factor_set(rng, n_min=1, n_max=n_max, p_choices=(1, 2, 3))
        Ls = [g.laplacian for g in graphs]
        L = dense_product_laplacian(graphs)
        worst = max(worst, _rel(kron_square_expanded(Ls), L @ L))
    return {"check": "kron-square", "trials": trials, "seed": seed, "max_rel_err": worst, "tolerance": 1e-10, "passed": worst <= 1e-10}


CHECKS = {"separability": check_separability, "pde": check_pde, "kron-square": check_kron_square}
