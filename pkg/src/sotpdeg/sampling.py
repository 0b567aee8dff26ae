"""Seeded random instances shared by the property checks, tests and CLI battery."""

import numpy as np

from .graph import FactorGraph


def random_graph(rng: np.random.Generator, n: int, density: float = 0.5, low=0.5, high=1.5, connected=True) -> FactorGraph:
    """Random weighted graph; ``connected`` adds a shuffled path backbone."""
    A = np.zeros((n, n))
    iu = np.triu_indices(n, k=1)
    mask = rng.random(len(iu[0])) < density
    A[iu[0][mask], iu[1][mask]] = rng.uniform(low, high, mask.sum())
    if connected and n > 1:
        perm = rng.permutation(n)
        for a, b in zip(perm[:-1], perm[1:]):
            i, j = min(a, b), max(a, b)
            if A[i, j] == 0:
                A[i, j] = rng.uniform(low, high)
    return FactorGraph(A + A.T)


def random_factor_set(rng, P=None, n_min=2, n_max=5, p_choices=(2, 3)):
    P = int(rng.choice(p_choices)) if P is None else P
    return [random_graph(rng, int(rng.integers(n_min, n_max + 1))) for _ in range(P)]


def random_symmetric(rng, n, scale=1.0):
    M = rng.standard_normal((n, n)) * scale
    return 0.5 * (M + M.T)


def symmetric_with_norm(rng, n, norm, structured=False):
    """Symmetric matrix with spectral norm exactly ``norm``.

    ``structured`` draws a weighted-Laplacian-like matrix (zero row sums).
    """
    if structured:
        W = random_symmetric(rng, n)
        np.fill_diagonal(W, 0.0)
        E = np.diag(W.sum(axis=1)) - W
    else:
        E = random_symmetric(rng, n)
    s = np.linalg.norm(E, 2)
    if s == 0:
        return E
    return E * (norm / s)
