"""Factor graphs, their Laplacians, truncated eigenbases and product spectra.

Product-graph conventions: with factors ``1..P`` the product Laplacian is the
reversed Kronecker sum ``L_P (+) ... (+) L_1``, so factor 1 varies fastest
in every product-indexed vector. This matches :func:`sotpdeg.tensor.unfold`.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .errors import InvalidArgumentError, NumericPreconditionError, ParseError, ResourceLimitError

DENSE_LIMIT = 4096
COMBINATORIAL = "combinatorial"
NORMALIZED = "normalized"


def _frozen(a):
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class FactorGraph:
    """Weighted undirected graph with cached Laplacians.

    ``normalized_laplacian`` uses ``deg**-0.5 := 0`` on isolated nodes.
    """

    adjacency: np.ndarray
    laplacian: np.ndarray = field(init=False, repr=False)
    normalized_laplacian: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        A = np.array(self.adjacency, dtype=np.float64)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
            raise InvalidArgumentError(f"adjacency must be a non-empty square matrix, got {A.shape}")
        if not np.all(np.isfinite(A)):
            raise InvalidArgumentError("adjacency has non-finite entries")
        if np.max(np.abs(A - A.T)) > 1e-9:
            raise InvalidArgumentError("adjacency is not symmetric")
        A = 0.5 * (A + A.T)
        if np.any(np.diag(A) != 0):
            raise InvalidArgumentError("adjacency must have a zero diagonal (no self-loops)")
        if np.any(A < 0):
            raise InvalidArgumentError("adjacency weights must be nonnegative")
        deg = A.sum(axis=1)
        L = np.diag(deg) - A
        inv_sqrt = np.zeros_like(deg)
        np.divide(1.0, np.sqrt(deg), out=inv_sqrt, where=deg > 0)
        L_hat = inv_sqrt[:, None] * L * inv_sqrt[None, :]
        object.__setattr__(self, "adjacency", _frozen(A))
        object.__setattr__(self, "laplacian", _frozen(L))
        object.__setattr__(self, "normalized_laplacian", _frozen(0.5 * (L_hat + L_hat.T)))

    @property
    def node_count(self) -> int:
        return self.adjacency.shape[0]

    @property
    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)

    @property
    def has_isolated_nodes(self) -> bool:
        return bool(np.any(self.degrees <= 0))

    def edges(self):
        """Upper-triangle edge list ``[(i, j, w), ...]``."""
        i, j = np.nonzero(np.triu(self.adjacency, k=1))
        return [(int(a), int(b), float(self.adjacency[a, b])) for a, b in zip(i, j)]

    def matrix(self, which: str = COMBINATORIAL) -> np.ndarray:
        if which == COMBINATORIAL:
            return self.laplacian
        if which == NORMALIZED:
            return self.normalized_laplacian
        raise InvalidArgumentError(f"unknown Laplacian kind {which!r}")

    def descriptor(self) -> dict:
        digest = hashlib.sha256(np.ascontiguousarray(self.laplacian, dtype="<f8").tobytes())
        return {
            "n": self.node_count,
            "edges": [[i, j, w] for i, j, w in self.edges()],
            "laplacian_checksum": "sha256:" + digest.hexdigest(),
        }


def build_path_graph(n: int) -> FactorGraph:
    if int(n) != n or n < 1:
        raise InvalidArgumentError(f"path graph needs n >= 1, got {n}")
    n = int(n)
    A = np.zeros((n, n))
    idx = np.arange(n - 1)
    A[idx, idx + 1] = A[idx + 1, idx] = 1.0
    return FactorGraph(A)


def build_gaussian_kernel_graph(distances, bandwidth: float, threshold: float = 0.0) -> FactorGraph:
    """``A_ij = exp(-d_ij^2 / bandwidth^2)`` kept when ``>= threshold`` (i != j)."""
    D = np.asarray(distances, dtype=float)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise InvalidArgumentError(f"distance matrix must be square, got {D.shape}")
    if np.max(np.abs(D - D.T), initial=0.0) > 1e-9:
        raise InvalidArgumentError("distance matrix is not symmetric")
    if np.any(D < 0):
        raise InvalidArgumentError("distances must be nonnegative")
    if not bandwidth > 0:
        raise InvalidArgumentError(f"bandwidth must be positive, got {bandwidth}")
    if threshold < 0:
        raise InvalidArgumentError(f"threshold must be nonnegative, got {threshold}")
    D = 0.5 * (D + D.T)
    W = np.exp(-(D**2) / bandwidth**2)
    W[W < threshold] = 0.0
    np.fill_diagonal(W, 0.0)
    return FactorGraph(W)


def graph_from_edges(edges, n: int | None = None) -> FactorGraph:
    """Undirected graph from ``(src, dst, weight)`` triples; duplicates accumulate."""
    edges = list(edges)
    if n is None:
        n = 1 + max((max(int(s), int(d)) for s, d, _ in edges), default=-1)
    if n < 1:
        raise InvalidArgumentError("cannot infer a node count from an empty edge list")
    A = np.zeros((n, n))
    for s, d, w in edges:
        s, d = int(s), int(d)
        if not (0 <= s < n and 0 <= d < n):
            raise InvalidArgumentError(f"edge ({s}, {d}) out of range for {n} nodes")
        if s == d:
            raise InvalidArgumentError(f"self-loop at node {s}")
        A[s, d] += w
        A[d, s] += w
    return FactorGraph(A)


def load_edge_csv(path, n: int | None = None) -> FactorGraph:
    path = Path(path)
    if not path.exists():
        raise InvalidArgumentError(f"edge list not found: {path}")
    edges = []
    with open(path, newline="") as fh:
        for r, row in enumerate(csv.reader(fh), start=1):
            if not row or not "".join(row).strip():
                continue
            if r == 1 and row[0].strip().lower() in ("src", "source"):
                continue
            if len(row) not in (2, 3):
                raise ParseError(f"{path}: expected src,dst[,weight]", row=r)
            try:
                s, d = int(row[0]), int(row[1])
            except ValueError:
                raise ParseError(f"{path}: node ids must be integers", row=r, col=1) from None
            try:
                w = float(row[2]) if len(row) == 3 else 1.0
            except ValueError:
                raise ParseError(f"{path}: non-numeric weight {row[2]!r}", row=r, col=3) from None
            edges.append((s, d, w))
    return graph_from_edges(edges, n)


def save_graph_json(path, graph: FactorGraph) -> None:
    Path(path).write_text(json.dumps(graph.descriptor(), indent=2))


# -- spectra -------------------------------------------------------------------


@dataclass(frozen=True)
class SpectralBasis:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    selection: dict

    @property
    def k(self) -> int:
        return len(self.eigenvalues)

    @property
    def n(self) -> int:
        return self.eigenvectors.shape[0]

    def apply(self, fn) -> np.ndarray:
        """Dense ``V fn(Lambda) V^T``."""
        V = self.eigenvectors
        return (V * fn(self.eigenvalues)) @ V.T


def top_k_indices(eigenvalues: np.ndarray, k: int) -> np.ndarray:
    """Largest |lambda| first, ties to the smaller eigenvalue; returned ascending."""
    order = np.lexsort((eigenvalues, -np.abs(eigenvalues)))
    return np.sort(order[:k])


def eigendecompose(graph: FactorGraph, which: str = COMBINATORIAL, k=None) -> SpectralBasis:
    """Eigenpairs of one factor Laplacian, optionally truncated to top-``k`` by magnitude."""
    M = graph.matrix(which)
    n = M.shape[0]
    if k is None or k == "all":
        k = n
    if int(k) != k or not 1 <= k <= n:
        raise InvalidArgumentError(f"k must be in [1, {n}], got {k}")
    k = int(k)
    if np.max(np.abs(M - M.T)) > 1e-9:
        raise NumericPreconditionError(f"{which} Laplacian is not symmetric")
    lam, V = np.linalg.eigh(0.5 * (M + M.T))
    rule = "all"
    if k < n:
        keep = top_k_indices(lam, k)
        lam, V = lam[keep], V[:, keep]
        rule = "largest-magnitude"
    return SpectralBasis(_frozen(lam), _frozen(V), {"k": k, "n": n, "rule": rule, "laplacian": which})


@dataclass(frozen=True)
class ProductSpectrum:
    """Spectrum of the reversed Kronecker-sum Laplacian, eigenvectors kept factored."""

    factor_bases: tuple
    product_eigenvalues: np.ndarray
    filtered_eigenvalues: np.ndarray | None = None

    @property
    def order(self) -> int:
        return len(self.factor_bases)

    @property
    def ks(self) -> tuple:
        return tuple(b.k for b in self.factor_bases)

    @property
    def ns(self) -> tuple:
        return tuple(b.n for b in self.factor_bases)

    def with_filtered(self, values) -> "ProductSpectrum":
        return ProductSpectrum(self.factor_bases, self.product_eigenvalues, _frozen(values))


def assemble_product_spectrum(bases) -> ProductSpectrum:
    bases = tuple(bases)
    if not bases:
        raise InvalidArgumentError("need at least one factor basis")
    if any(b.k == 0 for b in bases):
        raise InvalidArgumentError("empty factor basis")
    lam = kernels.kron_sum([b.eigenvalues for b in bases])
    return ProductSpectrum(bases, _frozen(lam))


def product_spectrum(graphs, which: str = COMBINATORIAL, ks=None) -> ProductSpectrum:
    ks = ks or [None] * len(graphs)
    if len(ks) != len(graphs):
        raise InvalidArgumentError(f"got {len(ks)} truncation sizes for {len(graphs)} graphs")
    return assemble_product_spectrum(eigendecompose(g, which, k) for g, k in zip(graphs, ks))


def reversed_kron_sum(mats) -> np.ndarray:
    """Dense ``M_P (+) ... (+) M_1``."""
    out = np.asarray(mats[0], dtype=float)
    for M in mats[1:]:
        M = np.asarray(M, dtype=float)
        out = np.kron(M, np.eye(out.shape[0])) + np.kron(np.eye(M.shape[0]), out)
    return out


def dense_product_laplacian(graphs, which: str = COMBINATORIAL, dense_limit: int = DENSE_LIMIT) -> np.ndarray:
    """Materialize the product Laplacian. Oracle/small-problem path only.

    ``which="normalized-averaged"`` gives ``(1/P) * sum of normalized factor terms``.
    """
    graphs = list(graphs)
    if not graphs:
        raise InvalidArgumentError("need at least one factor graph")
    size = int(np.prod([g.node_count for g in graphs]))
    if size > dense_limit:
        raise ResourceLimitError(f"dense product of size {size} exceeds dense limit {dense_limit}")
    if which == COMBINATORIAL:
        return reversed_kron_sum([g.laplacian for g in graphs])
    if which in ("normalized-averaged", NORMALIZED):
        return reversed_kron_sum([g.normalized_laplacian for g in graphs]) / len(graphs)
    raise InvalidArgumentError(f"unknown product Laplacian kind {which!r}")
