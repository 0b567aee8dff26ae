import math

import numpy as np
import pytest

from sotpdeg.errors import DivergenceError, InvalidArgumentError, NumericPreconditionError, ResourceLimitError
from sotpdeg.graph import build_path_graph, dense_product_laplacian
from sotpdeg.oracle import (
    IntegratorConfig,
    check_kron_square,
    dense_cosine,
    dense_solution_via_vec,
    integrate_pde,
    kron_embed,
    kron_square_expanded,
)
from sotpdeg.engine import solve_sotpdeg
from sotpdeg.tensor import TensorSignal

P2 = build_path_graph(2)


class TestDenseCosine:
    def test_t_zero(self, rng):
        A = rng.standard_normal((4, 4))
        assert np.allclose(dense_cosine(A + A.T, 0.0), np.eye(4))

    def test_path_two_half_pi(self):
        assert np.allclose(dense_cosine(P2.laplacian, math.pi / 2), [[0, 1], [1, 0]], atol=1e-15)

    def test_diagonal(self):
        lam = np.array([0.3, 1.1, 2.5])
        assert np.allclose(dense_cosine(np.diag(lam), 0.9), np.diag(np.cos(0.9 * lam)))

    def test_taylor_agreement(self):
        # series cos(tL) = sum (-1)^k (tL)^(2k) / (2k)! as an independent check
        L, t = build_path_graph(3).laplacian, 0.6
        S, term = np.eye(3), np.eye(3)
        for k in range(1, 30):
            term = -term @ (t * L) @ (t * L) / ((2 * k - 1) * (2 * k))
            S = S + term
        assert np.allclose(dense_cosine(L, t), S, atol=1e-14)

    def test_rejects(self):
        with pytest.raises(NumericPreconditionError):
            dense_cosine(np.array([[0.0, 1.0], [0.0, 0.0]]), 1.0)
        with pytest.raises(ResourceLimitError):
            dense_cosine(np.eye(5), 1.0, dense_limit=4)
        with pytest.raises(InvalidArgumentError):
            dense_cosine(np.ones((2, 3)), 1.0)


class TestIntegrator:
    def test_zero_time(self, rng):
        u = TensorSignal(rng.standard_normal((2, 1)))
        assert np.array_equal(integrate_pde(u, [P2], IntegratorConfig(t_end=0.0)).data, u.data)

    def test_swap(self):
        u = TensorSignal(np.array([[1.0], [0.0]]))
        out = integrate_pde(u, [P2], IntegratorConfig(1e-3, math.pi / 2)).data
        assert np.allclose(out[:, 0], [0, 1], atol=1e-6)

    def test_matches_closed_form(self, rng):
        u = TensorSignal(rng.standard_normal((2, 2, 1)))
        exact = solve_sotpdeg(u, [P2, P2], 1.0).data
        out = integrate_pde(u, [P2, P2], IntegratorConfig(1e-3, 1.0)).data
        assert np.linalg.norm(out - exact) / np.linalg.norm(exact) <= 1e-6

    def test_divergence_reported(self):
        g = build_path_graph(6)
        u = TensorSignal(np.ones((6, 6, 1)) + np.arange(36.0).reshape(6, 6, 1))
        with pytest.raises(DivergenceError):
            integrate_pde(u, [g, g], IntegratorConfig(dt=1.0, t_end=60.0))

    @pytest.mark.parametrize("kw", [{"dt": 0}, {"t_end": -1}, {"scheme": "euler"}])
    def test_config_validation(self, kw):
        with pytest.raises(InvalidArgumentError):
            IntegratorConfig(**kw)


class TestKronecker:
    def test_embed_reversed(self, rng):
        A, B = rng.standard_normal((2, 2)), rng.standard_normal((3, 3))
        assert np.allclose(kron_embed([A, B], 0), np.kron(np.eye(3), A))
        assert np.allclose(kron_embed([A, B], 1), np.kron(B, np.eye(2)))

    def test_square_identity(self, rng):
        graphs = [P2, build_path_graph(3), build_path_graph(2)]
        L = dense_product_laplacian(graphs)
        assert np.allclose(kron_square_expanded([g.laplacian for g in graphs]), L @ L, atol=1e-12)

    def test_battery(self):
        assert check_kron_square(trials=20, seed=3)["passed"]

    def test_vec_solution_t_zero(self, rng):
        u = TensorSignal(rng.standard_normal((2, 3, 2)))
        assert np.allclose(dense_solution_via_vec(u, [P2, build_path_graph(3)], 0.0).data, u.data)


def test_triple_agreement(rng):
    from sotpdeg.engine import apply_cosine_filter, cosine_kernel
    from sotpdeg.graph import product_spectrum
    from sotpdeg.sampling import random_factor_set

    for _ in range(3):
        graphs = random_factor_set(rng, n_min=2, n_max=3)
        u = TensorSignal(rng.standard_normal(tuple(g.node_count for g in graphs) + (1,)))
        closed = solve_sotpdeg(u, graphs, 0.8).data
        dense = dense_solution_via_vec(u, graphs, 0.8).data
        sep = apply_cosine_filter(u, cosine_kernel(product_spectrum(graphs), 0.8)).data
        rk = integrate_pde(u, graphs, IntegratorConfig(1e-3, 0.8)).data
        scale = np.linalg.norm(closed)
        assert np.linalg.norm(closed - dense) / scale <= 1e-10
        assert np.linalg.norm(sep - dense) / scale <= 1e-10
        assert np.linalg.norm(rk - closed) / scale <= 1e-6


def test_rk4_fourth_order(rng):
    from sotpdeg.oracle import check_pde

    rep = check_pde(trials=2, seed=4)
    assert 8.0 <= rep["halving_ratio_min"] and rep["halving_ratio_max"] <= 32.0
