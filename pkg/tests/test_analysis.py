import math

import numpy as np
import pytest

from sotpdeg.analysis import (
    Perturbation,
    WeightsSpec,
    admissible,
    check_lipschitz,
    admissible_t_intervals,
    cosine_of_sum,
    dirichlet_energy,
    dirichlet_energy_edges,
    energy_decay_experiment,
    lambda_phi,
    lipschitz_trials,
    oversmoothing_bound,
    stability_experiment,
)
from sotpdeg.errors import DegenerateSpectrumError, InvalidArgumentError, NumericPreconditionError
from sotpdeg.graph import build_path_graph, dense_product_laplacian, eigendecompose, graph_from_edges
from sotpdeg.sampling import random_graph, random_symmetric
from sotpdeg.tensor import TensorSignal

P2 = build_path_graph(2)


class TestDirichletEnergy:
    def test_zero_signal(self):
        assert dirichlet_energy(np.zeros((3, 2)), build_path_graph(3).normalized_laplacian) == 0.0

    def test_path_two_alternating(self):
        assert dirichlet_energy(np.array([1.0, -1.0]), P2.laplacian) == pytest.approx(4.0)
        assert dirichlet_energy_edges(P2, np.array([1.0, -1.0])) == pytest.approx(4.0)

    def test_normalized_null_vector(self, rng):
        g = random_graph(rng, 6)
        x = np.sqrt(g.degrees)
        assert abs(dirichlet_energy(x, g.normalized_laplacian)) <= 1e-12

    def test_edge_form_matches_quadratic(self, rng):
        for _ in range(10):
            g = random_graph(rng, int(rng.integers(2, 8)))
            X = rng.standard_normal((g.node_count, 2))
            assert dirichlet_energy_edges(g, X) == pytest.approx(dirichlet_energy(X, g.normalized_laplacian), rel=1e-10)

    def test_rejects_indefinite(self):
        with pytest.raises(NumericPreconditionError):
            dirichlet_energy(np.array([1.0, 0.0]), -np.eye(2))
        with pytest.raises(InvalidArgumentError):
            dirichlet_energy(np.ones(3), np.eye(2))


class TestLipschitz:
    def test_equal_matrices(self, rng):
        A = random_symmetric(rng, 4)
        rep = check_lipschitz(A, A, 3.0)
        assert rep["lhs"] == pytest.approx(0.0, abs=1e-14) and rep["rhs"] == 0.0 and rep["holds"]

    def test_scalar(self):
        for lam, mu, t in [(0.1, 0.4, 2.0), (1.0, 3.0, 7.0), (0.0, 1e-3, 9.5)]:
            rep = check_lipschitz(np.diag([lam]), np.diag([mu]), t)
            assert rep["lhs"] == pytest.approx(abs(math.cos(t * lam) - math.cos(t * mu)))
            assert rep["holds"]

    def test_trials(self):
        rep = lipschitz_trials(200, seed=1)
        assert rep["violations"] == 0

    def test_sabotage_detected(self):
        assert not lipschitz_trials(5, seed=0, sabotage=True)["passed"]

    def test_negative_t(self):
        with pytest.raises(InvalidArgumentError):
            check_lipschitz(np.eye(2), np.eye(2), -1.0)


class TestStability:
    def u0(self, rng, shape):
        return TensorSignal(rng.standard_normal(shape + (1,)))

    def test_zero_perturbation(self, rng):
        graphs = [build_path_graph(3), P2]
        pert = Perturbation.exact([np.zeros((3, 3)), np.zeros((2, 2))])
        rep = stability_experiment(graphs, pert, self.u0(rng, (3, 2)), 1.5)
        assert rep["output_error"] == 0.0

    @pytest.mark.parametrize("delta", [1e-3, 2e-3])
    def test_edge_bump(self, rng, delta):
        e = np.array([1.0, -1.0, 0.0])
        E1 = delta * np.outer(e, e)
        assert np.linalg.norm(E1, 2) == pytest.approx(2 * delta)
        graphs = [build_path_graph(3), P2]
        u0 = self.u0(rng, (3, 2))
        rep = stability_experiment(graphs, Perturbation((E1, np.zeros((2, 2))), (2 * delta, 0.0)), u0, 2.0)
        assert rep["bound"] == pytest.approx(2.0 * np.linalg.norm(u0.data) * 2 * delta)
        assert rep["ratio"] <= 1.0

    def test_perturbation_validation(self):
        with pytest.raises(InvalidArgumentError):
            Perturbation((np.array([[0.0, 1.0], [0.0, 0.0]]),), (1.0,))
        with pytest.raises(InvalidArgumentError):
            Perturbation((np.eye(2),), (0.5,))

    def test_isolated_nodes_rejected(self, rng):
        g = graph_from_edges([(0, 1, 1.0)], n=3)
        with pytest.raises(NumericPreconditionError):
            stability_experiment([g], Perturbation.exact([np.zeros((3, 3))]), self.u0(rng, (3,)), 1.0)


class TestOversmoothing:
    def test_cosine_of_sum(self, rng):
        for _ in range(200):
            a = rng.uniform(-5, 5, int(rng.integers(1, 5)))
            assert abs(cosine_of_sum(a) - math.cos(a.sum())) <= 1e-12

    def test_intervals_s_one(self):
        lp = 0.5
        ivs = admissible_t_intervals(lp, 1.0)
        for k, (lo, hi) in enumerate(ivs):
            assert lo * lp == pytest.approx(k * math.pi, abs=1e-12)
            assert hi * lp == pytest.approx((k + 1) * math.pi, abs=1e-12)

    def test_intervals_s_two(self):
        lp = 0.8
        (lo, hi), *_ = admissible_t_intervals(lp, 2.0)
        assert 2.0 * math.cos(lo * lp) ** 2 == pytest.approx(1.0, abs=1e-12)
        assert 2.0 * math.cos(hi * lp) ** 2 == pytest.approx(1.0, abs=1e-12)
        assert lo * lp == pytest.approx(math.pi / 4)

    def test_intervals_below_one(self):
        assert admissible_t_intervals(1.0, 0.5) == [(-math.inf, math.inf)]

    def test_lambda_phi_skips_zero(self):
        assert lambda_phi(np.array([0.0, 0.5, 1.0]), 0.0) == 0.5
        with pytest.raises(DegenerateSpectrumError):
            lambda_phi(np.zeros(3), 1.0)

    def test_bound_report(self):
        bases = [eigendecompose(g, "normalized") for g in (P2, P2)]
        rep = oversmoothing_bound(bases, math.pi / 4, 1.0)
        # averaged nonzero eigenvalues are {1, 1, 2}; cos^2(pi/4) = 1/2 beats cos^2(pi/2) = 0
        assert rep["lambda_phi"] == pytest.approx(1.0)
        assert rep["rate"] == pytest.approx(0.5)
        assert rep["admissible"] == admissible(math.pi / 4, np.array([0, 1, 1, 2.0]), 1.0)

    def test_single_mode_annihilation(self):
        X0 = np.array([[1.0], [-1.0]])
        rep = energy_decay_experiment([P2], math.pi / 4, 1, WeightsSpec("identity"), X0=X0)
        assert rep.rate == pytest.approx(0.0, abs=1e-30)
        assert rep.per_layer_energy[1] <= 1e-20

    def test_identity_weights_nonnegative(self, rng):
        graphs = [build_path_graph(4), build_path_graph(3)]
        X0 = np.abs(rng.standard_normal((12, 1)))
        rep = energy_decay_experiment(graphs, 0.9, 50, WeightsSpec("identity"), X0=X0)
        assert rep.s == 1.0 and rep.holds()

    def test_t_zero_constant_energy(self, rng):
        X0 = np.abs(rng.standard_normal((6, 2)))
        rep = energy_decay_experiment([build_path_graph(3), P2], 0.0, 5, WeightsSpec("identity", features=2), X0=X0)
        assert np.allclose(rep.per_layer_energy, rep.per_layer_energy[0])
        assert rep.rate == 1.0

    @pytest.mark.parametrize("act", ["relu", "leaky_relu"])
    def test_gaussian_weights(self, act):
        spec = WeightsSpec("gaussian", depth=2, features=3, sigma_max=1.1, seed=4)
        rep = energy_decay_experiment([build_path_graph(4), build_path_graph(3)], 1.3, 30, spec, act=act, slope=0.2, seed=2)
        assert rep.holds()

    def test_normalized_product_range(self, rng):
        for _ in range(20):
            graphs = [random_graph(rng, int(rng.integers(2, 6))) for _ in range(int(rng.integers(1, 4)))]
            ev = np.linalg.eigvalsh(dense_product_laplacian(graphs, "normalized-averaged"))
            assert ev.min() >= -1e-10 and ev.max() <= 2 + 1e-10


class TestEnergyContraction:
    def test_linear_map_scales_by_sigma_max(self, rng):
        for _ in range(50):
            g = random_graph(rng, int(rng.integers(2, 8)))
            X = rng.standard_normal((g.node_count, 3))
            W = rng.standard_normal((3, 4))
            L = g.normalized_laplacian
            s = np.linalg.norm(W.T, 2) ** 2
            assert dirichlet_energy(X @ W, L) <= s * dirichlet_energy(X, L) + 1e-10

    @pytest.mark.parametrize("slope", [0.0, 0.1])
    def test_relu_does_not_increase_energy(self, rng, slope):
        for _ in range(50):
            g = random_graph(rng, int(rng.integers(2, 8)))
            X = rng.standard_normal((g.node_count, 2))
            L = g.normalized_laplacian
            Y = np.where(X > 0, X, slope * X)
            assert dirichlet_energy(Y, L) <= dirichlet_energy(X, L) + 1e-10

    def test_decay_inside_interval(self):
        graphs = [build_path_graph(4), build_path_graph(3)]
        bases = [eigendecompose(g, "normalized") for g in graphs]
        lp = oversmoothing_bound(bases, 0.5, 1.0)["lambda_phi"]
        (lo, hi), *_ = admissible_t_intervals(lp, 1.0)
        t = 0.5 * (lo + hi)
        X0 = np.abs(np.random.default_rng(3).standard_normal((12, 1)))
        rep = energy_decay_experiment(graphs, t, 50, WeightsSpec("identity"), X0=X0)
        if rep.rate <= 0.9:
            ratio = rep.per_layer_energy / rep.per_layer_energy[0]
            assert np.all(ratio <= 0.9 ** np.arange(51) + 1e-9)
        assert rep.holds()
