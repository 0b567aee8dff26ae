import os
import subprocess
import sys

import numpy as np
import pytest

from sotpdeg import _pykernels, kernels
from sotpdeg.sampling import random_graph

ck = pytest.importorskip("sotpdeg._ckernels", reason="compiled extension not built")


def factor_vectors(rng, P):
    ns = rng.integers(1, 6, P)
    return [rng.uniform(-1, 1, n) for n in ns], [rng.uniform(-1, 1, n) for n in ns]


class TestCrossBackend:
    @pytest.mark.parametrize("P", [1, 2, 3, 4, 5])
    def test_kron_sum(self, rng, P):
        vs, _ = factor_vectors(rng, P)
        assert np.allclose(ck.kron_sum(vs), _pykernels.kron_sum(vs), rtol=0, atol=1e-14)

    @pytest.mark.parametrize("P", [1, 2, 3, 4, 5])
    def test_separable_cos_sin(self, rng, P):
        c, s = factor_vectors(rng, P)
        cc, cs = ck.separable_cos_sin(c, s)
        pc, ps = _pykernels.separable_cos_sin(c, s)
        assert np.allclose(cc, pc, atol=1e-14) and np.allclose(cs, ps, atol=1e-14)

    def test_cos_sin_of_sum(self, rng):
        lams = [rng.uniform(0, 3, n) for n in (3, 2, 4)]
        t = 1.7
        c, s = ck.separable_cos_sin([np.cos(t * l) for l in lams], [np.sin(t * l) for l in lams])
        total = _pykernels.kron_sum(lams)
        assert np.allclose(c, np.cos(t * total), atol=1e-13)
        assert np.allclose(s, np.sin(t * total), atol=1e-13)

    def test_dirichlet_edge_energy(self, rng):
        for _ in range(10):
            g = random_graph(rng, int(rng.integers(1, 9)), connected=False)
            X = rng.standard_normal((g.node_count, 3))
            a = ck.dirichlet_edge_energy(np.ascontiguousarray(g.adjacency), X)
            b = _pykernels.dirichlet_edge_energy(g.adjacency, X)
            assert a == pytest.approx(b, rel=1e-12, abs=1e-14)


def test_dispatch_reports_backend():
    assert kernels.BACKEND in ("cython", "python")


def test_env_forces_fallback():
    env = dict(os.environ, SOTPDEG_PURE_PYTHON="1")
    out = subprocess.run(
        [sys.executable, "-c", "import sotpdeg.kernels as k; print(k.BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "python"
