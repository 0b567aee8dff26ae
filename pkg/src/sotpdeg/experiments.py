"""Desk-scale experiments: high-frequency preservation and filtering cost scaling."""

from __future__ import annotations

import time

import numpy as np

from .engine import apply_cosine_filter, apply_heat_filter, cosine_kernel
from .graph import build_path_graph, dense_product_laplacian, product_spectrum
from .model import ModelConfig, SoTPDEGModel, TrainConfig, predict_mae, train_arrays
from .oracle import dense_cosine
from .sampling import random_graph
from .tensor import TensorSignal


def top_product_mode(graphs):
    """Eigenvector (as a domain tensor) and eigenvalue of the largest product eigenvalue."""
    spec = product_spectrum(graphs)
    j = int(np.argmax(spec.product_eigenvalues))
    rem = j
    idx = []
    for b in spec.factor_bases:
        idx.append(rem % b.k)
        rem //= b.k
    mode = spec.factor_bases[0].eigenvectors[:, idx[0]]
    for b, i in zip(spec.factor_bases[1:], idx[1:]):
        mode = np.multiply.outer(mode, b.eigenvectors[:, i])
    return mode, float(spec.product_eigenvalues[j])


def mode_multipliers(graphs, t=None):
    """Gain of the cosine and heat filters on the top product mode at ``t * lambda = 2 pi``."""
    mode, lam = top_product_mode(graphs)
    t = 2 * np.pi / lam if t is None else t
    u = TensorSignal(mode[..., None])
    cos_out = apply_cosine_filter(u, cosine_kernel(product_spectrum(graphs), t)).data[..., 0]
    heat_out = apply_heat_filter(u, graphs, t).data[..., 0]
    return {
        "lambda": lam,
        "t": t,
        "cosine_multiplier": float(np.sum(cos_out * mode)),
        "heat_multiplier": float(np.sum(heat_out * mode)),
    }


def highfreq_task(n_space=5, window=4, samples=256, noise_std=1e-3, seed=0):
    """Inputs ``a * mode + noise`` on the space x time product, target ``a * v_space``.

    ``mode`` is the top product eigenmode; the target is its spatial factor
    scaled by the per-sample amplitude ``a``.
    """
    rng = np.random.default_rng(seed)
    spatial = random_graph(rng, n_space)
    graphs = [spatial, build_path_graph(window)]
    mode, lam = top_product_mode(graphs)
    spec = product_spectrum(graphs)
    j = int(np.argmax(spec.product_eigenvalues))
    v_space = spec.factor_bases[0].eigenvectors[:, j % spec.factor_bases[0].k]
    a = rng.uniform(-1, 1, samples)
    X = a[:, None, None] * mode[None] + noise_std * rng.standard_normal((samples,) + mode.shape)
    Y = (a[:, None] * v_space[None])[:, None, :, None]
    return graphs, lam, X[..., None], Y


def highfreq_experiment(steps=1500, seed=0, hidden=16, lr=3e-3, samples=256) -> dict:
    """Train a one-block cosine model and an identical heat model with ``t`` frozen at ``2 pi / lambda``."""
    graphs, lam, X, Y = highfreq_task(samples=samples, seed=seed)
    n_train = samples * 3 // 4
    t = 2 * np.pi / lam
    results = {"lambda": lam, "t": t}
    results.update({k: v for k, v in mode_multipliers(graphs, t).items() if k.endswith("multiplier")})
    for kind in ("cosine", "heat"):
        cfg = ModelConfig(
            in_features=1,
            hidden=hidden,
            block_count=1,
            mlp_depth=2,
            horizons=(1,),
            window=graphs[1].node_count,
            skip_concat=False,
            filter=kind,
            t_init=t,
            learn_t=False,
            seed=seed,
        )
        model = SoTPDEGModel(cfg, graphs)
        tc = TrainConfig(epochs=10**6, batch_size=32, lr=lr, max_steps=steps, seed=seed)
        best, _ = train_arrays(model, X[:n_train], Y[:n_train], cfg=tc)
        results[f"{kind}_test_mae"] = predict_mae(best, X[n_train:], Y[n_train:])
    results["mae_ratio"] = results["cosine_test_mae"] / results["heat_test_mae"]
    return results


def time_call(fn, repeats=3):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def complexity_benchmark(sizes=((16, 16), (32, 32), (64, 64)), k=None, features=1, seed=0, t=0.7) -> list:
    """Separable filtering (factor EVDs + projections) vs dense product EVD + cosine.

    Both sides include their decompositions, which is where the cost gap lives.
    """
    rng = np.random.default_rng(seed)
    rows = []
    for ns in sizes:
        graphs = [random_graph(rng, n, density=0.2) for n in ns]
        u = TensorSignal(rng.standard_normal(tuple(ns) + (features,)))
        ks = None if k is None else [min(k, n) for n in ns]

        def separable():
            return apply_cosine_filter(u, cosine_kernel(product_spectrum(graphs, ks=ks), t))

        def dense():
            L = dense_product_laplacian(graphs)
            return dense_cosine(L, t) @ u.vec()

        rows.append(
            {
                "ns": list(ns),
                "product_size": int(np.prod(ns)),
                "separable_s": time_call(separable),
                "dense_s": time_call(dense, repeats=1),
            }
        )
    return rows
