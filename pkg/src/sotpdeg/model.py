"""Trainable product-graph forecaster built from cosine filter blocks.

Pipeline per sample ``(N_1, ..., N_P, F_in)`` (factor 1 = space, the rest
e.g. time):

    linear encoder -> [cosine filter with learnable t -> MLP] x blocks
    -> read out the last index of every non-spatial axis
    -> concat raw input at the same positions -> linear decoder per horizon

Gradients are written out by hand; :func:`finite_difference_check` is the
contract they are held to.
"""

from __future__ import annotations

import copy
import json
import math
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .engine import filtered_eigenvalues
from .errors import InvalidArgumentError, ParseError, StateError, TrainingError
from .graph import FactorGraph, build_path_graph, graph_from_edges, product_spectrum

CHECKPOINT_MAGIC = b"SOTPDEG1"
MAPE_FLOOR = 1e-3


@dataclass
class ModelConfig:
    in_features: int = 1
    out_features: int | None = None
    hidden: int = 64
    block_count: int = 3
    mlp_depth: int = 3
    K_per_factor: list | None = None
    horizons: tuple = (3, 6, 12)
    window: int = 6
    skip_concat: bool = True
    activation: str = "relu"
    leaky_slope: float = 0.01
    laplacian: str = "combinatorial"
    filter: str = "cosine"
    t_init: float = 1.0
    learn_t: bool = True
    seed: int = 0

    def __post_init__(self):
        self.horizons = tuple(int(h) for h in self.horizons)
        if self.out_features is None:
            self.out_features = self.in_features
        for name in ("in_features", "out_features", "hidden", "block_count", "mlp_depth", "window"):
            if int(getattr(self, name)) < 1:
                raise InvalidArgumentError(f"{name} must be positive")
        if not self.horizons or min(self.horizons) < 1:
            raise InvalidArgumentError("horizons must be positive")
        if self.activation not in ("relu", "leaky_relu"):
            raise InvalidArgumentError(f"unknown activation {self.activation!r}")
        if self.filter not in ("cosine", "heat"):
            raise InvalidArgumentError(f"unknown filter {self.filter!r}")


@dataclass
class Metrics:
    mae: float
    mape: float
    rmse: float

    def to_dict(self):
        return {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in asdict(self).items()}


def compute_metrics(pred, target, floor: float = MAPE_FLOOR) -> Metrics:
    """MAE, MAPE (percent, targets with ``|y| < floor`` excluded) and RMSE."""
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    if pred.shape != target.shape:
        raise InvalidArgumentError(f"prediction shape {pred.shape} != target shape {target.shape}")
    if target.size == 0:
        raise InvalidArgumentError("empty evaluation set")
    err = pred - target
    keep = np.abs(target) >= floor
    mape = float(np.mean(np.abs(err[keep]) / np.abs(target[keep])) * 100) if keep.any() else float("nan")
    return Metrics(float(np.mean(np.abs(err))), mape, float(np.sqrt(np.mean(err**2))))


def _glorot(rng, fan_in, fan_out):
    a = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-a, a, size=(fan_in, fan_out))


def _apply_axis(M, H, axis):
    # stacked matmul: every sample goes through an identical gemm regardless of batch size
    Hm = np.moveaxis(H, axis, -2)
    return np.moveaxis(np.matmul(M, Hm), -2, axis)


def _sum_outer(A, G):
    """``sum over leading axes of A^T G`` for ``(..., F) x (..., G)``."""
    return A.reshape(-1, A.shape[-1]).T @ G.reshape(-1, G.shape[-1])


class SoTPDEGModel:
    def __init__(self, config: ModelConfig, graphs, params=None):
        self.config = config
        self.graphs = list(graphs)
        if not self.graphs:
            raise InvalidArgumentError("need at least one factor graph")
        ks = config.K_per_factor or [None] * len(self.graphs)
        self.spectrum = product_spectrum(self.graphs, config.laplacian, ks)
        self.params = params if params is not None else self.init_params(config)
        self._cache = None

    @classmethod
    def for_space_time(cls, config: ModelConfig, spatial: FactorGraph, params=None):
        return cls(config, [spatial, build_path_graph(config.window)], params)

    @staticmethod
    def init_params(cfg: ModelConfig) -> dict:
        rng = np.random.default_rng(cfg.seed)
        p = {"enc.W": _glorot(rng, cfg.in_features, cfg.hidden), "enc.b": np.zeros(cfg.hidden)}
        for b in range(cfg.block_count):
            p[f"block{b}.t"] = np.array(float(cfg.t_init))
            for h in range(cfg.mlp_depth):
                p[f"block{b}.mlp{h}.W"] = _glorot(rng, cfg.hidden, cfg.hidden)
                p[f"block{b}.mlp{h}.b"] = np.zeros(cfg.hidden)
        readout = cfg.hidden + (cfg.in_features if cfg.skip_concat else 0)
        out = len(cfg.horizons) * cfg.out_features
        p["dec.W"] = _glorot(rng, readout, out)
        p["dec.b"] = np.zeros(out)
        return p

    @property
    def parameter_count(self) -> int:
        return int(sum(v.size for v in self.params.values()))

    # -- pieces --------------------------------------------------------------

    def _act(self, x):
        if self.config.activation == "relu":
            return np.maximum(x, 0.0)
        return np.where(x > 0, x, self.config.leaky_slope * x)

    def _act_grad(self, pre):
        if self.config.activation == "relu":
            return (pre > 0).astype(float)
        return np.where(pre > 0, 1.0, self.config.leaky_slope)

    def multipliers(self, t):
        lam = self.spectrum.product_eigenvalues
        if self.config.filter == "cosine":
            return filtered_eigenvalues(self.spectrum, float(t)), -lam * np.sin(t * lam)
        e = np.exp(-t * lam)
        return e, -lam * e

    def _mult_tensor(self, m):
        return np.reshape(m, self.spectrum.ks, order="F")[..., None]

    def _project(self, H):
        for p, b in enumerate(self.spectrum.factor_bases):
            H = _apply_axis(b.eigenvectors.T, H, p + 1)
        return H

    def _back_project(self, C):
        for p, b in enumerate(self.spectrum.factor_bases):
            C = _apply_axis(b.eigenvectors, C, p + 1)
        return C

    def _readout_index(self):
        return (slice(None), slice(None)) + (-1,) * (len(self.graphs) - 1)

    def check_input(self, X):
        X = np.asarray(X, dtype=float)
        expect = tuple(g.node_count for g in self.graphs) + (self.config.in_features,)
        if X.ndim != len(expect) + 1 or X.shape[1:] != expect:
            raise InvalidArgumentError(f"batch of shape {X.shape} does not match (B, {', '.join(map(str, expect))})")
        return X

    # -- forward / backward ---------------------------------------------------

    def forward(self, X, keep_cache: bool = True):
        """Predictions of shape ``(B, n_horizons, N_1, out_features)``."""
        cfg, p = self.config, self.params
        X = self.check_input(X)
        H = X @ p["enc.W"] + p["enc.b"]
        blocks = []
        for b in range(cfg.block_count):
            m, dm = self.multipliers(p[f"block{b}.t"])
            C = self._project(H)
            A = self._back_project(C * self._mult_tensor(m))
            layers = []
            for h in range(cfg.mlp_depth):
                pre = A @ p[f"block{b}.mlp{h}.W"] + p[f"block{b}.mlp{h}.b"]
                layers.append((A, pre))
                A = self._act(pre)
            blocks.append({"C": C, "m": m, "dm": dm, "layers": layers})
            H = A
        idx = self._readout_index()
        R = H[idx]
        if cfg.skip_concat:
            R = np.concatenate([R, X[idx]], axis=-1)
        out = R @ p["dec.W"] + p["dec.b"]
        B, N1 = out.shape[:2]
        pred = out.reshape(B, N1, len(cfg.horizons), cfg.out_features).transpose(0, 2, 1, 3)
        if keep_cache:
            self._cache = {"X": X, "H_shape": H.shape, "blocks": blocks, "R": R}
        return pred

    def backward(self, grad_pred) -> dict:
        """Parameter gradients for an upstream gradient w.r.t. the predictions."""
        if self._cache is None:
            raise StateError("backward called without a cached forward pass")
        cfg, p, c = self.config, self.params, self._cache
        G = np.asarray(grad_pred, dtype=float).transpose(0, 2, 1, 3)
        B, N1 = G.shape[:2]
        G = G.reshape(B, N1, -1)
        grads = {"dec.W": _sum_outer(c["R"], G), "dec.b": G.reshape(-1, G.shape[-1]).sum(axis=0)}
        dR = (G @ p["dec.W"].T)[..., : cfg.hidden]
        dH = np.zeros(c["H_shape"])
        dH[self._readout_index()] = dR
        for b in reversed(range(cfg.block_count)):
            blk = c["blocks"][b]
            dA = dH
            for h in reversed(range(cfg.mlp_depth)):
                A_in, pre = blk["layers"][h]
                dpre = dA * self._act_grad(pre)
                grads[f"block{b}.mlp{h}.W"] = _sum_outer(A_in, dpre)
                grads[f"block{b}.mlp{h}.b"] = dpre.reshape(-1, dpre.shape[-1]).sum(axis=0)
                dA = dpre @ p[f"block{b}.mlp{h}.W"].T
            D = self._project(dA)
            grads[f"block{b}.t"] = np.array(float(np.sum(D * blk["C"] * self._mult_tensor(blk["dm"]))))
            dH = self._back_project(D * self._mult_tensor(blk["m"]))
        grads["enc.W"] = _sum_outer(c["X"], dH)
        grads["enc.b"] = dH.reshape(-1, dH.shape[-1]).sum(axis=0)
        return grads

    def clear_cache(self):
        self._cache = None

    def copy(self) -> "SoTPDEGModel":
        return SoTPDEGModel(self.config, self.graphs, copy.deepcopy(self.params))


# -- loss / optimizer -----------------------------------------------------------------


def mae_loss(pred, target):
    diff = pred - target
    return float(np.mean(np.abs(diff))), np.sign(diff) / diff.size


@dataclass
class Adam:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    state: dict = field(default_factory=dict)
    step_count: int = 0

    def step(self, params: dict, grads: dict, skip=()):
        self.step_count += 1
        k = self.step_count
        for name, g in grads.items():
            if name in skip:
                continue
            m, v = self.state.get(name, (np.zeros_like(g), np.zeros_like(g)))
            m = self.beta1 * m + (1 - self.beta1) * g
            v = self.beta2 * v + (1 - self.beta2) * g * g
            self.state[name] = (m, v)
            m_hat = m / (1 - self.beta1**k)
            v_hat = v / (1 - self.beta2**k)
            params[name] = params[name] - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


@dataclass
class TrainConfig:
    epochs: int = 300
    batch_size: int = 32
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    max_steps: int | None = None
    seed: int = 0


def _t_names(model):
    return [k for k in model.params if k.endswith(".t")]


def train_arrays(model: SoTPDEGModel, X, Y, X_val=None, Y_val=None, cfg: TrainConfig = TrainConfig()):
    """Minimize MAE with Adam; returns ``(best_model, history)``.

    The returned model is the snapshot with the best validation MAE (train MAE
    when no validation set is given), evaluated after every epoch.
    """
    opt = Adam(cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)
    rng = np.random.default_rng(cfg.seed)
    skip = () if model.config.learn_t else tuple(_t_names(model))
    n = X.shape[0]
    if n == 0:
        raise InvalidArgumentError("empty training set")
    history, best, best_score, step = [], model.copy(), math.inf, 0
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        losses = []
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            pred = model.forward(X[idx])
            loss, g = mae_loss(pred, Y[idx])
            step += 1
            if not math.isfinite(loss):
                raise TrainingError("loss became non-finite", step=step)
            grads = model.backward(g)
            if not all(np.all(np.isfinite(v)) for v in grads.values()):
                raise TrainingError("non-finite gradient", step=step)
            opt.step(model.params, grads, skip)
            for name in _t_names(model):
                model.params[name] = np.abs(model.params[name])
            losses.append(loss * len(idx))
            if cfg.max_steps is not None and step >= cfg.max_steps:
                break
        train_mae = float(sum(losses) / _seen(n, cfg.batch_size, len(losses)))
        val_mae = predict_mae(model, X_val, Y_val) if X_val is not None else predict_mae(model, X, Y)
        history.append({"epoch": epoch, "step": step, "train_mae": train_mae, "val_mae": val_mae})
        if val_mae < best_score:
            best_score, best = val_mae, model.copy()
        if cfg.max_steps is not None and step >= cfg.max_steps:
            break
    model.clear_cache()
    return best, history


def _seen(n, batch, batches):
    return sum(min(batch, n - s) for s in range(0, n, batch)[:batches])


def predict(model: SoTPDEGModel, X, batch_size: int = 256):
    outs = [model.forward(X[s : s + batch_size], keep_cache=False) for s in range(0, X.shape[0], batch_size)]
    return np.concatenate(outs, axis=0)


def predict_mae(model, X, Y) -> float:
    return float(np.mean(np.abs(predict(model, X) - Y)))


def windows_to_model(inputs):
    """``(n, window, N_space, F)`` windows -> model batches ``(n, N_space, window, F)``."""
    return np.ascontiguousarray(np.swapaxes(inputs, 1, 2))


def train(dataset, config: ModelConfig, optimizer: TrainConfig = TrainConfig()):
    """Train on ``dataset``'s train split, selecting the best validation checkpoint."""
    from .data import make_windows

    if config.window != dataset.window or tuple(config.horizons) != tuple(dataset.horizons):
        raise InvalidArgumentError("model window/horizons disagree with the dataset")
    model = SoTPDEGModel.for_space_time(config, dataset.spatial_graph)
    Xtr, Ytr = make_windows(dataset, "train")
    Xva, Yva = make_windows(dataset, "val")
    return train_arrays(model, windows_to_model(Xtr), Ytr, windows_to_model(Xva), Yva, optimizer)


def evaluate(model: SoTPDEGModel, dataset, horizons=None, split: str = "test") -> dict:
    """Per-horizon metrics in the dataset's original units."""
    from .data import make_windows

    horizons = tuple(horizons or model.config.horizons)
    missing = [h for h in horizons if h not in model.config.horizons]
    if missing:
        raise InvalidArgumentError(f"model does not predict horizons {missing}")
    X, Y = make_windows(dataset, split)
    if X.shape[0] == 0:
        raise InvalidArgumentError("empty test set")
    pred = dataset.denormalize(predict(model, windows_to_model(X)))
    Y = dataset.denormalize(Y)
    out = {}
    for h in horizons:
        j = model.config.horizons.index(h)
        out[h] = compute_metrics(pred[:, j], Y[:, j])
    return out


# -- gradient checking ------------------------------------------------------------------


def finite_difference_check(model: SoTPDEGModel, X, upstream, h: float = 1e-5, names=None, max_entries: int = 12, seed: int = 0, atol: float = 1e-5):
    """Relative error of analytic vs central-difference gradients of ``sum(upstream * f(X))``.

    Matrices are probed at ``max_entries`` random positions; the error for a
    parameter is ``||g_a - g_fd|| / max(||g_fd||, ||g_a||, atol)`` over the
    probes. ``atol`` keeps identically-zero gradients (e.g. a mode removed by
    truncation) from being judged on finite-difference roundoff.
    """
    rng = np.random.default_rng(seed)
    model.forward(X)
    grads = model.backward(upstream)
    out = {}
    for name in names or list(model.params):
        P = model.params[name]
        flat_idx = rng.choice(P.size, size=min(max_entries, P.size), replace=False) if P.size else []
        a, f = [], []
        for i in flat_idx:
            pos = np.unravel_index(i, P.shape) if P.ndim else ()
            orig = float(P[pos])
            P[pos] = orig + h
            fp = float(np.sum(upstream * model.forward(X, keep_cache=False)))
            P[pos] = orig - h
            fm = float(np.sum(upstream * model.forward(X, keep_cache=False)))
            P[pos] = orig
            f.append((fp - fm) / (2 * h))
            a.append(float(grads[name][pos]))
        a, f = np.array(a), np.array(f)
        out[name] = float(np.linalg.norm(a - f) / max(np.linalg.norm(f), np.linalg.norm(a), atol))
    return out


# -- checkpoints --------------------------------------------------------------------------


def save_checkpoint(path, model: SoTPDEGModel, extra=None) -> None:
    """Magic, uint64 header length, JSON header, little-endian float64 parameter block."""
    manifest, offset = [], 0
    for name, v in model.params.items():
        manifest.append({"name": name, "offset": offset, "shape": list(np.shape(v))})
        offset += int(np.size(v))
    cfg = asdict(model.config)
    cfg["horizons"] = list(cfg["horizons"])
    header = {
        "format": "sotpdeg-checkpoint/1",
        "config": cfg,
        "graphs": [{"n": g.node_count, "edges": [[i, j, w] for i, j, w in g.edges()]} for g in model.graphs],
        "seed": model.config.seed,
        "parameters": manifest,
        "extra": extra or {},
    }
    blob = json.dumps(header, sort_keys=True).encode()
    body = np.concatenate([np.ravel(v) for v in model.params.values()]).astype("<f8").tobytes()
    Path(path).write_bytes(CHECKPOINT_MAGIC + struct.pack("<Q", len(blob)) + blob + body)


def load_checkpoint(path):
    raw = Path(path).read_bytes() if Path(path).exists() else None
    if raw is None:
        raise InvalidArgumentError(f"checkpoint not found: {path}")
    if not raw.startswith(CHECKPOINT_MAGIC):
        raise ParseError(f"{path}: not a sotpdeg checkpoint")
    (n,) = struct.unpack("<Q", raw[8:16])
    header = json.loads(raw[16 : 16 + n])
    values = np.frombuffer(raw[16 + n :], dtype="<f8")
    params = {}
    for entry in header["parameters"]:
        size = int(np.prod(entry["shape"])) if entry["shape"] else 1
        params[entry["name"]] = values[entry["offset"] : entry["offset"] + size].reshape(entry["shape"]).astype(float)
    graphs = [graph_from_edges(g["edges"], g["n"]) for g in header["graphs"]]
    return SoTPDEGModel(ModelConfig(**header["config"]), graphs, params), header


def random_small_model(rng, activation=None, filter="cosine", truncate=False):
    """Small model with randomized biases so ReLU kinks are not hit exactly."""
    from .sampling import random_graph

    n_space, window = int(rng.integers(2, 7)), int(rng.integers(2, 6))
    ks = [int(rng.integers(1, n_space + 1)), int(rng.integers(1, window + 1))] if truncate else None
    cfg = ModelConfig(
        in_features=int(rng.integers(1, 3)),
        hidden=int(rng.integers(2, 9)),
        block_count=int(rng.integers(1, 4)),
        mlp_depth=int(rng.integers(1, 4)),
        window=window,
        horizons=(1, 2),
        K_per_factor=ks,
        activation=activation or ("relu", "leaky_relu")[int(rng.integers(2))],
        leaky_slope=0.1,
        filter=filter,
        t_init=float(rng.uniform(0.2, 2.0)),
        seed=int(rng.integers(2**31)),
    )
    model = SoTPDEGModel.for_space_time(cfg, random_graph(rng, n_space))
    for name, v in model.params.items():
        if name.endswith(".b"):
            model.params[name] = 0.3 * rng.standard_normal(v.shape)
    return model


def kink_free_batch(model, rng, batch=3, margin=1e-4, tries=200):
    """Random batch whose pre-activations all sit at least ``margin`` from the ReLU kink.

    Central differences are meaningless across the kink, so the harness
    redraws instead of comparing there.
    """
    shape = (batch,) + tuple(g.node_count for g in model.graphs) + (model.config.in_features,)
    for _ in range(tries):
        X = rng.standard_normal(shape)
        model.forward(X)
        gap = min(float(np.abs(pre).min()) for blk in model._cache["blocks"] for _, pre in blk["layers"])
        if gap >= margin:
            return X
    raise StateError("could not draw a batch away from activation kinks")


def gradient_trials(trials: int = 20, seed: int = 0, tol: float = 1e-4) -> dict:
    rng = np.random.default_rng(seed)
    worst, worst_t = 0.0, 0.0
    for k in range(trials):
        model = random_small_model(rng, truncate=bool(k % 3 == 2))
        X = kink_free_batch(model, rng)
        up = rng.standard_normal(model.forward(X, keep_cache=False).shape)
        errs = finite_difference_check(model, X, up, seed=k)
        worst = max(worst, max(errs.values()))
        worst_t = max(worst_t, max(v for n, v in errs.items() if n.endswith(".t")))
    return {"check": "gradient", "trials": trials, "seed": seed, "max_rel_err": worst, "max_rel_err_t": worst_t, "tolerance": tol, "passed": worst <= tol}
