"""Command-line entry point: ``sotpdeg {filter|oracle|analyze|verify|train|eval|gen-data|graph}``.

Exit codes: 0 success, 1 property failure, 2 usage error, 3 numeric/runtime error.
Every run writes ``run.json`` (the only file carrying timestamps) into ``--output-dir``.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import os
import sys
import time
from dataclasses import fields
from importlib import resources
from pathlib import Path

import numpy as np

from . import kernels
from .errors import InvalidArgumentError, SotpdegError

EXIT_OK, EXIT_PROPERTY, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2, 3
VERIFY_ORDER = (
    "separability",
    "pde",
    "kron-square",
    "lipschitz",
    "stability",
    "energy",
    "cosine-of-sum",
    "normalized-spectrum",
    "gradient",
)


class PropertyFailure(Exception):
    """A verification property did not hold; maps to exit code 1."""


# -- small parsers ----------------------------------------------------------------


def _seed(text) -> int:
    try:
        v = int(text)
    except (TypeError, ValueError):
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def _positive_int(text) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _int_list(text) -> list:
    try:
        out = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not out or min(out) < 1:
        raise argparse.ArgumentTypeError(f"expected positive integers, got {text!r}")
    return out


def _nonneg_float(text) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not v >= 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative number, got {text!r}")
    return v


def parse_graph_spec(spec: str, rng=None):
    """``path:N``, ``random:N[:density]``, ``edges:FILE[:N]`` or ``dist:FILE:BANDWIDTH[:THRESHOLD]``."""
    from .graph import build_gaussian_kernel_graph, build_path_graph, load_edge_csv
    from .sampling import random_graph
    from .tensor import load_csv_matrix

    kind, _, rest = spec.partition(":")
    parts = rest.split(":") if rest else []
    try:
        if kind == "path" and len(parts) == 1:
            return build_path_graph(int(parts[0]))
        if kind == "random" and len(parts) in (1, 2):
            rng = rng if rng is not None else np.random.default_rng(0)
            return random_graph(rng, int(parts[0]), *(float(p) for p in parts[1:]))
        if kind == "edges" and len(parts) in (1, 2):
            return load_edge_csv(parts[0], int(parts[1]) if len(parts) == 2 else None)
        if kind == "dist" and len(parts) in (2, 3):
            path = Path(parts[0])
            if not path.exists():
                raise InvalidArgumentError(f"distance matrix not found: {path}")
            return build_gaussian_kernel_graph(load_csv_matrix(path), *(float(p) for p in parts[1:]))
    except ValueError as exc:
        if isinstance(exc, SotpdegError):
            raise
        raise InvalidArgumentError(f"bad graph spec {spec!r}: {exc}") from None
    raise InvalidArgumentError(
        f"bad graph spec {spec!r}; use path:N, random:N[:density], edges:FILE[:N] or dist:FILE:BW[:THR]"
    )


def _graphs(args, default=("path:5", "path:4")):
    rng = np.random.default_rng(args.seed)
    return [parse_graph_spec(s, rng) for s in (args.graph or default)]


def _write_json(path: Path, obj) -> None:
    # json emits floats via repr: shortest round-trip form, i.e. full double precision
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=False, default=_jsonable) + "\n")


def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _finite(obj):
    """Replace NaN/inf with ``None`` so reports stay strict JSON."""
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    if isinstance(obj, (float, np.floating)) and not np.isfinite(obj):
        return None
    return obj


def _write_csv(path: Path, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


# -- subcommands ------------------------------------------------------------------


def cmd_filter(args) -> dict:
    from .engine import apply_cosine_filter, cosine_kernel
    from .graph import product_spectrum
    from .oracle import dense_solution_via_vec
    from .tensor import load_csv_matrix, load_tensor, save_tensor

    if not Path(args.input).exists():
        raise InvalidArgumentError(f"input tensor not found: {args.input}")
    signal = load_tensor(args.input)
    graphs = _graphs(args)
    if tuple(signal.domain_shape) != tuple(g.node_count for g in graphs):
        raise InvalidArgumentError(
            f"input domain {signal.domain_shape} does not match graphs {[g.node_count for g in graphs]}"
        )
    if args.k is not None and len(args.k) != len(graphs):
        raise InvalidArgumentError(f"--k lists {len(args.k)} values for {len(graphs)} graphs")
    weights = None
    if args.weights:
        if not Path(args.weights).exists():
            raise InvalidArgumentError(f"weights file not found: {args.weights}")
        weights = load_csv_matrix(args.weights)
    spectrum = product_spectrum(graphs, args.laplacian, args.k)
    kernel = cosine_kernel(spectrum, args.t, args.method)
    out = apply_cosine_filter(signal, kernel, weights)
    save_tensor(args.output, out)
    stats = {
        "t": args.t,
        "graphs": [g.descriptor() for g in graphs],
        "ks": list(spectrum.ks),
        "input_norm": float(np.linalg.norm(signal.data)),
        "output_norm": float(np.linalg.norm(out.data)),
        "filtered_eigenvalue_min": float(kernel.spectrum.filtered_eigenvalues.min()),
        "filtered_eigenvalue_max": float(kernel.spectrum.filtered_eigenvalues.max()),
        "output": str(args.output),
    }
    if args.check_oracle:
        if weights is not None or args.k is not None or args.laplacian != "combinatorial":
            raise InvalidArgumentError("--check-oracle needs the full combinatorial spectrum and no weights")
        dense = dense_solution_via_vec(signal, graphs, args.t).data
        err = float(np.linalg.norm(out.data - dense) / max(np.linalg.norm(dense), np.finfo(float).tiny))
        stats["oracle_max_rel_err"] = err
        stats["oracle_passed"] = err <= 1e-10
    _write_json(args.output_dir / "filter_stats.json", stats)
    if args.check_oracle and not stats["oracle_passed"]:
        raise PropertyFailure(f"oracle mismatch: rel. err {stats['oracle_max_rel_err']:.3e}")
    return stats


def cmd_oracle(args) -> dict:
    from .oracle import CHECKS

    names = list(CHECKS) if args.check == "all" else [args.check]
    reports = {}
    for name in names:
        kw = {"seed": args.seed}
        if args.trials is not None:
            kw["trials"] = args.trials
        if name == "pde" and args.dt is not None:
            kw["dt"] = args.dt
        reports[name] = CHECKS[name](**kw)
    _write_json(args.output_dir / "oracle.json", reports)
    failed = [n for n, r in reports.items() if not r["passed"]]
    if failed:
        raise PropertyFailure(f"property failed: {failed[0]}")
    return reports


def cmd_analyze(args) -> dict:
    from . import analysis

    kind = args.kind
    if kind == "lipschitz":
        rep = analysis.lipschitz_trials(args.trials or 1000, args.seed)
    elif kind == "stability":
        rep = analysis.stability_trials(args.trials or 200, args.seed)
    elif kind == "intervals":
        graphs = _graphs(args)
        bases = [analysis.eigendecompose(g, "normalized") for g in graphs]
        rep = analysis.oversmoothing_bound(bases, args.t, args.s)
        rep["admissible_intervals"] = [list(iv) for iv in rep["admissible_intervals"]]
    elif kind == "energy":
        graphs = _graphs(args)
        spec = analysis.WeightsSpec(args.weights_kind, args.depth, args.features, args.sigma_max, args.seed)
        er = analysis.energy_decay_experiment(
            graphs, args.t, args.layers, spec, act=args.activation, slope=args.slope, seed=args.seed
        )
        rep = er.to_dict()
        rows = zip(range(args.layers + 1), er.per_layer_energy, er.bound_curve)
        _write_csv(args.output_dir / "energy_curve.csv", ["layer", "energy", "bound"], rows)
    else:  # normalized-spectrum
        rep = analysis.normalized_spectrum_trials(args.trials or 200, args.seed)
    rep = _finite(rep)
    _write_json(args.output_dir / f"analyze_{kind}.json", rep)
    if "passed" in rep and not rep["passed"]:
        raise PropertyFailure(f"property failed: {kind}")
    if kind == "energy" and not rep["bound_holds"]:
        raise PropertyFailure("property failed: energy")
    return rep


def verify_suites():
    from . import analysis, model, oracle

    return {
        "separability": oracle.check_separability,
        "pde": oracle.check_pde,
        "kron-square": oracle.check_kron_square,
        "lipschitz": analysis.lipschitz_trials,
        "stability": analysis.stability_trials,
        "energy": analysis.energy_trials,
        "cosine-of-sum": analysis.cosine_of_sum_trials,
        "normalized-spectrum": analysis.normalized_spectrum_trials,
        "gradient": model.gradient_trials,
    }


def cmd_verify(args) -> dict:
    if args.trials is not None and args.trials < 1:
        raise InvalidArgumentError("--trials must be at least 1")
    suites = verify_suites()
    names = args.only or list(VERIFY_ORDER)
    reports = {}
    for name in names:
        kw = {"seed": args.seed}
        if args.trials is not None:
            kw["trials"] = args.trials
        if name == "lipschitz" and args.sabotage == "lipschitz":
            kw["sabotage"] = True
        reports[name] = _finite(suites[name](**kw))
    summary = {"backend": kernels.BACKEND, "seed": args.seed, "properties": reports}
    failed = [n for n in names if not reports[n]["passed"]]
    summary["passed"] = not failed
    summary["first_failure"] = failed[0] if failed else None
    _write_json(args.output_dir / "verify.json", summary)
    if failed:
        raise PropertyFailure(f"property failed: {failed[0]}")
    return summary


def load_run_config(name_or_path) -> dict:
    """A bundled config name (e.g. ``toy``) or a JSON file path."""
    p = Path(name_or_path)
    if p.exists():
        text = p.read_text()
    else:
        try:
            text = resources.files("sotpdeg").joinpath("configs", f"{name_or_path}.json").read_text()
        except FileNotFoundError:
            raise InvalidArgumentError(f"config not found: {name_or_path}") from None
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidArgumentError(f"{name_or_path}: invalid JSON ({exc.msg}, line {exc.lineno})") from None
    unknown = set(cfg) - {"model", "train", "data"}
    if unknown:
        raise InvalidArgumentError(f"unknown config sections {sorted(unknown)}")
    return cfg


def _dataclass_from(cls, values: dict, where: str):
    names = {f.name for f in fields(cls)}
    bad = set(values) - names
    if bad:
        raise InvalidArgumentError(f"unknown {where} keys {sorted(bad)}")
    return cls(**values)


def _synthetic_from(data_cfg: dict, seed: int):
    from .data import generate_synthetic
    from .sampling import random_graph

    defaults = {
        "n_space": 8, "density": 0.4, "steps": 400, "modes": [[1, 1.0, 0.3], [3, 0.5, 0.8]],
        "noise_std": 0.05, "window": 6, "horizons": [3, 6, 12], "ratios": [0.7, 0.1, 0.2],
    }
    bad = set(data_cfg) - set(defaults)
    if bad:
        raise InvalidArgumentError(f"unknown data keys {sorted(bad)}")
    d = {**defaults, **data_cfg}
    spatial = random_graph(np.random.default_rng(seed), int(d["n_space"]), float(d["density"]))
    return generate_synthetic(
        spatial, int(d["steps"]), [tuple(m) for m in d["modes"]], float(d["noise_std"]), seed,
        int(d["window"]), tuple(d["horizons"]), tuple(d["ratios"]),
    )


def cmd_gen_data(args) -> dict:
    from .data import ingest_csv, save_dataset

    if args.readings or args.distances:
        if not (args.readings and args.distances and args.bandwidth):
            raise InvalidArgumentError("CSV ingestion needs --readings, --distances and --bandwidth")
        for p in (args.readings, args.distances):
            if not Path(p).exists():
                raise InvalidArgumentError(f"file not found: {p}")
        ds = ingest_csv(args.readings, args.distances, args.bandwidth, args.threshold, args.window, tuple(args.horizons))
    else:
        modes = []
        for m in args.modes.split(","):
            try:
                idx, amp, omega = m.split(":")
                modes.append((int(idx), float(amp), float(omega)))
            except ValueError:
                raise InvalidArgumentError(f"bad mode {m!r}; use INDEX:AMPLITUDE:OMEGA") from None
        ds = _synthetic_from(
            {
                "n_space": args.n_space,
                "steps": args.steps,
                "modes": modes,
                "noise_std": args.noise,
                "window": args.window,
                "horizons": args.horizons,
            },
            args.seed,
        )
    save_dataset(args.out, ds)
    return ds.manifest()


def cmd_train(args) -> dict:
    from .data import load_dataset
    from .model import ModelConfig, TrainConfig, evaluate, save_checkpoint, train

    cfg = load_run_config(args.config)
    model_cfg = dict(cfg.get("model", {}), seed=args.seed)
    train_cfg = dict(cfg.get("train", {}), seed=args.seed)
    if args.epochs is not None:
        train_cfg["epochs"] = args.epochs
    if args.data:
        dataset = load_dataset(args.data)
    else:
        dataset = _synthetic_from(cfg.get("data", {}), args.seed)
    model_cfg.setdefault("window", dataset.window)
    model_cfg.setdefault("horizons", list(dataset.horizons))
    model_cfg.setdefault("in_features", dataset.n_features)
    mc = _dataclass_from(ModelConfig, model_cfg, "model")
    tc = _dataclass_from(TrainConfig, train_cfg, "train")
    best, history = train(dataset, mc, tc)
    out = Path(args.out) if args.out else args.output_dir / "model.ckpt"
    out.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(out, best, {"normalization": dataset.manifest()["normalization"]})
    _write_csv(
        args.output_dir / "history.csv",
        ["epoch", "step", "train_mae", "val_mae"],
        ([h["epoch"], h["step"], h["train_mae"], h["val_mae"]] for h in history),
    )
    test = evaluate(best, dataset)
    rep = {
        "checkpoint": str(out),
        "epochs_run": len(history),
        "best_val_mae": min(h["val_mae"] for h in history),
        "parameter_count": best.parameter_count,
        "learned_t": {k: float(v) for k, v in best.params.items() if k.endswith(".t")},
        "test": {str(h): m.to_dict() for h, m in test.items()},
        "test_mae": float(np.mean([m.mae for m in test.values()])),
    }
    _write_json(args.output_dir / "train.json", _finite(rep))
    return rep


def cmd_eval(args) -> dict:
    from .data import load_dataset
    from .model import evaluate, load_checkpoint

    model, _ = load_checkpoint(args.model)
    dataset = load_dataset(args.data, model.config.window, model.config.horizons)
    res = evaluate(model, dataset, args.horizons, args.split)
    metrics = {str(h): m.to_dict() for h, m in res.items()}
    _write_json(args.output_dir / "metrics.json", {"split": args.split, "horizons": metrics})
    _write_csv(
        args.output_dir / "metrics.csv",
        ["horizon", "mae", "mape", "rmse"],
        ([h, m["mae"], m["mape"] if m["mape"] is not None else "", m["rmse"]] for h, m in metrics.items()),
    )
    return metrics


def cmd_graph(args) -> dict:
    from .graph import save_graph_json

    graphs = _graphs(args, default=())
    if len(graphs) != 1:
        raise InvalidArgumentError("graph takes exactly one --graph spec")
    out = Path(args.out) if args.out else args.output_dir / "graph.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    save_graph_json(out, graphs[0])
    return graphs[0].descriptor()


COMMANDS = {
    "filter": cmd_filter,
    "oracle": cmd_oracle,
    "analyze": cmd_analyze,
    "verify": cmd_verify,
    "train": cmd_train,
    "eval": cmd_eval,
    "gen-data": cmd_gen_data,
    "graph": cmd_graph,
}


# -- parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_seed, default=None, help="RNG seed (default: $SOTPDEG_SEED or 0)")
    common.add_argument("--output-dir", type=Path, default=Path("."), help="where reports and run.json go")
    common.add_argument("--threads", type=_positive_int, default=None, help="cap BLAS worker threads")

    graph_opts = argparse.ArgumentParser(add_help=False)
    graph_opts.add_argument(
        "--graph", action="append", metavar="SPEC",
        help="factor graph, repeatable: path:N, random:N[:density], edges:FILE[:N], dist:FILE:BW[:THR]",
    )

    p = argparse.ArgumentParser(prog="sotpdeg", description="Second-order tensorial PDE filtering on product graphs.")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("filter", parents=[common, graph_opts], help="apply cos(t L) to a tensor signal")
    f.add_argument("--input", required=True, help="tensor file (.bin with .json sidecar)")
    f.add_argument("--output", required=True)
    f.add_argument("--t", type=_nonneg_float, required=True)
    f.add_argument("--k", type=_int_list, default=None, help="eigenpairs kept per factor, e.g. 4,3")
    f.add_argument("--laplacian", choices=("combinatorial", "normalized"), default="combinatorial")
    f.add_argument("--method", choices=("auto", "expansion", "direct"), default="auto")
    f.add_argument("--weights", help="F_in x F_out CSV weight matrix")
    f.add_argument("--check-oracle", action="store_true", help="compare against the dense oracle")

    o = sub.add_parser("oracle", parents=[common], help="brute-force oracle checks")
    o.add_argument("--check", choices=("separability", "pde", "kron-square", "all"), default="all")
    o.add_argument("--trials", type=_positive_int, default=None)
    o.add_argument("--dt", type=float, default=None)

    a = sub.add_parser("analyze", parents=[common, graph_opts], help="theory reports")
    a.add_argument("kind", choices=("lipschitz", "stability", "energy", "intervals", "normalized-spectrum"))
    a.add_argument("--trials", type=_positive_int, default=None)
    a.add_argument("--t", type=_nonneg_float, default=1.0)
    a.add_argument("--s", type=float, default=1.0, help="weight-norm factor for intervals")
    a.add_argument("--layers", type=_positive_int, default=50)
    a.add_argument("--activation", choices=("relu", "leaky_relu"), default="relu")
    a.add_argument("--slope", type=float, default=0.01)
    a.add_argument("--weights-kind", choices=("identity", "gaussian"), default="gaussian")
    a.add_argument("--depth", type=_positive_int, default=2)
    a.add_argument("--features", type=_positive_int, default=3)
    a.add_argument("--sigma-max", type=float, default=1.0)

    v = sub.add_parser("verify", parents=[common], help="run the property battery")
    v.add_argument("--trials", type=int, default=None, help="trial count for every suite (default: per suite)")
    v.add_argument("--only", type=lambda s: s.split(","), default=None, help=f"subset of {','.join(VERIFY_ORDER)}")
    v.add_argument("--sabotage", choices=("lipschitz",), default=None, help=argparse.SUPPRESS)

    t = sub.add_parser("train", parents=[common], help="train a forecaster")
    t.add_argument("--config", default="toy", help="JSON file or bundled config name")
    t.add_argument("--data", default=None, help="dataset directory (default: synthetic data from the config)")
    t.add_argument("--out", default=None, help="checkpoint path (default: OUTPUT_DIR/model.ckpt)")
    t.add_argument("--epochs", type=_positive_int, default=None)

    e = sub.add_parser("eval", parents=[common], help="evaluate a checkpoint")
    e.add_argument("--model", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--horizons", type=_int_list, default=None)
    e.add_argument("--split", choices=("train", "val", "test"), default="test")

    g = sub.add_parser("gen-data", parents=[common], help="write a dataset directory")
    g.add_argument("--out", required=True)
    g.add_argument("--n-space", type=_positive_int, default=8)
    g.add_argument("--steps", type=_positive_int, default=400)
    g.add_argument("--modes", default="1:1.0:0.3,3:0.5:0.8", help="INDEX:AMPLITUDE:OMEGA,...")
    g.add_argument("--noise", type=_nonneg_float, default=0.05)
    g.add_argument("--window", type=_positive_int, default=6)
    g.add_argument("--horizons", type=_int_list, default=[3, 6, 12])
    g.add_argument("--readings", help="readings CSV to ingest instead of generating")
    g.add_argument("--distances", help="sensor distance CSV")
    g.add_argument("--bandwidth", type=float, default=None)
    g.add_argument("--threshold", type=_nonneg_float, default=0.0)

    gr = sub.add_parser("graph", parents=[common, graph_opts], help="write a graph descriptor")
    gr.add_argument("--out", default=None)
    return p


def _thread_limit(n):
    if n is None:
        return contextlib.nullcontext()
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        print("sotpdeg: threadpoolctl not installed; --threads ignored", file=sys.stderr)
        return contextlib.nullcontext()
    return threadpool_limits(limits=n)


def _resolved(args) -> dict:
    return {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items()}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.seed is None:
        env = os.environ.get("SOTPDEG_SEED")
        try:
            args.seed = _seed(env) if env is not None else 0
        except argparse.ArgumentTypeError as exc:
            print(f"sotpdeg: SOTPDEG_SEED: {exc}", file=sys.stderr)
            return EXIT_USAGE
    started = time.time()
    code, message = EXIT_OK, None
    try:
        args.output_dir.mkdir(parents=True, exist_ok=True)
        with _thread_limit(args.threads):
            COMMANDS[args.command](args)
    except PropertyFailure as exc:
        code, message = EXIT_PROPERTY, str(exc)
    except SotpdegError as exc:
        code, message = exc.exit_code, str(exc)
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        code, message = EXIT_USAGE, f"{exc.strerror}: {exc.filename}"
    except Exception as exc:  # numeric/runtime failures, including LinAlgError
        code, message = EXIT_RUNTIME, f"{type(exc).__name__}: {exc}"
    if message:
        print(f"sotpdeg {args.command}: {message}", file=sys.stderr)
    run = {
        "command": args.command,
        "config": _resolved(args),
        "backend": kernels.BACKEND,
        "exit_code": code,
        "error": message,
        "started": started,
        "finished": time.time(),
    }
    with contextlib.suppress(OSError):
        _write_json(args.output_dir / "run.json", run)
    return code


if __name__ == "__main__":
    sys.exit(main())
