"""Spatiotemporal datasets: synthetic generators, CSV ingestion, windowing, splits."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidArgumentError, ParseError
from .graph import FactorGraph, build_gaussian_kernel_graph, eigendecompose, load_edge_csv
from .tensor import load_csv_matrix, load_tensor, save_csv_matrix, save_tensor

DEFAULT_WINDOW = 6
DEFAULT_HORIZONS = (3, 6, 12)
DEFAULT_RATIOS = (0.7, 0.1, 0.2)
SPLITS = ("train", "val", "test")


def contiguous_splits(T: int, ratios=DEFAULT_RATIOS) -> dict:
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1) > 1e-9:
        raise InvalidArgumentError(f"split ratios must be three nonnegative numbers summing to 1, got {ratios}")
    n_train = int(round(ratios[0] * T))
    n_val = int(round(ratios[1] * T))
    return {"train": (0, n_train), "val": (n_train, n_train + n_val), "test": (n_train + n_val, T)}


@dataclass
class SpatioTemporalDataset:
    readings: np.ndarray  # (T, N_space, F)
    spatial_graph: FactorGraph
    window: int = DEFAULT_WINDOW
    horizons: tuple = DEFAULT_HORIZONS
    splits: dict = None
    mask: np.ndarray | None = None  # True where the raw value was missing
    distances: np.ndarray | None = None
    mean: np.ndarray = field(init=False, repr=False)
    std: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        R = np.asarray(self.readings, dtype=float)
        if R.ndim == 2:
            R = R[:, :, None]
        if R.ndim != 3:
            raise InvalidArgumentError(f"readings must be (T, N_space, F), got {R.shape}")
        if R.shape[1] != self.spatial_graph.node_count:
            raise InvalidArgumentError(
                f"{R.shape[1]} sensors but spatial graph has {self.spatial_graph.node_count} nodes"
            )
        self.readings = R
        self.horizons = tuple(int(h) for h in self.horizons)
        if self.window < 1 or not self.horizons or min(self.horizons) < 1:
            raise InvalidArgumentError("window and horizons must be positive")
        if self.splits is None:
            self.splits = contiguous_splits(R.shape[0])
        self.splits = {k: (int(a), int(b)) for k, (a, b) in self.splits.items()}
        need = self.window + max(self.horizons)
        prev = 0
        for name in SPLITS:
            a, b = self.splits[name]
            if a != prev or b < a:
                raise InvalidArgumentError(f"splits must be contiguous and ordered, bad {name}={a, b}")
            if b - a < need:
                raise InvalidArgumentError(f"split {name!r} has {b - a} steps, needs window+max(horizon)={need}")
            prev = b
        if prev != R.shape[0]:
            raise InvalidArgumentError("splits must cover the whole series")
        a, b = self.splits["train"]
        self.mean = R[a:b].mean(axis=0)
        std = R[a:b].std(axis=0)
        self.std = np.where(std > 0, std, 1.0)

    @property
    def n_steps(self) -> int:
        return self.readings.shape[0]

    @property
    def n_space(self) -> int:
        return self.readings.shape[1]

    @property
    def n_features(self) -> int:
        return self.readings.shape[2]

    def normalize(self, x):
        return (x - self.mean) / self.std

    def denormalize(self, z):
        return z * self.std + self.mean

    def manifest(self) -> dict:
        return {
            "T": self.n_steps,
            "N_space": self.n_space,
            "F": self.n_features,
            "window": self.window,
            "horizons": list(self.horizons),
            "splits": {k: list(v) for k, v in self.splits.items()},
            "normalization": {"mean": self.mean.tolist(), "std": self.std.tolist(), "source": "train"},
        }


def window_count(split_len: int, window: int, max_horizon: int) -> int:
    return max(0, split_len - window - max_horizon + 1)


def iter_windows(dataset: SpatioTemporalDataset, split: str = "train", normalized: bool = True):
    """Yield ``(input[window, N_space, F], targets[n_h, N_space, F])`` with stride 1."""
    if split not in dataset.splits:
        raise InvalidArgumentError(f"unknown split {split!r}")
    a, b = dataset.splits[split]
    H = max(dataset.horizons)
    n = window_count(b - a, dataset.window, H)
    if n <= 0:
        raise InvalidArgumentError(f"split {split!r} too short for window {dataset.window} and horizon {H}")
    R = dataset.normalize(dataset.readings) if normalized else dataset.readings
    for i in range(a, a + n):
        end = i + dataset.window - 1
        yield R[i : end + 1], np.stack([R[end + h] for h in dataset.horizons])


def make_windows(dataset: SpatioTemporalDataset, split: str = "train", normalized: bool = True):
    """Stacked windows: inputs ``(n, window, N_space, F)``, targets ``(n, n_h, N_space, F)``."""
    xs, ys = zip(*iter_windows(dataset, split, normalized))
    return np.stack(xs), np.stack(ys)


def window_indices(dataset: SpatioTemporalDataset, split: str):
    """Raw time indices ``(inputs, targets)`` of every window, for leakage checks."""
    a, b = dataset.splits[split]
    n = window_count(b - a, dataset.window, max(dataset.horizons))
    out = []
    for i in range(a, a + n):
        end = i + dataset.window - 1
        out.append((list(range(i, end + 1)), [end + h for h in dataset.horizons]))
    return out


# -- generators / ingestion -------------------------------------------------------


def generate_synthetic(
    spatial: FactorGraph,
    t_total: int,
    modes,
    noise_std: float = 0.0,
    seed: int = 0,
    window: int = DEFAULT_WINDOW,
    horizons=DEFAULT_HORIZONS,
    ratios=DEFAULT_RATIOS,
) -> SpatioTemporalDataset:
    """Sum of spatial eigenmodes oscillating in time, plus seeded Gaussian noise.

    ``modes`` are ``(eigen_index, amplitude, angular_frequency)`` with the index
    into the spatial combinatorial spectrum (ascending eigenvalues):
    ``readings[t] = sum amplitude * cos(omega * t) * v_index``.
    """
    basis = eigendecompose(spatial)
    N = spatial.node_count
    R = np.zeros((t_total, N))
    steps = np.arange(t_total)
    for idx, amp, omega in modes:
        if int(idx) != idx or not 0 <= idx < N:
            raise InvalidArgumentError(f"mode index {idx} out of range for {N} spatial eigenmodes")
        R += amp * np.outer(np.cos(omega * steps), basis.eigenvectors[:, int(idx)])
    if noise_std > 0:
        R += noise_std * np.random.default_rng(seed).standard_normal(R.shape)
    return SpatioTemporalDataset(
        R[:, :, None], spatial, window, tuple(horizons), contiguous_splits(t_total, ratios)
    )


def _forward_fill(R: np.ndarray):
    mask = np.isnan(R)
    out = R.copy()
    for t in range(1, out.shape[0]):
        gap = np.isnan(out[t])
        out[t, gap] = out[t - 1, gap]
    out[np.isnan(out)] = 0.0
    return out, mask


def ingest_csv(readings_path, distances_path, bandwidth: float, threshold: float = 0.0, window=DEFAULT_WINDOW, horizons=DEFAULT_HORIZONS, ratios=DEFAULT_RATIOS) -> SpatioTemporalDataset:
    """Readings CSV (rows = timestamps, cols = sensors) plus a square distance CSV.

    Missing cells (empty or ``NaN``) are forward-filled, then zero-filled;
    ``mask`` records where they were.
    """
    R = _load_readings(readings_path)
    D = load_csv_matrix(distances_path)
    if D.shape[0] != D.shape[1]:
        raise ParseError(f"{distances_path}: distance matrix is {D.shape[0]}x{D.shape[1]}, not square")
    if D.shape[0] != R.shape[1]:
        raise ParseError(f"{distances_path}: {D.shape[0]} sensors, readings have {R.shape[1]}")
    filled, mask = _forward_fill(R)
    graph = build_gaussian_kernel_graph(D, bandwidth, threshold)
    return SpatioTemporalDataset(
        filled[:, :, None], graph, window, tuple(horizons), contiguous_splits(R.shape[0], ratios), mask[:, :, None], D
    )


def _load_readings(path):
    path = Path(path)
    if not path.exists():
        raise InvalidArgumentError(f"readings CSV not found: {path}")
    lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
    tmp = [[c.strip() for c in ln.split(",")] for ln in lines]
    if tmp and not all(_is_num(c) for c in tmp[0]):
        tmp, offset = tmp[1:], 2
    else:
        offset = 1
    if not tmp:
        raise ParseError(f"{path}: no data rows")
    width = len(tmp[0])
    R = np.empty((len(tmp), width))
    for r, row in enumerate(tmp):
        if len(row) != width:
            raise ParseError(f"{path}: ragged row with {len(row)} cells, expected {width}", row=r + offset)
        for c, cell in enumerate(row):
            if cell == "" or cell.lower() == "nan":
                R[r, c] = np.nan
            elif _is_num(cell):
                R[r, c] = float(cell)
            else:
                raise ParseError(f"{path}: non-numeric cell {cell!r}", row=r + offset, col=c + 1)
    return R


def _is_num(s):
    try:
        float(s)
    except ValueError:
        return False
    return True


def export_csv(dataset: SpatioTemporalDataset, readings_path, distances_path=None) -> None:
    """Write feature 0 as a readings CSV (missing cells written back as ``NaN``)."""
    R = dataset.readings[:, :, 0].copy()
    if dataset.mask is not None:
        R[dataset.mask[:, :, 0]] = np.nan
    save_csv_matrix(readings_path, R)
    if distances_path is not None:
        if dataset.distances is None:
            raise InvalidArgumentError("dataset carries no distance matrix")
        save_csv_matrix(distances_path, dataset.distances)


# -- dataset directories (CLI) ----------------------------------------------------


def save_dataset(directory, dataset: SpatioTemporalDataset) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    save_tensor(d / "readings.bin", dataset.readings)
    with open(d / "spatial_edges.csv", "w") as fh:
        fh.write("src,dst,weight\n")
        for i, j, w in dataset.spatial_graph.edges():
            fh.write(f"{i},{j},{w!r}\n")
    (d / "manifest.json").write_text(json.dumps(dataset.manifest(), indent=2))


def load_dataset(directory, window=None, horizons=None) -> SpatioTemporalDataset:
    """Load a directory written by :func:`save_dataset` (or readings.csv + distances.csv)."""
    d = Path(directory)
    if not d.is_dir():
        raise InvalidArgumentError(f"dataset directory not found: {d}")
    man_path = d / "manifest.json"
    man = json.loads(man_path.read_text()) if man_path.exists() else {}
    window = int(window or man.get("window", DEFAULT_WINDOW))
    horizons = tuple(horizons or man.get("horizons", DEFAULT_HORIZONS))
    if (d / "readings.bin").exists():
        R = load_tensor(d / "readings.bin").data
        graph = load_edge_csv(d / "spatial_edges.csv", n=R.shape[1])
        splits = {k: tuple(v) for k, v in man["splits"].items()} if "splits" in man else None
        return SpatioTemporalDataset(R, graph, window, horizons, splits)
    if (d / "readings.csv").exists():
        bw = man.get("bandwidth")
        if bw is None:
            raise InvalidArgumentError(f"{man_path}: CSV datasets need a 'bandwidth' entry")
        return ingest_csv(d / "readings.csv", d / "distances.csv", float(bw), float(man.get("threshold", 0.0)), window, horizons)
    raise InvalidArgumentError(f"{d}: no readings.bin or readings.csv")
