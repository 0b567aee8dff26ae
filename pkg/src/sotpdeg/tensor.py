"""Multidomain tensor signals, their mode-(P+1) unfolding and file I/O.

A signal over P factor graphs with F features is stored as an array of
shape ``(N_1, ..., N_P, F)``. The mode-(P+1) unfolding is the ``F x prod(N)``
matrix whose column index runs with the first domain axis fastest, i.e.
``j = i_1 + N_1*i_2 + N_1*N_2*i_3 + ...``. That is exactly the ordering of a
reversed Kronecker product ``V_P (x) ... (x) V_1``, so ``vec`` of a signal can
be multiplied by the product-graph operators directly.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidArgumentError, ParseError

LAYOUT_TAG = "domains-then-features/first-axis-fastest"


@dataclass(frozen=True)
class TensorSignal:
    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim < 2:
            raise InvalidArgumentError(
                f"signal needs at least one domain axis and a feature axis, got shape {arr.shape}"
            )
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @classmethod
    def from_vector(cls, values, domain_shape) -> "TensorSignal":
        """Single-feature signal from a vector laid out in unfolding order."""
        domain_shape = tuple(int(n) for n in domain_shape)
        return cls(fold(np.asarray(values, dtype=float)[None, :], domain_shape + (1,)))

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def domain_shape(self) -> tuple:
        return self.data.shape[:-1]

    @property
    def n_features(self) -> int:
        return self.data.shape[-1]

    @property
    def order(self) -> int:
        return self.data.ndim - 1

    def unfold(self) -> np.ndarray:
        return unfold(self.data)

    def vec(self) -> np.ndarray:
        """Column-stacked unfolding transposed: ``prod(N) x F``."""
        return unfold(self.data).T


def unfold(data: np.ndarray) -> np.ndarray:
    """Mode-(P+1) unfolding of a ``(N_1..N_P, F)`` array -> ``F x prod(N)``."""
    F = data.shape[-1]
    return np.reshape(data, (-1, F), order="F").T


def fold(matrix: np.ndarray, shape) -> np.ndarray:
    """Inverse of :func:`unfold`."""
    shape = tuple(shape)
    return np.reshape(np.asarray(matrix).T, shape, order="F")


def mode_product(data: np.ndarray, M: np.ndarray, axis: int) -> np.ndarray:
    """``data x_axis M``: contracts ``M``'s columns with ``data``'s ``axis``."""
    out = np.tensordot(M, data, axes=([1], [axis]))
    return np.moveaxis(out, 0, axis)


# -- I/O ---------------------------------------------------------------------


def save_tensor(path, signal: TensorSignal | np.ndarray) -> None:
    """Write ``path`` (little-endian float64, C order) and ``path.json`` sidecar."""
    arr = signal.data if isinstance(signal, TensorSignal) else np.asarray(signal, dtype=float)
    path = Path(path)
    path.write_bytes(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    sidecar = {"shape": list(arr.shape), "dtype": "<f8", "order": "C", "layout": LAYOUT_TAG}
    _sidecar(path).write_text(json.dumps(sidecar, indent=2))


def load_tensor(path) -> TensorSignal:
    path = Path(path)
    if not path.exists():
        raise InvalidArgumentError(f"tensor file not found: {path}")
    side = _sidecar(path)
    if not side.exists():
        raise InvalidArgumentError(f"missing JSON sidecar for tensor: {side}")
    meta = json.loads(side.read_text())
    if meta.get("layout", LAYOUT_TAG) != LAYOUT_TAG:
        raise ParseError(f"unsupported layout tag {meta.get('layout')!r} in {side}")
    shape = tuple(int(n) for n in meta["shape"])
    raw = np.frombuffer(path.read_bytes(), dtype="<f8")
    if raw.size != int(np.prod(shape)):
        raise ParseError(f"{path}: {raw.size} values but sidecar shape {shape}")
    return TensorSignal(raw.reshape(shape).astype(np.float64))


def _sidecar(path: Path) -> Path:
    return path.with_name(path.name + ".json")


def save_csv_matrix(path, matrix) -> None:
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in matrix:
            writer.writerow([repr(float(v)) for v in row])


def load_csv_matrix(path, allow_nan=False) -> np.ndarray:
    """Read a rectangular numeric CSV; a non-numeric first row is treated as a header."""
    path = Path(path)
    if not path.exists():
        raise InvalidArgumentError(f"CSV file not found: {path}")
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise ParseError(f"{path}: empty CSV")
    if not _numeric_row(rows[0]):
        rows = rows[1:]
        offset = 2
    else:
        offset = 1
    width = len(rows[0]) if rows else 0
    out = np.empty((len(rows), width))
    for r, row in enumerate(rows):
        if len(row) != width:
            raise ParseError(f"{path}: ragged row with {len(row)} cells, expected {width}", row=r + offset)
        for c, cell in enumerate(row):
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(f"{path}: non-numeric cell {cell!r}", row=r + offset, col=c + 1) from None
            if np.isnan(v) and not allow_nan:
                raise ParseError(f"{path}: NaN cell", row=r + offset, col=c + 1)
            out[r, c] = v
    return out


def _numeric_row(row) -> bool:
    try:
        [float(c) for c in row]
    except ValueError:
        return False
    return True
