import numpy as np
import pytest

from sotpdeg.data import (
    SpatioTemporalDataset,
    contiguous_splits,
    export_csv,
    generate_synthetic,
    ingest_csv,
    iter_windows,
    load_dataset,
    make_windows,
    save_dataset,
    window_count,
    window_indices,
)
from sotpdeg.errors import InvalidArgumentError, ParseError
from sotpdeg.graph import build_path_graph, eigendecompose
from sotpdeg.sampling import random_graph
from sotpdeg.tensor import save_csv_matrix


class TestWindows:
    def test_hand_enumerated(self):
        ds = SpatioTemporalDataset(np.arange(30.0).reshape(30, 1), build_path_graph(1), 6, (3,), {"train": (0, 10), "val": (10, 20), "test": (20, 30)})
        idx = window_indices(ds, "train")
        assert len(idx) == 2
        assert [w[0][-1] for w in idx] == [5, 6] and [w[1] for w in idx] == [[8], [9]]
        X, Y = make_windows(ds, "train", normalized=False)
        assert X.shape == (2, 6, 1, 1) and Y[:, 0, 0, 0].tolist() == [8.0, 9.0]

    def test_trivial_count(self):
        assert window_count(3, 1, 1) == 2

    def test_count_formula_vs_enumeration(self, rng):
        for _ in range(100):
            w, h = int(rng.integers(1, 6)), int(rng.integers(1, 6))
            T = int(rng.integers(10 * (w + h) + 10, 150))
            ds = SpatioTemporalDataset(rng.standard_normal((T, 2)), build_path_graph(2), w, (h,))
            a, b = ds.splits["val"]
            brute = sum(1 for s in range(a, b) if s + w - 1 + h < b)
            assert window_count(b - a, w, h) == brute == len(list(iter_windows(ds, "val")))

    def test_no_window_crosses_split(self, rng):
        ds = SpatioTemporalDataset(rng.standard_normal((200, 3)), build_path_graph(3), 6, (3, 6, 12))
        for split, (a, b) in ds.splits.items():
            for inp, tgt in window_indices(ds, split):
                assert a <= min(inp) and max(tgt) < b

    def test_normalization_uses_train_only(self, rng):
        R = rng.standard_normal((100, 2))
        R[80:] += 1000.0
        ds = SpatioTemporalDataset(R, build_path_graph(2), 3, (1,))
        a, b = ds.splits["train"]
        assert np.allclose(ds.mean[:, 0], R[a:b].mean(axis=0))
        assert np.allclose(ds.denormalize(ds.normalize(R[:, :, None])), R[:, :, None])

    def test_split_validation(self, rng):
        with pytest.raises(InvalidArgumentError, match="needs"):
            SpatioTemporalDataset(rng.standard_normal((20, 2)), build_path_graph(2), 6, (12,))
        with pytest.raises(InvalidArgumentError):
            contiguous_splits(10, (0.5, 0.5, 0.5))
        with pytest.raises(InvalidArgumentError, match="sensors"):
            SpatioTemporalDataset(np.zeros((50, 3)), build_path_graph(2), 2, (1,))


class TestSynthetic:
    g = build_path_graph(5)

    def test_zero_modes(self):
        ds = generate_synthetic(self.g, 60, [], 0.0, window=3, horizons=(1,))
        assert np.all(ds.readings == 0)

    def test_single_mode_exact(self):
        v = eigendecompose(self.g).eigenvectors[:, 2]
        ds = generate_synthetic(self.g, 60, [(2, 1.0, 0.4)], 0.0, window=3, horizons=(1,))
        t = np.arange(60)
        assert np.array_equal(ds.readings[:, :, 0], np.outer(np.cos(0.4 * t), v))

    def test_unused_modes_empty(self):
        V = eigendecompose(self.g).eigenvectors
        ds = generate_synthetic(self.g, 80, [(1, 1.0, 0.3), (4, 0.5, 1.1)], 0.0, window=3, horizons=(1,))
        coeffs = ds.readings[:, :, 0] @ V
        assert np.max(np.abs(coeffs[:, [0, 2, 3]])) <= 1e-10

    def test_seeded_noise(self):
        a = generate_synthetic(self.g, 60, [(1, 1.0, 0.3)], 0.1, seed=7, window=3, horizons=(1,))
        b = generate_synthetic(self.g, 60, [(1, 1.0, 0.3)], 0.1, seed=7, window=3, horizons=(1,))
        assert np.array_equal(a.readings, b.readings)

    def test_bad_mode(self):
        with pytest.raises(InvalidArgumentError):
            generate_synthetic(self.g, 60, [(9, 1.0, 0.3)], window=3, horizons=(1,))


class TestCSV:
    def write(self, tmp_path, rows, dist=((0, 1), (1, 0))):
        (tmp_path / "r.csv").write_text("\n".join(rows) + "\n")
        save_csv_matrix(tmp_path / "d.csv", np.array(dist, dtype=float))
        return tmp_path / "r.csv", tmp_path / "d.csv"

    def test_shape(self, tmp_path):
        rows = ["s0,s1"] + [f"{t},{2 * t}" for t in range(40)]
        ds = ingest_csv(*self.write(tmp_path, rows), bandwidth=1.0, window=2, horizons=(1,))
        assert ds.readings.shape == (40, 2, 1)
        assert ds.spatial_graph.adjacency[0, 1] == pytest.approx(np.exp(-1))

    def test_ten_step_toy(self, tmp_path):
        rows = [f"{t},{t}" for t in range(10)]
        ds = ingest_csv(*self.write(tmp_path, rows), bandwidth=1.0, window=1, horizons=(1,), ratios=(0.4, 0.3, 0.3))
        assert ds.readings.shape == (10, 2, 1)

    def test_forward_fill(self, tmp_path):
        rows = [f"{t},{t}" for t in range(40)]
        rows[5] = "NaN,5"
        rows[6] = ",6"
        ds = ingest_csv(*self.write(tmp_path, rows), bandwidth=1.0, window=2, horizons=(1,))
        assert ds.readings[5, 0, 0] == 4.0 and ds.readings[6, 0, 0] == 4.0
        assert ds.mask[5, 0, 0] and ds.mask[6, 0, 0] and not ds.mask[5, 1, 0]

    def test_leading_missing_zero_filled(self, tmp_path):
        rows = ["nan,1"] + [f"{t},{t}" for t in range(1, 40)]
        ds = ingest_csv(*self.write(tmp_path, rows), bandwidth=1.0, window=2, horizons=(1,))
        assert ds.readings[0, 0, 0] == 0.0

    def test_roundtrip(self, tmp_path, rng):
        R = np.round(rng.standard_normal((40, 2)), 6)
        save_csv_matrix(tmp_path / "r.csv", R)
        save_csv_matrix(tmp_path / "d.csv", np.array([[0, 1.0], [1.0, 0]]))
        ds = ingest_csv(tmp_path / "r.csv", tmp_path / "d.csv", 1.0, window=2, horizons=(1,))
        export_csv(ds, tmp_path / "r2.csv", tmp_path / "d2.csv")
        ds2 = ingest_csv(tmp_path / "r2.csv", tmp_path / "d2.csv", 1.0, window=2, horizons=(1,))
        assert np.array_equal(ds.readings, ds2.readings)

    def test_parse_errors(self, tmp_path):
        rows = [f"{t},{t}" for t in range(40)]
        rows[3] = "1,abc"
        with pytest.raises(ParseError) as exc:
            ingest_csv(*self.write(tmp_path, rows), bandwidth=1.0, window=2, horizons=(1,))
        assert exc.value.row == 4 and exc.value.col == 2
        rows = [f"{t},{t}" for t in range(40)]
        with pytest.raises(ParseError, match="sensors"):
            ingest_csv(*self.write(tmp_path, rows, dist=np.zeros((3, 3))), bandwidth=1.0, window=2, horizons=(1,))


def test_dataset_dir_roundtrip(tmp_path, rng):
    ds = generate_synthetic(random_graph(rng, 4), 80, [(1, 1.0, 0.3)], 0.05, seed=1, window=4, horizons=(1, 2))
    save_dataset(tmp_path / "ds", ds)
    back = load_dataset(tmp_path / "ds")
    assert np.array_equal(back.readings, ds.readings)
    assert back.splits == ds.splits and back.window == 4 and back.horizons == (1, 2)
    assert np.allclose(back.spatial_graph.adjacency, ds.spatial_graph.adjacency)
