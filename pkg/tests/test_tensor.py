import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import array_shapes, arrays

from sotpdeg.errors import InvalidArgumentError, ParseError
from sotpdeg.graph import reversed_kron_sum
from sotpdeg.tensor import (
    TensorSignal,
    fold,
    load_csv_matrix,
    load_tensor,
    mode_product,
    save_csv_matrix,
    save_tensor,
    unfold,
)

finite = st.floats(-1e6, 1e6, allow_nan=False)


class TestLayout:
    @settings(max_examples=50, deadline=None)
    @given(arrays(np.float64, array_shapes(min_dims=2, max_dims=4, max_side=4), elements=finite))
    def test_fold_unfold_bit_exact(self, data):
        back = fold(unfold(data), data.shape)
        assert back.tobytes() == np.ascontiguousarray(data).tobytes()

    def test_element_count(self):
        s = TensorSignal(np.zeros((3, 4, 2)))
        assert s.unfold().shape == (2, 12) and s.vec().shape == (12, 2)

    def test_first_axis_fastest(self):
        data = np.arange(6.0).reshape(2, 3, 1)
        assert list(unfold(data)[0]) == [data[i, j, 0] for j in range(3) for i in range(2)]

    def test_from_vector_roundtrip(self, rng):
        v = rng.standard_normal(12)
        s = TensorSignal.from_vector(v, (3, 4))
        assert np.array_equal(s.vec()[:, 0], v)

    def test_mode_product_matches_kron(self, rng):
        # (I (x) A) vec(U) with factor 0 fastest equals U x_0 A
        A, B = rng.standard_normal((3, 3)), rng.standard_normal((4, 4))
        U = rng.standard_normal((3, 4, 1))
        lhs = TensorSignal(mode_product(mode_product(U, A, 0), B, 1)).vec()[:, 0]
        rhs = np.kron(B, A) @ TensorSignal(U).vec()[:, 0]
        assert np.allclose(lhs, rhs, atol=1e-12)

    def test_reversed_kron_sum_two(self):
        A, B = np.diag([1.0, 2.0]), np.diag([10.0, 20.0, 30.0])
        assert np.allclose(np.diag(reversed_kron_sum([A, B])), [11, 12, 21, 22, 31, 32])

    def test_needs_feature_axis(self):
        with pytest.raises(InvalidArgumentError):
            TensorSignal(np.zeros(3))

    def test_immutable(self):
        s = TensorSignal(np.zeros((2, 1)))
        with pytest.raises(ValueError):
            s.data[0, 0] = 1


class TestIO:
    def test_tensor_roundtrip(self, tmp_path, rng):
        data = rng.standard_normal((3, 2, 4))
        save_tensor(tmp_path / "u.bin", data)
        meta = json.loads((tmp_path / "u.bin.json").read_text())
        assert meta["shape"] == [3, 2, 4] and meta["dtype"] == "<f8"
        assert np.array_equal(load_tensor(tmp_path / "u.bin").data, data)

    def test_tensor_size_mismatch(self, tmp_path):
        save_tensor(tmp_path / "u.bin", np.zeros((2, 2)))
        (tmp_path / "u.bin").write_bytes(b"\0" * 8)
        with pytest.raises(ParseError):
            load_tensor(tmp_path / "u.bin")

    def test_missing(self, tmp_path):
        with pytest.raises(InvalidArgumentError, match="nope"):
            load_tensor(tmp_path / "nope.bin")

    def test_csv_roundtrip_and_header(self, tmp_path, rng):
        M = rng.standard_normal((3, 2))
        save_csv_matrix(tmp_path / "m.csv", M)
        assert np.array_equal(load_csv_matrix(tmp_path / "m.csv"), M)
        (tmp_path / "h.csv").write_text("a,b\n1,2\n")
        assert load_csv_matrix(tmp_path / "h.csv").tolist() == [[1.0, 2.0]]

    def test_csv_errors_carry_position(self, tmp_path):
        (tmp_path / "bad.csv").write_text("1,2\n3,oops\n")
        with pytest.raises(ParseError) as exc:
            load_csv_matrix(tmp_path / "bad.csv")
        assert (exc.value.row, exc.value.col) == (2, 2)
        (tmp_path / "rag.csv").write_text("1,2\n3\n")
        with pytest.raises(ParseError, match="ragged"):
            load_csv_matrix(tmp_path / "rag.csv")
