from pathlib import Path

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from vpal.matrix_io import load_dmat, load_matrix, load_matrix_csv, save_dmat, save_matrix_csv


class TestMatrixIO:
    def test_dmat_round_trip_is_exact(self, tmp_path: Path) -> None:
        M = np.random.default_rng(1).standard_normal((5, 3)) * 1e-7
        save_dmat(tmp_path / "m.dmat", M)
        assert_array_equal(load_dmat(tmp_path / "m.dmat"), M)

    def test_dmat_layout(self, tmp_path: Path) -> None:
        save_dmat(tmp_path / "m.dmat", np.array([[1.0, 2.0]]))
        data = (tmp_path / "m.dmat").read_bytes()
        assert data[:4] == b"DMAT"
        assert int.from_bytes(data[4:12], "little") == 1
        assert int.from_bytes(data[12:20], "little") == 2
        assert len(data) == 20 + 16

    def test_dmat_empty_matrix(self, tmp_path: Path) -> None:
        save_dmat(tmp_path / "m.dmat", np.zeros((0, 4)))
        assert load_dmat(tmp_path / "m.dmat").shape == (0, 4)

    def test_dmat_truncated(self, tmp_path: Path) -> None:
        save_dmat(tmp_path / "m.dmat", np.ones((3, 3)))
        data = (tmp_path / "m.dmat").read_bytes()
        (tmp_path / "short.dmat").write_bytes(data[:-5])
        with pytest.raises(ValueError, match="offset 87"):
            load_dmat(tmp_path / "short.dmat")
        (tmp_path / "header.dmat").write_bytes(data[:10])
        with pytest.raises(ValueError, match="offset 10"):
            load_dmat(tmp_path / "header.dmat")

    def test_dmat_bad_magic(self, tmp_path: Path) -> None:
        (tmp_path / "m.dmat").write_bytes(b"XMAT" + bytes(16))
        with pytest.raises(ValueError, match="magic"):
            load_dmat(tmp_path / "m.dmat")

    def test_dmat_rejects_bad_matrices(self, tmp_path: Path) -> None:
        with pytest.raises(ValueError):
            save_dmat(tmp_path / "m.dmat", np.ones(3))
        with pytest.raises(ValueError):
            save_dmat(tmp_path / "m.dmat", np.array([[np.inf]]))

    def test_csv_round_trip_is_exact(self, tmp_path: Path) -> None:
        M = np.random.default_rng(2).standard_normal((4, 6))
        save_matrix_csv(tmp_path / "m.csv", M)
        assert_array_equal(load_matrix_csv(tmp_path / "m.csv"), M)

    def test_csv_and_dmat_agree(self, tmp_path: Path) -> None:
        M = np.random.default_rng(3).standard_normal((3, 2))
        save_matrix_csv(tmp_path / "m.csv", M)
        save_dmat(tmp_path / "m.dmat", M)
        assert_array_equal(load_matrix(tmp_path / "m.csv"), load_matrix(tmp_path / "m.dmat"))

    def test_csv_errors_name_line(self, tmp_path: Path) -> None:
        path = tmp_path / "m.csv"
        path.write_text("two,three\n")
        with pytest.raises(ValueError, match=":1:"):
            load_matrix_csv(path)
        path.write_text("2,2\n1.0,2.0\n3.0\n")
        with pytest.raises(ValueError, match=":3:"):
            load_matrix_csv(path)
        path.write_text("3,1\n1.0\n")
        with pytest.raises(ValueError):
            load_matrix_csv(path)
        path.write_text("")
        with pytest.raises(ValueError):
            load_matrix_csv(path)
