import json

import numpy as np
import pytest
import scipy.sparse as sp

from stiffkrylov import io
from stiffkrylov.arnoldi import c_arnoldi, factor_shifted
from stiffkrylov.cases import random_dae
from stiffkrylov.evolve import single_step


def test_fmt():
    assert io.fmt(0.1) == "0.1"
    assert io.fmt(np.float64(1 / 3)) == repr(1 / 3)
    assert io.fmt(float("nan")) == "nan" and io.fmt(-np.inf) == "-inf"
    assert io.fmt(np.int64(4)) == "4" and io.fmt(True) == "true"


def test_json_nonfinite_is_null():
    assert json.loads(io.dumps_json({"a": float("nan"), "b": [1.0, np.inf]})) == {"a": None, "b": [1.0, None]}


def test_json_complex_and_arrays():
    assert json.loads(io.dumps_json({"z": 1 + 2j, "v": np.arange(3)})) == {"v": [0, 1, 2], "z": [1.0, 2.0]}


def test_error_grid_csv(tmp_path):
    recs = [{"h": 0.1, "m": 4, "variant": "plain", "abs_error": 1e-3},
            {"h": 0.01, "m": 8, "variant": "plain", "abs_error": float("nan")},
            {"h": 0.01, "m": 2, "variant": "structured_pruned", "abs_error": 2.5e-7}]
    p = io.write_error_grid(tmp_path / "g.csv", recs)
    assert p.read_text() == ("h,m,abs_error,variant\n0.01,2,2.5e-07,structured_pruned\n"
                             "0.01,8,nan,plain\n0.1,4,0.001,plain\n")


def test_error_grid_bound_column(tmp_path):
    recs = [{"h": 0.1, "m": 4, "variant": "v", "abs_error": float("nan"), "bound": 1e-5}]
    text = io.write_error_grid(tmp_path / "g.csv", recs, with_bound=True).read_text()
    assert text.splitlines() == ["h,m,abs_error,variant,bound", "0.1,4,nan,v,1e-05"]


def test_eigenvalues_sorted_by_magnitude(tmp_path):
    p = io.write_eigenvalues(tmp_path / "e.csv", [3.0, -1 + 1j, 0.5j, -2.0])
    header, rows = io.read_csv(p)
    assert header == ["re", "im"]
    mags = [abs(complex(float(a), float(b))) for a, b in rows]
    assert mags == sorted(mags) and len(rows) == 4


def test_matrix_market_round_trip(tmp_path, rng):
    A = sp.random(7, 5, density=0.4, random_state=1, format="csr")
    A.data = rng.standard_normal(A.nnz) * 10.0 ** rng.uniform(-300, 300, A.nnz)
    p = io.write_matrix_market(tmp_path / "A.mtx", A)
    B = io.read_matrix_market(p)
    assert (A != B).nnz == 0


def test_matrix_market_layout(tmp_path):
    p = io.write_matrix_market(tmp_path / "A.mtx", np.array([[0.0, 2.0], [1.5, 0.0]]))
    assert p.read_text() == ("%%MatrixMarket matrix coordinate real general\n2 2 2\n"
                             "2 1 1.5\n1 2 2.0\n")


def test_system_round_trip(tmp_path):
    s = random_dae(9, 4, seed=2)
    io.write_system(tmp_path, s)
    t = io.read_system(tmp_path)
    assert (s.C != t.C).nnz == 0 and (s.G != t.G).nnz == 0
    for name in ("u0", "u1", "x0"):
        np.testing.assert_array_equal(getattr(s, name), getattr(t, name))


def test_read_system_missing(tmp_path):
    with pytest.raises(io.ValidationError):
        io.read_system(tmp_path)


def test_bit_stable(tmp_path):
    res = single_step(random_dae(12, 6, seed=1), 0.2, 5)
    a = io.write_step_result(tmp_path / "a", res).read_bytes()
    b = io.write_step_result(tmp_path / "b", single_step(random_dae(12, 6, seed=1), 0.2, 5)).read_bytes()
    assert a == b


def test_step_result_csv(tmp_path):
    res = single_step(random_dae(12, 6, seed=1), 0.2, 5)
    io.write_step_result(tmp_path, res, "csv")
    header, rows = io.read_csv(tmp_path / "state.csv")
    assert header == ["x_r", "x_n", "x_full"] and len(rows) == 12
    assert float(rows[3][2]) == res.x_full[3]
    meta = json.loads((tmp_path / "step_meta.json").read_text())
    assert "x_full" not in meta


def test_dump_krylov(tmp_path):
    s = random_dae(12, 6, seed=1)
    K = c_arnoldi(factor_shifted(s, 0.1), s.projector, s.x0, 4)
    io.dump_krylov(tmp_path, K)
    meta = json.loads((tmp_path / "meta.json").read_text())
    assert meta["m"] == K.m and meta["gamma"] == 0.1
    np.testing.assert_array_equal(io.read_matrix_market(tmp_path / "W.mtx").toarray(), K.W)


def test_write_outputs_formats(tmp_path):
    A = sp.identity(3, format="csr")
    assert io.write_outputs(A, tmp_path / "I.mtx", "matrix-market").exists()
    io.write_outputs({"a": 1.0, "b": [1, 2]}, tmp_path / "d.csv", "csv")
    assert (tmp_path / "d.csv").read_text() == "key,value\na,1.0\n"
    with pytest.raises(ValueError):
        io.write_outputs(A, tmp_path / "x", "xlsx")


def test_unwritable_path_names_file(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(io.OutputError) as exc:
        io.write_csv(blocker / "sub" / "out.csv", ["a"], [[1]])
    assert str(blocker) in exc.value.path
    assert isinstance(exc.value, OSError)


def test_vector_csv(tmp_path):
    p = io.write_vector_csv(tmp_path / "v.csv", [1.5, -2.0], "u0")
    np.testing.assert_array_equal(io.read_vector_csv(p), [1.5, -2.0])
    (tmp_path / "bad.csv").write_text("u\nx\n")
    with pytest.raises(io.OutputError):
        io.read_vector_csv(tmp_path / "bad.csv")
