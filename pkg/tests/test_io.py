import numpy as np
import pytest
import scipy.sparse as sp

from stabmor.datasets import FIXTURES, fixture_path, load_fixture, random_stable_system
from stabmor.exceptions import HeaderMismatch, ManifestError, ParseError
from stabmor.io import (RunRecord, csv_body, format_value, load_dense_matrix_market,
                        load_manifest, load_matrix_market, load_system, save_system,
                        write_csv, write_matrix_market)
from stabmor.system import ReducedModel


def write(tmp_path, text, name="m.mtx"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_identity(tmp_path):
    p = write(tmp_path, "%%MatrixMarket matrix coordinate real general\n% c\n2 2 2\n1 1 1\n2 2 1\n")
    M = load_matrix_market(p)
    np.testing.assert_array_equal(M.toarray(), np.eye(2))
    assert M.nnz == 2


def test_symmetric_expansion(tmp_path):
    p = write(tmp_path, "%%MatrixMarket matrix coordinate real symmetric\n2 2 3\n"
                        "1 1 4\n2 1 -1\n2 2 5\n")
    M = load_matrix_market(p)
    np.testing.assert_array_equal(M.toarray(), [[4, -1], [-1, 5]])
    assert M.nnz == 4  # 2 * 3 stored entries minus 2 diagonal duplicates


def test_skew_and_hermitian(tmp_path):
    p = write(tmp_path, "%%MatrixMarket matrix coordinate real skew-symmetric\n2 2 1\n2 1 3\n")
    np.testing.assert_array_equal(load_matrix_market(p).toarray(), [[0, -3], [3, 0]])
    p = write(tmp_path, "%%MatrixMarket matrix coordinate complex hermitian\n2 2 2\n"
                        "1 1 2 0\n2 1 1 1\n")
    np.testing.assert_array_equal(load_matrix_market(p).toarray(), [[2, 1 - 1j], [1 + 1j, 0]])


def test_pattern_and_integer(tmp_path):
    p = write(tmp_path, "%%MatrixMarket matrix coordinate pattern general\n2 3 2\n1 3\n2 1\n")
    np.testing.assert_array_equal(load_matrix_market(p).toarray(), [[0, 0, 1], [1, 0, 0]])
    p = write(tmp_path, "%%MatrixMarket matrix coordinate integer general\n1 1 1\n1 1 7\n")
    assert load_matrix_market(p)[0, 0] == 7.0


def test_array_format(tmp_path):
    p = write(tmp_path, "%%MatrixMarket matrix array real general\n2 2\n1\n2\n3\n4\n")
    np.testing.assert_array_equal(load_dense_matrix_market(p), [[1, 3], [2, 4]])
    p = write(tmp_path, "%%MatrixMarket matrix array real symmetric\n2 2\n1\n2\n3\n")
    np.testing.assert_array_equal(load_matrix_market(p).toarray(), [[1, 2], [2, 3]])


def test_duplicates_summed(tmp_path):
    p = write(tmp_path, "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1\n1 1 2\n")
    M = load_matrix_market(p)
    assert M.nnz == 1 and M[0, 0] == 3.0


@pytest.mark.parametrize("text, lineno", [
    ("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 x 1\n", 3),
    ("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1 abc\n", 3),
    ("%%MatrixMarket matrix coordinate real general\n2 two 1\n", 2),
    ("%%MatrixMarket matrix coordinate complex general\n1 1 1\n1 1 1\n", 3),
    ("%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n1 2 1\n", 3),
    ("%%MatrixMarket matrix crd real general\n1 1 1\n1 1 1\n", 1),
    ("not a matrix market file\n", 1),
])
def test_parse_errors_carry_line_numbers(tmp_path, text, lineno):
    p = write(tmp_path, text)
    with pytest.raises(ParseError) as err:
        load_matrix_market(p)
    assert err.value.lineno == lineno
    assert f":{lineno}:" in str(err.value)


@pytest.mark.parametrize("text", [
    "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1\n",
    "%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1 1\n2 2 1\n",
    "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1\n",
    "%%MatrixMarket matrix array real general\n2 2\n1\n2\n3\n",
    "%%MatrixMarket matrix coordinate real symmetric\n2 3 0\n",
])
def test_header_mismatch(tmp_path, text):
    with pytest.raises(HeaderMismatch):
        load_matrix_market(write(tmp_path, text))


def test_round_trip_sparse(tmp_path):
    rng = np.random.default_rng(0)
    M = sp.random(100, 100, density=0.05, random_state=rng, format="csc")
    write_matrix_market(tmp_path / "r.mtx", M)
    back = load_matrix_market(tmp_path / "r.mtx")
    assert (back != M).nnz == 0
    C = M + 1j * sp.random(100, 100, density=0.02, random_state=rng, format="csc")
    write_matrix_market(tmp_path / "c.mtx", C)
    assert (load_matrix_market(tmp_path / "c.mtx") != C).nnz == 0


def test_round_trip_dense(tmp_path):
    X = np.random.default_rng(1).standard_normal((30, 4))
    write_matrix_market(tmp_path / "V.mtx", X, comment="projection basis")
    np.testing.assert_array_equal(load_dense_matrix_market(tmp_path / "V.mtx"), X)


def test_fixtures_load():
    for name in FIXTURES:
        sys, manifest = load_fixture(name)
        assert sys.n == manifest.n and sys.name == name
    assert fixture_path("spring200").name == "spring200.manifest"
    with pytest.raises(KeyError):
        fixture_path("microthruster")


def test_save_and_load_system(tmp_path):
    sys = random_stable_system(15, seed=0, n_in=2)
    path = save_system(tmp_path, sys, "rand", s0=0.5, r_max=7)
    back = load_system(path)
    assert (back.A != sys.A).nnz == 0 and (back.E != sys.E).nnz == 0
    m = load_manifest(path)
    assert m.s0 == 0.5 and m.extra == {"r_max": "7"} and m.n_in == 2
    rom = ReducedModel(np.eye(2), -np.eye(2), np.ones((2, 1)), np.ones((1, 2)), {})
    back = load_system(save_system(tmp_path / "rom", rom, "rom"))
    assert isinstance(back, ReducedModel)
    np.testing.assert_array_equal(back.Abar, -np.eye(2))


def test_manifest_dimension_mismatch_is_fatal(tmp_path):
    sys = random_stable_system(6, seed=0)
    path = save_system(tmp_path, sys, "s")
    text = path.read_text().replace("n = 6", "n = 7")
    path.write_text(text)
    with pytest.raises(ManifestError, match="declares"):
        load_system(path)


@pytest.mark.parametrize("edit, match", [
    (lambda t: t.replace("E = s_E.mtx\n", ""), "missing"),
    (lambda t: t.replace("s_A.mtx", "nowhere.mtx"), "not found"),
    (lambda t: t + "garbage line\n", "key = value"),
    (lambda t: t + "n = 3\n", "duplicate"),
    (lambda t: t.replace("n_in = 1", "n_in = one"), "integers"),
])
def test_manifest_errors(tmp_path, edit, match):
    path = save_system(tmp_path, random_stable_system(6, seed=0), "s")
    path.write_text(edit(path.read_text()))
    with pytest.raises(ManifestError, match=match):
        load_manifest(path)


def test_missing_manifest(tmp_path):
    with pytest.raises(ManifestError):
        load_manifest(tmp_path / "nope.manifest")


def test_csv_formatting(tmp_path):
    assert format_value(0.1) == "0.1"
    assert float(format_value(1 / 3)) == 1 / 3
    assert format_value(True) == "1" and format_value(np.int64(4)) == "4"
    body = csv_body(("a", "b"), [(1, 2.5), (2, float("nan"))])
    assert body == "a,b\n1,2.5\n2,nan\n"
    text = write_csv(tmp_path / "t.csv", ("a", "b"), [(1, 2.5)], "0.1.0")
    assert text.startswith("# stabmor 0.1.0 ") and text.split("\n", 1)[1] == "a,b\n1,2.5\n"


def test_run_record(tmp_path):
    rec = RunRecord("reduce", {"s0": 1.0}, results=[{"r": 1, "stable": True}],
                    node_counts={"node_evals": np.int64(15)})
    rec.write(tmp_path / "rec.json")
    import json
    data = json.loads((tmp_path / "rec.json").read_text())
    assert data["command"] == "reduce" and data["node_counts"]["node_evals"] == 15


def test_written_files_are_readable_by_scipy(tmp_path):
    import scipy.io
    S = sp.random(7, 5, density=0.4, random_state=3, format="csc")
    D = np.random.default_rng(3).standard_normal((4, 2))
    write_matrix_market(tmp_path / "s.mtx", S)
    write_matrix_market(tmp_path / "d.mtx", D)
    assert np.array_equal(sp.csc_array(scipy.io.mmread(tmp_path / "s.mtx")).toarray(),
                          S.toarray())
    assert np.array_equal(np.asarray(scipy.io.mmread(tmp_path / "d.mtx")), D)
