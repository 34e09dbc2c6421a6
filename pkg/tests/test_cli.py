import csv
import io
import json
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from stabmor import cli
from stabmor.datasets import fixture_path, scalar_system
from stabmor.io import save_system
from stabmor.system import SparseSystem, frequency_response, reduce_with_pair
from stabmor.arnoldi import arnoldi_basis

GOLDEN = Path(__file__).parent / "golden"


def run(argv, capsys):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def read_table(text):
    lines = text.splitlines()
    assert lines[0].startswith("# stabmor ")
    return list(csv.DictReader(io.StringIO("\n".join(lines[1:]) + "\n")))


def body(text):
    return text.split("\n", 1)[1]


@pytest.fixture
def scalar_manifest(tmp_path):
    return save_system(tmp_path / "scalar", scalar_system(1.0), "scalar", s0=1.0)


@pytest.fixture
def rotation_manifest(tmp_path):
    rot = SparseSystem.from_matrices(np.eye(2), [[-0.0, 1.0], [-1.0, 0.0]], [[1.0], [0.0]],
                                     [[1.0, 0.0]])
    return save_system(tmp_path / "rot", rot, "rot")


def golden_compare(text, name):
    got = read_table(text)
    want = list(csv.DictReader(open(GOLDEN / name)))
    assert list(got[0].keys()) == list(want[0].keys())
    assert len(got) == len(want)
    for g, w in zip(got, want):
        for key in w:
            try:
                expected = float(w[key])
            except ValueError:
                assert g[key] == w[key]
                continue
            if np.isnan(expected):
                assert g[key] == "nan"
            else:
                assert float(g[key]) == pytest.approx(expected, rel=1e-9, abs=1e-12)


def test_reduce_scalar_golden(scalar_manifest, capsys):
    code, out, err = run(["reduce", scalar_manifest, "--r-max", 1, "--method", "plain"], capsys)
    assert code == 0
    golden_compare(out, "reduce_scalar.csv")
    rows = read_table(out)
    assert len(rows) == 1 and rows[0]["stable"] == "1"
    assert float(rows[0]["rel_h2_error"]) < 1e-12
    assert "stable 1/1" in err


def test_bode_scalar_golden(scalar_manifest, capsys):
    code, out, _ = run(["bode", scalar_manifest, "--grid-min", 1e-2, "--grid-max", 1e2,
                        "--grid-points", 5], capsys)
    assert code == 0
    golden_compare(out, "bode_scalar.csv")
    rows = read_table(out)
    at_one = [r for r in rows if float(r["omega"]) == 1.0][0]
    assert float(at_one["magnitude"]) == pytest.approx(1 / np.sqrt(2), abs=1e-15)
    assert float(rows[0]["phase"]) == pytest.approx(0.0, abs=1e-2)


def test_regularize_golden_columns(capsys):
    code, out, _ = run(["regularize", fixture_path("rlc_ladder"), "--betas", 1e-2,
                        "--r-max", 6, "--quadrature", "gauss-legendre", "--nodes", 32,
                        "--grid-points", 200], capsys)
    assert code == 0
    golden_compare(out, "regularize_rlc.csv")


def test_sweep_golden_columns(scalar_manifest, capsys):
    code, out, _ = run(["sweep", scalar_manifest, "--r-max", 1, "--gl-nodes", 1, 4,
                        "--midpoint-levels", 2, "--adaptive"], capsys)
    assert code == 0
    golden_compare(out, "sweep_scalar.csv")


def test_reduce_plain_lists_recorded_unstable(tmp_path, capsys):
    out_csv = tmp_path / "plain.csv"
    record = tmp_path / "plain.json"
    code, _, _ = run(["reduce", fixture_path("spring200"), "--method", "plain", "--no-h2",
                      "-o", out_csv, "--record", record, "--require-stable", "all"], capsys)
    assert code == 1  # target not met
    rows = read_table(out_csv.read_text())
    unstable = [int(r["r"]) for r in rows if r["stable"] == "0"]
    manifest = fixture_path("spring200").read_text()
    recorded = [line.split("=")[1].split() for line in manifest.splitlines()
                if line.startswith("unstable_r")][0]
    assert unstable == [int(r) for r in recorded]
    data = json.loads(record.read_text())
    assert data["summary"]["target_met"] is False and len(data["results"]) == 60
    assert all(np.isnan(float(r["rel_h2_error"])) for r in rows)


def test_reduce_stabilized_meets_target(tmp_path, capsys):
    code, out, _ = run(["reduce", fixture_path("spring50"), "--r-max", 20,
                        "--quadrature", "gauss-legendre", "--nodes", 32, "--no-h2",
                        "--require-stable", "all", "--save-rom", tmp_path / "rom",
                        "--save-rom-r", 10], capsys)
    assert code == 0
    assert all(r["stable"] == "1" for r in read_table(out))
    assert (tmp_path / "rom" / "spring50_r10.manifest").is_file()
    code, out, _ = run(["bode", tmp_path / "rom" / "spring50_r10.manifest",
                        "--grid-points", 10], capsys)
    assert code == 0 and len(read_table(out)) == 10


def test_reduce_numeric_target(scalar_manifest, capsys):
    assert run(["reduce", scalar_manifest, "--r-max", 1, "--require-stable", 1], capsys)[0] == 0
    assert run(["reduce", scalar_manifest, "--r-max", 1, "--require-stable", 2], capsys)[0] == 1
    code, _, err = run(["reduce", scalar_manifest, "--require-stable", "most"], capsys)
    assert code == 2 and '"kind": "usage"' in err


def test_reduce_midpoint_and_adaptive(capsys):
    for flags in (["--quadrature", "midpoint"], ["--quadrature", "adaptive"]):
        code, out, err = run(["reduce", fixture_path("spring50"), "--r-max", 8, "--no-h2",
                              *flags], capsys)
        assert code == 0 and len(read_table(out)) == 8


def test_bode_rom_overlap(capsys):
    manifest = fixture_path("spring50")
    code, out, _ = run(["bode", manifest, "--compare-r", 10, "--method", "plain",
                        "--grid-points", 100], capsys)
    assert code == 0
    rows = read_table(out)
    assert len(rows) == 100
    from stabmor.datasets import load_fixture
    sys_, m = load_fixture("spring50")
    V = arnoldi_basis(sys_, m.s0, 10)
    omegas = np.array([float(r["omega"]) for r in rows])
    diff = frequency_response(sys_, omegas) - frequency_response(reduce_with_pair(sys_, V, V), omegas)
    assert max(float(r["abs_error"]) for r in rows) == pytest.approx(np.abs(diff).max(), rel=1e-9)


def test_bode_marks_poles(rotation_manifest, capsys):
    code, out, _ = run(["bode", rotation_manifest, "--grid-min", 1e-1, "--grid-max", 10,
                        "--grid-points", 3], capsys)
    assert code == 0
    rows = read_table(out)
    pole = [r for r in rows if r["pole"] == "1"]
    assert len(pole) == 1 and float(pole[0]["omega"]) == 1.0 and pole[0]["magnitude"] == "nan"


def test_stabilize_writes_projection(tmp_path, capsys):
    from stabmor.io import load_dense_matrix_market
    code, out, _ = run(["stabilize", fixture_path("spring50"), "--r-max", 6,
                        "--quadrature", "gauss-legendre", "--nodes", 16,
                        "--output-dir", tmp_path], capsys)
    assert code == 0
    info = json.loads(out)
    assert info["node_evals"] == 16 and info["r"] == 6
    V = load_dense_matrix_market(tmp_path / "V.mtx")
    Wp = load_dense_matrix_market(tmp_path / "W_prime.mtx")
    np.testing.assert_allclose(Wp.T @ V, np.eye(6), atol=1e-8)
    assert load_dense_matrix_market(tmp_path / "W_tilde.mtx").shape == (50, 6)


def test_oracle_certification(tmp_path, capsys):
    from stabmor.datasets import random_stable_system
    manifest = save_system(tmp_path, random_stable_system(20, seed=3), "rand20", s0=1.0)
    code, out, _ = run(["oracle", manifest, "--quadrature", "gauss-legendre", "--nodes", 64],
                       capsys)
    assert code == 0
    data = json.loads(out)
    assert data["satisfied"] and data["stable_count"] == data["r_count"] == 20
    assert data["error_norm"] < data["threshold"]
    assert data["oracle_residual"] < 1e-8
    code, out, _ = run(["oracle", manifest, "--quadrature", "adaptive", "--r-max", 5,
                        "--norm", "spectral", "-o", tmp_path / "o.json"], capsys)
    assert code == 0 and json.loads((tmp_path / "o.json").read_text())["norm"] == "spectral"


def test_sweep_monotone_on_fixture(capsys):
    code, out, _ = run(["sweep", fixture_path("spring200"), "--gl-nodes", 1, 2, 4, 8], capsys)
    assert code == 0
    rows = read_table(out)
    assert rows[0]["scheme"] == "plain" and int(rows[0]["stable_count"]) == 34
    counts = [int(r["stable_count"]) for r in rows[1:]]
    assert counts == sorted(counts)


def test_usage_errors(scalar_manifest, capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["regularize", str(fixture_path("rlc_ladder")), "--betas"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        cli.main(["regularize", str(fixture_path("rlc_ladder"))])
    assert exc.value.code == 2
    with pytest.raises(SystemExit):
        cli.main(["reduce", str(scalar_manifest), "--quadrature", "simpson"])
    capsys.readouterr()
    code, _, err = run(["bode", scalar_manifest, "--grid-min", 10, "--grid-max", 1], capsys)
    assert code == 2


def test_runtime_error_record(tmp_path, capsys):
    code, out, err = run(["reduce", tmp_path / "missing.manifest"], capsys)
    assert code == 3 and out == ""
    record = json.loads(err.strip().splitlines()[-1])
    assert record["error"] == "ManifestError" and record["kind"] == "runtime"
    code, _, err = run(["reduce", fixture_path("rlc_ladder"), "--r-max", 3], capsys)
    assert code == 3 and json.loads(err.strip().splitlines()[-1])["error"] == "NotAnODE"


def test_regularize_per_beta_failures_are_not_fatal(capsys):
    code, out, _ = run(["regularize", fixture_path("rlc_ladder"), "--betas", 1e-2, 1e-7,
                        "--no-reduce", "--grid-points", 100], capsys)
    assert code == 0
    rows = read_table(out)
    assert rows[0]["failure"] == "" and rows[1]["failure"].startswith("SingularEhat")


def test_reduce_deterministic_with_threads(tmp_path):
    env = dict(os.environ)
    outputs = []
    for threads in ("1", "3", "3"):
        env["STABMOR_NUM_THREADS"] = threads
        out = tmp_path / f"run{len(outputs)}.csv"
        subprocess.run([sys.executable, "-m", "stabmor.cli", "reduce",
                        str(fixture_path("spring50")), "--r-max", "10",
                        "--grid-points", "200", "-o", str(out)], check=True, env=env)
        outputs.append(body(out.read_text()))
    assert outputs[0] == outputs[1] == outputs[2]


def test_regularize_graded_levels(capsys):
    argv = ["regularize", fixture_path("rlc_ladder"), "--betas", 1e-4, "--r-max", 22]
    _, coarse, _ = run(argv, capsys)
    code, graded, _ = run(argv + ["--graded-levels", 30], capsys)
    assert code == 0
    c, g = read_table(coarse)[0], read_table(graded)[0]
    assert int(c["stable_stabilised"]) < int(c["r_count"])
    assert g["stable_stabilised"] == g["r_count"] == "22"
    assert int(g["node_evals"]) > int(c["node_evals"])
    with pytest.raises(SystemExit):
        cli.main(["regularize", str(fixture_path("rlc_ladder")), "--betas", "1e-2",
                  "--graded-levels", "x"])
    assert cli.main(["regularize", str(fixture_path("rlc_ladder")), "--betas", "1e-2",
                     "--graded-levels", "-1"]) == 2
