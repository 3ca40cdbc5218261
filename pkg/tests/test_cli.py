import json
import math
import shutil
import subprocess

import numpy as np
import pytest

from trexkit.cli import (EXIT_CONFIG, EXIT_DATA, EXIT_IO, EXIT_OK, EXIT_PARSE, EXIT_USAGE, main)


def write_matrix(path, A, header=None):
    A = np.atleast_2d(A)
    lines = [",".join(header)] if header else []
    lines += [",".join(repr(float(v)) for v in row) for row in A]
    path.write_text("\n".join(lines) + "\n")
    return str(path)


@pytest.fixture
def toy_files(tmp_path):
    x = write_matrix(tmp_path / "X.csv", [[1.0], [0.0]], header=["x1"])
    y = write_matrix(tmp_path / "Y.csv", [[2.0], [1.0]])
    return x, y


@pytest.fixture
def signal_files(tmp_path):
    rng = np.random.default_rng(0)
    X = rng.standard_normal((40, 5))
    Y = 4.0 * X[:, 2] + 0.3 * rng.standard_normal(40)
    return write_matrix(tmp_path / "X.csv", X), write_matrix(tmp_path / "Y.csv", Y[:, None])


def read_json(path):
    return json.loads(path.read_text())


def test_trex_solve_toy(toy_files, tmp_path):
    out = tmp_path / "out"
    assert main(["trex-solve", *toy_files, "--phi", "0.5", "--out", str(out)]) == EXIT_OK
    sol = read_json(out / "trex_solution.json")["solution"]
    assert sol["value"] == pytest.approx(2 + 2 * math.sqrt(2), abs=1e-6)
    assert sol["beta_hat"][0] == pytest.approx(2 - math.sqrt(2), abs=1e-6)
    assert len(sol["subproblems"]) == 2
    assert (out / "topology.csv").exists() and (out / "topology_histogram.csv").exists()


def test_missing_file_names_the_path(toy_files, tmp_path, capsys):
    missing = str(tmp_path / "nope.csv")
    assert main(["trex-solve", toy_files[0], missing, "--out", str(tmp_path / "o")]) == EXIT_IO
    assert missing in capsys.readouterr().err


def test_phi_zero_is_rejected_before_solving(toy_files, tmp_path):
    out = tmp_path / "o"
    assert main(["trex-solve", *toy_files, "--phi", "0", "--out", str(out)]) == EXIT_USAGE
    assert not out.exists()


def test_malformed_csv(tmp_path, toy_files):
    bad = tmp_path / "bad.csv"
    bad.write_text("1,2\n3,abc\n")
    assert main(["trex-solve", str(bad), toy_files[1], "--out", str(tmp_path / "o")]) == EXIT_PARSE
    ragged = tmp_path / "ragged.csv"
    ragged.write_text("1,2\n3\n")
    assert main(["trex-solve", str(ragged), toy_files[1], "--out", str(tmp_path / "o")]) == EXIT_PARSE


def test_dimension_mismatch(tmp_path, toy_files):
    y3 = write_matrix(tmp_path / "y3.csv", [[1.0], [2.0], [3.0]])
    assert main(["trex-solve", toy_files[0], y3, "--out", str(tmp_path / "o")]) == EXIT_DATA


def test_trex_path_and_heuristic(signal_files, tmp_path):
    out = tmp_path / "o"
    assert main(["trex-path", *signal_files, "--phi-grid", "1.0,0.5,0.25", "--out", str(out)]) == EXIT_OK
    path = read_json(out / "trex_path.json")["path"]
    assert path["phi_grid"] == [1.0, 0.5, 0.25]
    assert path["entry_values"][2] > 0
    assert main(["trex-heuristic", *signal_files, "--n-starts", "3", "--out", str(out)]) == EXIT_OK
    res = read_json(out / "qtrex_result.json")
    assert res["config"]["n_starts"] == 3
    assert len((out / "qtrex_starts.csv").read_text().splitlines()) > 3


def test_knockoff_lasso_finds_planted_feature(signal_files, tmp_path):
    out = tmp_path / "o"
    assert main(["knockoff", *signal_files, "--stat", "lasso", "--q", "0.5", "--out", str(out)]) == EXIT_OK
    report = read_json(out / "knockoff_selection.json")
    assert 2 in report["selection"]["selected"]
    assert report["config"]["stat"] == "lasso"
    assert len((out / "knockoff_W.csv").read_text().splitlines()) == 6


def test_knockoff_global_null_selects_nothing(tmp_path):
    rng = np.random.default_rng(1)
    x = write_matrix(tmp_path / "X.csv", rng.standard_normal((30, 6)))
    y = write_matrix(tmp_path / "Y.csv", rng.standard_normal((30, 1)))
    out = tmp_path / "o"
    assert main(["knockoff", x, y, "--stat", "fvalue", "--q", "0.2", "--out", str(out)]) == EXIT_OK
    assert read_json(out / "knockoff_selection.json")["selection"]["selected"] == []


def test_knockoff_bhq_and_phipath(signal_files, tmp_path):
    out = tmp_path / "o"
    assert main(["knockoff", *signal_files, "--stat", "bhq", "--q", "0.1", "--out", str(out)]) == EXIT_OK
    assert 2 in read_json(out / "knockoff_selection.json")["selection"]["selected"]
    assert main(["knockoff", *signal_files, "--stat", "phipath", "--phi-grid", "1.5,1.0,0.5,0.25",
                 "--out", str(out)]) == EXIT_OK
    assert read_json(out / "knockoff_selection.json")["statistics"]["variant"] == "phi_path"


def test_knockoff_q_out_of_range(signal_files, tmp_path):
    assert main(["knockoff", *signal_files, "--q", "1.5", "--out", str(tmp_path / "o")]) == EXIT_USAGE


def test_knockoff_rejects_n_below_p(tmp_path):
    rng = np.random.default_rng(0)
    x = write_matrix(tmp_path / "X.csv", rng.standard_normal((4, 6)))
    y = write_matrix(tmp_path / "Y.csv", rng.standard_normal((4, 1)))
    assert main(["knockoff", x, y, "--stat", "lasso", "--out", str(tmp_path / "o")]) == EXIT_DATA


MINIMAL_CONFIG = {"n": 30, "p": 6, "sparsity": 2, "beta_pattern": "amplitude", "amplitude": 3.0,
                  "normalize": "unit", "n_reps": 2, "statistics": ["lasso_signed_max"]}


def test_sim_fdr_minimal(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(MINIMAL_CONFIG))
    out = tmp_path / "o"
    assert main(["sim-fdr", str(cfg), "--out", str(out)]) == EXIT_OK
    report = read_json(out / "fdr_report.json")
    assert {r["rep"] for r in report["records"]} == {0, 1}
    assert (out / "fdr_records.csv").exists()


def test_sim_heuristic_toml(tmp_path):
    cfg = tmp_path / "cfg.toml"
    cfg.write_text("n = 12\np = 6\nsparsity = 2\nsigma = 0.1\nn_reps = 2\nn_starts = 3\n")
    out = tmp_path / "o"
    assert main(["sim-heuristic", str(cfg), "--out", str(out)]) == EXIT_OK
    assert len(read_json(out / "heuristic_report.json")["records"]) == 2


def test_invalid_config_names_the_field(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({**MINIMAL_CONFIG, "kappa": 1.5}))
    assert main(["sim-fdr", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert "kappa" in capsys.readouterr().err
    assert main(["sim-fdr", str(tmp_path / "none.json"), "--out", str(tmp_path / "o")]) == EXIT_IO


def test_reports_are_byte_identical_across_runs_and_parallelism(signal_files, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(MINIMAL_CONFIG))
    commands = [
        ["trex-solve", *signal_files],
        ["knockoff", *signal_files, "--stat", "fvalue"],
        ["sim-fdr", str(cfg)],
    ]
    for k, cmd in enumerate(commands):
        outputs = []
        for run, par in enumerate(("1", "1", "3")):
            out = tmp_path / f"c{k}_{run}"
            assert main([*cmd, "--out", str(out), "--parallelism", par]) == EXIT_OK
            outputs.append({f.name: f.read_bytes() for f in sorted(out.iterdir())})
        assert outputs[0] == outputs[1] == outputs[2]


@pytest.mark.skipif(shutil.which("trexkit") is None, reason="console script not installed")
def test_console_script(toy_files, tmp_path):
    proc = subprocess.run(["trexkit", "trex-solve", *toy_files, "--out", str(tmp_path / "o")],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    proc = subprocess.run(["trexkit", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and "trexkit" in proc.stdout
