"""Tests for CLI interface."""

import csv
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from hydra_cd import __version__
from hydra_cd.cli import cli
from hydra_cd.config import manifest_float, read_manifest
from hydra_cd.generator import check_certificate
from hydra_cd.matrix import SparseMatrix, load_matrix_market, load_vector, save_matrix_market, save_vector

GENERATE_ARGS = [
    "-c", "2", "--local-rows", "16", "--global-rows", "4", "--block-size", "8",
    "--nnz-local", "3", "--nnz-global", "4", "--support", "4",
]


def read_trace(path):
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    comments = dict(line[2:].split("=", 1) for line in lines if line.startswith("# "))
    rows = list(csv.DictReader(line for line in lines if not line.startswith("#")))
    return comments, rows


@pytest.fixture
def runner(monkeypatch, tmp_path):
    monkeypatch.chdir(tmp_path)
    return CliRunner()


@pytest.fixture
def instance(runner, tmp_path):
    """A small generated instance directory."""
    out = tmp_path / "inst"
    result = runner.invoke(cli, ["generate", "-o", str(out), *GENERATE_ARGS, "--seed", "3"])
    assert result.exit_code == 0, result.output
    return out


def solve_args(inst, *extra):
    return [
        "solve", "-m", str(inst / "A.mtx"), "-y", str(inst / "y.txt"), "--lam", "1",
        "--partition-file", str(inst / "partition.txt"), "--tau", "2", *extra,
    ]


def test_cli_help(runner):
    """Test CLI help lists every subcommand."""
    result = runner.invoke(cli, ["--help"])
    assert result.exit_code == 0
    for name in ("generate", "analyze", "solve"):
        assert name in result.output


def test_cli_version(runner):
    result = runner.invoke(cli, ["--version"])
    assert result.exit_code == 0
    assert __version__ in result.output


# -------------------- GENERATE --------------------

def test_generate_writes_instance(instance):
    """Test generate writes the matrix, vectors, partition and a manifest."""
    for name in ("A.mtx", "y.txt", "xstar.txt", "partition.txt", "manifest.txt"):
        assert (instance / name).is_file()
    assert not (instance / "lam2.txt").exists()

    manifest = read_manifest(instance / "manifest.txt")
    assert manifest["seed"] == "3"
    assert manifest["n"] == "36"
    assert manifest["d"] == "16"
    assert manifest["certificate_passed"] == "true"
    assert manifest["reg"] == "l1"
    assert np.isfinite(manifest_float(manifest, "L_star"))


def test_generate_certificate_holds_from_files(instance):
    """Test the optimality certificate can be rerun from the written files."""
    A = load_matrix_market(instance / "A.mtx")
    y = load_vector(instance / "y.txt", A.n_rows)
    x_star = load_vector(instance / "xstar.txt", A.n_cols)
    manifest = read_manifest(instance / "manifest.txt")
    report = check_certificate(A, y, x_star, manifest_float(manifest, "lam"))
    assert report.passed
    g = A.matvec(x_star) - y
    L_star = 0.5 * g @ g + np.abs(x_star).sum()
    assert L_star == pytest.approx(manifest_float(manifest, "L_star"), rel=1e-10)


def test_generate_is_deterministic(runner, tmp_path):
    """Test the same seed writes byte-identical files."""
    for name in ("a", "b"):
        result = runner.invoke(cli, ["generate", "-o", str(tmp_path / name), *GENERATE_ARGS, "--seed", "9"])
        assert result.exit_code == 0
    for name in ("A.mtx", "y.txt", "xstar.txt", "partition.txt", "manifest.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_generate_elastic_net(runner, tmp_path):
    out = tmp_path / "en"
    result = runner.invoke(cli, ["generate", "-o", str(out), *GENERATE_ARGS, "--l2-ratio", "0.5"])
    assert result.exit_code == 0
    assert (out / "lam2.txt").is_file()
    assert read_manifest(out / "manifest.txt")["reg"] == "elastic_net"


def test_generate_rejects_bad_density(runner, tmp_path):
    result = runner.invoke(cli, ["generate", "-o", str(tmp_path / "x"), "--block-size", "4", "--nnz-local", "5"])
    assert result.exit_code == 1
    assert "nnz per local row" in result.output


# -------------------- ANALYZE --------------------

def write_identity(path, d=3):
    save_matrix_market(path, SparseMatrix.from_dense(np.eye(d)))
    return path


def test_analyze_identity(runner, tmp_path):
    """Test the identity matrix on one node gives omega = sigma = beta = 1."""
    path = write_identity(tmp_path / "eye.mtx")
    result = runner.invoke(cli, ["analyze", "-m", str(path), "--tau", "2"])
    assert result.exit_code == 0, result.output
    lines = result.output.splitlines()
    for expected in ("omega=1", "omega_prime=1", "sigma=1.0", "sigma_prime=1.0", "beta=1.0"):
        assert expected in lines


def test_analyze_writes_report(runner, tmp_path):
    path = write_identity(tmp_path / "eye.mtx", d=4)
    report = tmp_path / "out" / "report.txt"
    table = tmp_path / "out" / "stepsize.csv"
    result = runner.invoke(
        cli, ["analyze", "-m", str(path), "-c", "2", "--report", str(report), "--report-csv", str(table)]
    )
    assert result.exit_code == 0, result.output
    values = read_manifest(report)
    assert values["c"] == "2"
    assert values["sigma_source"] == "exact_power_iteration"
    _, rows = read_trace(table)
    assert rows[0]["beta"] == "1.0"


def test_analyze_missing_file(runner, tmp_path):
    result = runner.invoke(cli, ["analyze", "-m", str(tmp_path / "nope.mtx")])
    assert result.exit_code != 0
    assert "nope.mtx" in result.output


def test_analyze_curve_csv(runner, tmp_path):
    """Test curve rows equal d * beta1 / (c * tau) at the requested grid."""
    path = write_identity(tmp_path / "eye.mtx")
    curve = tmp_path / "curve.csv"
    result = runner.invoke(
        cli,
        [
            "analyze", "-m", str(path), "--curve-csv", str(curve), "--curve-d", "100000",
            "--curve-nodes", "1,100", "--curve-tau", "10", "--curve-sigma", "1,10",
        ],
    )
    assert result.exit_code == 0, result.output
    comments, rows = read_trace(curve)
    assert comments["d"] == "100000"
    assert len(rows) == 4
    by_key = {(r["c"], r["sigma"]): r for r in rows}
    # c=1: s = 1e5, beta1 = 1 + 9 * 9 / 99999
    c1 = by_key[("1", "10.0")]
    assert float(c1["scaled_beta1"]) == pytest.approx(1e4 * (1 + 81 / 99999))
    # c=100: s = 1000, beta1 = 1 + 9 * 9 / 999
    c100 = by_key[("100", "10.0")]
    assert float(c100["scaled_beta1"]) == pytest.approx(100 * (1 + 81 / 999))
    assert float(by_key[("100", "1.0")]["scaled_beta1"]) == pytest.approx(100.0)


# -------------------- SOLVE --------------------

def test_solve_without_manifest_has_empty_gap(runner, instance, tmp_path):
    out = tmp_path / "trace.csv"
    result = runner.invoke(cli, solve_args(instance, "--iters", "20", "--eval-every", "5", "-o", str(out)))
    assert result.exit_code == 0, result.output
    comments, rows = read_trace(out)
    assert [r["iter"] for r in rows] == ["0", "5", "10", "15", "20"]
    assert all(r["gap"] == "" for r in rows)
    assert all(r["elapsed_s"] == "" for r in rows)
    assert comments["beta_source"] == "auto"
    assert comments["protocol"] == "ra"
    assert "L_star" not in comments


def test_solve_with_manifest_has_gap(runner, instance, tmp_path):
    out = tmp_path / "trace.csv"
    result = runner.invoke(
        cli, solve_args(instance, "--iters", "20", "--manifest", str(instance / "manifest.txt"), "-o", str(out))
    )
    assert result.exit_code == 0, result.output
    comments, rows = read_trace(out)
    assert "L_star" in comments
    L_star = float(comments["L_star"])
    for row in rows:
        assert float(row["gap"]) == pytest.approx(float(row["loss"]) - L_star)
    assert "gap=" in result.output


def test_solve_zero_iterations_writes_header_only(runner, instance, tmp_path):
    out = tmp_path / "trace.csv"
    result = runner.invoke(cli, solve_args(instance, "--iters", "0", "--beta", "2", "-o", str(out)))
    assert result.exit_code == 0, result.output
    lines = out.read_text(encoding="utf-8").splitlines()
    assert lines[-1] == "iter,loss,gap,msgs_sent,elapsed_s"
    assert all(line.startswith("# ") for line in lines[:-1])
    comments, rows = read_trace(out)
    assert rows == []
    assert comments["beta"] == "2.0"
    assert comments["beta_source"] == "user"


def test_solve_rerun_is_identical(runner, instance, tmp_path):
    """Test the same seed gives byte-identical traces."""
    for name in ("a.csv", "b.csv"):
        result = runner.invoke(cli, solve_args(instance, "--iters", "30", "--seed", "5", "-o", str(tmp_path / name)))
        assert result.exit_code == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_solve_seed_list(runner, instance, tmp_path):
    out = tmp_path / "trace.csv"
    result = runner.invoke(cli, solve_args(instance, "--iters", "10", "--seed-list", "1,2", "-o", str(out)))
    assert result.exit_code == 0, result.output
    first, second = tmp_path / "trace.csv.seed1", tmp_path / "trace.csv.seed2"
    assert first.is_file() and second.is_file()
    assert read_trace(first)[0]["seed"] == "1"
    assert read_trace(second)[0]["seed"] == "2"
    assert not out.exists()


@pytest.mark.parametrize("protocol", ["ra", "asl"])
def test_solve_threaded_fills_elapsed(runner, instance, tmp_path, protocol):
    out = tmp_path / "trace.csv"
    result = runner.invoke(
        cli,
        solve_args(
            instance, "--iters", "10", "--protocol", protocol, "--execution", "threaded",
            "--beta", "double-beta1", "-o", str(out),
        ),
    )
    assert result.exit_code == 0, result.output
    comments, rows = read_trace(out)
    assert comments["beta_source"] == "double-beta1"
    assert all(float(r["elapsed_s"]) >= 0.0 for r in rows)
    assert rows[-1]["msgs_sent"] == str(10 * (2 if protocol == "asl" else 2 * (2 - 1)))


def test_solve_config_file(runner, instance, tmp_path):
    """Test values from --config fill in options not given on the command line."""
    config = tmp_path / "hydra.env"
    config.write_text("ITERS=7\neval_every=7\nlam=0.5\n", encoding="utf-8")
    out = tmp_path / "trace.csv"
    args = ["--config", str(config), "solve", "-m", str(instance / "A.mtx"), "-y", str(instance / "y.txt"),
            "-c", "2", "--tau", "2", "-o", str(out)]
    result = runner.invoke(cli, args)
    assert result.exit_code == 0, result.output
    _, rows = read_trace(out)
    assert [r["iter"] for r in rows] == ["0", "7"]


def test_solve_flag_beats_config(runner, instance, tmp_path):
    config = tmp_path / "hydra.env"
    config.write_text("iters=7\n", encoding="utf-8")
    out = tmp_path / "trace.csv"
    result = runner.invoke(cli, ["--config", str(config), *solve_args(instance, "--iters", "4", "-o", str(out))])
    assert result.exit_code == 0, result.output
    assert read_trace(out)[1][-1]["iter"] == "4"


def test_solve_environment_variable(runner, instance, tmp_path):
    out = tmp_path / "trace.csv"
    result = runner.invoke(cli, solve_args(instance, "-o", str(out)), env={"HYDRA_SOLVE_ITERS": "3"})
    assert result.exit_code == 0, result.output
    assert [r["iter"] for r in read_trace(out)[1]] == ["0", "3"]


def test_solve_malformed_matrix(runner, tmp_path):
    """Test a bad entry is reported with its line number."""
    bad = tmp_path / "bad.mtx"
    bad.write_text("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n3 1 2.0\n", encoding="utf-8")
    labels = tmp_path / "y.txt"
    save_vector(labels, np.zeros(2))
    result = runner.invoke(cli, ["solve", "-m", str(bad), "-y", str(labels), "--lam", "1"])
    assert result.exit_code == 1
    assert "line 4" in result.output


def test_solve_requires_lam_for_l1(runner, instance):
    result = runner.invoke(cli, ["solve", "-m", str(instance / "A.mtx"), "-y", str(instance / "y.txt")])
    assert result.exit_code == 1
    assert "--lam" in result.output


def test_solve_divergence_exits_nonzero(runner, tmp_path):
    """Test beta = 1 on correlated columns trips the divergence guard and keeps the partial trace."""
    rng = np.random.default_rng(0)
    A = tmp_path / "ones.mtx"
    save_matrix_market(A, SparseMatrix.from_dense(np.ones((20, 16)) + 0.01 * rng.standard_normal((20, 16))))
    labels = tmp_path / "y.txt"
    save_vector(labels, rng.standard_normal(20))
    out = tmp_path / "trace.csv"
    result = runner.invoke(
        cli,
        ["solve", "-m", str(A), "-y", str(labels), "--reg", "zero", "--tau", "16", "--beta", "1",
         "--iters", "50", "--eval-every", "1", "-o", str(out)],
    )
    assert result.exit_code == 1
    assert "partial trace" in result.output
    _, rows = read_trace(out)
    assert len(rows) >= 2


def test_solve_box_excluding_zero(runner, tmp_path):
    """Test a box with lower bound 1 starts from the bound instead of reporting divergence."""
    A = write_identity(tmp_path / "eye.mtx", d=4)
    labels = tmp_path / "y.txt"
    save_vector(labels, np.full(4, 1.5))
    out = tmp_path / "trace.csv"
    result = runner.invoke(
        cli,
        ["solve", "-m", str(A), "-y", str(labels), "--reg", "box", "--box-lower", "1", "--box-upper", "2",
         "-c", "2", "--tau", "1", "--beta", "1", "--iters", "20", "--eval-every", "1", "-o", str(out)],
    )
    assert result.exit_code == 0, result.output
    _, rows = read_trace(out)
    assert len(rows) == 21
    assert rows[0]["loss"] == "0.5"
    assert all(np.isfinite(float(r["loss"])) for r in rows)
    assert float(rows[-1]["loss"]) < 0.5
