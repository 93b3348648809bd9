"""CLI surface: JSON outputs, exit codes, file formats."""

import json
import struct

import numpy as np
import pytest

from bregann.cli import main

DOMAIN = '{"lo":[0.1,0.1],"hi":[0.9,0.9]}'


@pytest.fixture(scope="module")
def data_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "pts.csv"
    rng = np.random.default_rng(0)
    P = rng.uniform(0.1, 0.9, (120, 2))
    lines = ["x,y"] + [f"{a},{b}" for a, b in P]
    path.write_text("\n".join(lines))
    return str(path), P


@pytest.fixture(scope="module")
def index_file(tmp_path_factory, data_csv, capfd_factory=None):
    path = tmp_path_factory.mktemp("idx") / "pts.bann"
    csv_path, _ = data_csv
    rc = main(["build", csv_path, str(path), "--divergence", "kl",
               "--symmetrized", "--sqrt", "--domain", DOMAIN,
               "--seed", "3", "--samples", "2000"])
    assert rc == 0
    return str(path)


def run_json(capsys, argv):
    rc = main(argv)
    out = capsys.readouterr().out
    return rc, json.loads(out) if out.strip() else None


class TestBuild:
    def test_summary_fields(self, capsys, data_csv, tmp_path):
        csv_path, P = data_csv
        rc, summary = run_json(capsys, [
            "build", csv_path, str(tmp_path / "a.bann"), "--divergence", "kl",
            "--symmetrized", "--sqrt", "--domain", DOMAIN, "--seed", "1",
            "--samples", "2000",
        ])
        assert rc == 0
        assert summary["n"] == 120 and summary["d"] == 2
        assert 1.17 <= summary["mu"] <= 1.27
        assert summary["c0"] == pytest.approx(3.0, abs=1e-6)
        assert summary["bytes"] > 0

    def test_binary_input(self, capsys, tmp_path):
        rng = np.random.default_rng(1)
        P = rng.uniform(0.1, 0.9, (40, 2))
        path = tmp_path / "pts.bin"
        path.write_bytes(struct.pack("<II", 40, 2) + P.astype("<f8").tobytes())
        rc, summary = run_json(capsys, [
            "build", str(path), str(tmp_path / "b.bann"), "--divergence", "kl",
            "--sqrt", "--domain", DOMAIN, "--samples", "2000",
        ])
        assert rc == 0
        assert summary["n"] == 40

    def test_domain_violation_exit_3(self, capsys, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("0.5,0.5\n0.95,0.5\n")
        rc = main(["build", str(path), str(tmp_path / "c.bann"),
                   "--divergence", "kl", "--sqrt", "--domain", DOMAIN,
                   "--no-header", "--samples", "2000"])
        assert rc == 3
        err = capsys.readouterr().err
        assert "rows=[1]" in err

    def test_parse_error_exit_2(self, capsys, tmp_path):
        path = tmp_path / "garbage.csv"
        path.write_text("0.5,0.5\nfoo,bar\n")
        rc = main(["build", str(path), str(tmp_path / "d.bann"),
                   "--divergence", "kl", "--sqrt", "--domain", DOMAIN,
                   "--no-header"])
        assert rc == 2

    def test_missing_file_exit_4(self, tmp_path):
        rc = main(["build", str(tmp_path / "nope.csv"), str(tmp_path / "e.bann"),
                   "--divergence", "kl", "--sqrt", "--domain", DOMAIN])
        assert rc == 4


class TestQuery:
    def test_data_point_distance_zero(self, capsys, index_file, data_csv):
        _, P = data_csv
        q = f"{P[7][0]},{P[7][1]}"
        rc, answers = run_json(capsys, ["query", index_file, "--query", q,
                                        "--eps", "0.1"])
        assert rc == 0
        assert answers[0]["distance"] == 0.0

    def test_verify_ratios(self, capsys, index_file, tmp_path):
        rng = np.random.default_rng(2)
        Q = rng.uniform(0.1, 0.9, (25, 2))
        qpath = tmp_path / "q.csv"
        qpath.write_text("\n".join(f"{a},{b}" for a, b in Q))
        rc, answers = run_json(capsys, [
            "query", index_file, "--queries", str(qpath), "--no-header",
            "--eps", "0.25", "--verify", "--stats",
        ])
        assert rc == 0
        assert len(answers) == 25
        for ans in answers:
            assert ans["ratio"] <= 1.25 + 1e-12
            assert ans["stats"]["strategy"] == "fast"

    def test_out_of_domain_query_inline_null(self, capsys, index_file):
        rc, answers = run_json(capsys, ["query", index_file, "--query", "5,5"])
        assert rc == 0
        assert answers[0]["id"] is None
        assert "error" in answers[0]

    def test_eps_above_one_clamped_with_warning(self, capsys, index_file):
        import warnings

        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            rc, answers = run_json(capsys, ["query", index_file,
                                            "--query", "0.5,0.5", "--eps", "2"])
        assert rc == 0
        assert answers[0]["id"] is not None


class TestEstimate:
    def test_kl_values(self, capsys):
        rc, out = run_json(capsys, [
            "estimate", "--divergence", "kl", "--symmetrized", "--sqrt",
            "--domain", '{"lo":[0.1],"hi":[0.9]}', "--samples", "5000",
        ])
        assert rc == 0
        assert 1.17 <= out["mu"] <= 1.27
        assert out["c0"] == pytest.approx(3.0, abs=1e-6)

    def test_wider_kl(self, capsys):
        rc, out = run_json(capsys, [
            "estimate", "--divergence", "kl", "--symmetrized", "--sqrt",
            "--domain", '{"lo":[0.01],"hi":[0.99]}', "--samples", "5000",
        ])
        assert rc == 0
        assert 2.37 <= out["mu"] <= 2.47

    def test_sqeuclidean_trivial(self, capsys):
        rc, out = run_json(capsys, [
            "estimate", "--divergence", "sqeuclidean", "--sqrt",
            "--domain", '{"lo":[0],"hi":[1]}', "--samples", "2000",
        ])
        assert rc == 0
        assert out["mu"] == pytest.approx(1.0, abs=1e-6)
        assert out["c0"] == 1.0

    def test_env_seed_fallback(self, capsys, monkeypatch):
        monkeypatch.setenv("BANN_SEED", "17")
        rc, out = run_json(capsys, [
            "estimate", "--divergence", "sqeuclidean", "--sqrt",
            "--domain", '{"lo":[0],"hi":[1]}', "--samples", "2000",
        ])
        assert rc == 0
        assert out["seed"] == 17


class TestBench:
    def test_table_and_monotone_eps(self, capsys, index_file):
        rc, out = run_json(capsys, [
            "bench", index_file, "--queries", "40", "--eps", "1.0,0.1",
            "--strategy", "fast", "--seed", "0",
        ])
        assert rc == 0
        rows = {row["eps"]: row for row in out["table"]}
        assert rows[1.0]["cells_expanded_mean"] <= rows[0.1]["cells_expanded_mean"]

    def test_empty_batch(self, capsys, index_file):
        rc, out = run_json(capsys, ["bench", index_file, "--queries", "0"])
        assert rc == 0
        assert out["table"] == []

    def test_size_sweep_reports_slope(self, capsys, index_file):
        rc, out = run_json(capsys, [
            "bench", index_file, "--queries", "20", "--eps", "0.25",
            "--strategy", "fast", "--sizes", "30,60,120", "--seed", "1",
        ])
        assert rc == 0
        assert "slope_cells_vs_log2n" in out
        assert len(out["sweep"]) == 3
