"""Command line front end: files written, exit codes, determinism."""

import json

import numpy as np
import pytest

from psisplit import cli
from psisplit.limit_solver import LimitCurve


def run_cli(*argv):
    return cli.main(list(argv))


class TestBasics:
    def test_version(self, capsys):
        with pytest.raises(SystemExit) as exc:
            run_cli("--version")
        assert exc.value.code == 0
        assert "psisplit" in capsys.readouterr().out

    def test_no_command_exits_nonzero(self):
        with pytest.raises(SystemExit):
            run_cli()

    def test_unknown_rule_is_reported(self, capsys):
        assert run_cli("solve", "--psi", "bogus") == 2
        assert "bogus" in capsys.readouterr().err

    def test_thresholds(self, capsys):
        assert run_cli("thresholds") == 0
        out = capsys.readouterr().out
        assert "0.61" in out
        assert "cubic_root" in out and "exp_third" in out


class TestSolve:
    def test_writes_loadable_curve(self, tmp_path, capsys):
        rc = run_cli("solve", "--psi", "max2", "--out", str(tmp_path),
                     "--prefix", "m2")
        assert rc == 0
        out = capsys.readouterr().out
        assert "lambda" in out
        curve = LimitCurve.from_csv(tmp_path / "m2_curve.csv")
        assert curve.spec.weights == {2: 1.0}
        assert curve.lam == pytest.approx(0.5965696978, abs=1e-9)

    def test_deterministic_output(self, tmp_path):
        for d in ("a", "b"):
            run_cli("solve", "--psi", "uniform", "--out", str(tmp_path / d),
                    "--prefix", "u")
        assert (tmp_path / "a" / "u_curve.csv").read_bytes() == \
               (tmp_path / "b" / "u_curve.csv").read_bytes()


class TestCheck:
    def test_pass_rule(self, tmp_path, capsys):
        rc = run_cli("check", "--psi", "max2", "--out", str(tmp_path),
                     "--prefix", "m2")
        assert rc == 0
        assert "verdict: PASS" in capsys.readouterr().out
        report = json.loads((tmp_path / "m2_report.json").read_text())
        assert report["verdict"] == "PASS"
        assert report["R_star"] == pytest.approx(1.0, abs=1e-3)

    def test_fail_rule_exit_code(self, tmp_path, capsys):
        rc = run_cli("check", "--psi", "max3", "--out", str(tmp_path),
                     "--prefix", "m3")
        assert rc == 3
        assert "verdict: FAIL" in capsys.readouterr().out
        report = json.loads((tmp_path / "m3_report.json").read_text())
        assert report["verdict"] == "FAIL"
        assert report["R_zero"] == 3.0


class TestSimulate:
    def test_stats_file(self, tmp_path):
        rc = run_cli("simulate", "--rule", "max2", "--steps", "2000",
                     "--seed", "3", "--replicas", "2", "--out", str(tmp_path),
                     "--prefix", "s")
        assert rc == 0
        rows = (tmp_path / "s_stats.csv").read_text().strip().splitlines()
        header = rows[0].split(",")
        assert header == ["replica", "n", "t_n", "alpha", "N_alpha",
                          "N_alpha_over_n", "n_intervals", "largest_gap",
                          "n_largest_gap"]
        last = rows[-1].split(",")
        assert int(last[0]) == 1                      # second replica
        assert int(last[1]) == 2000                   # final checkpoint
        assert float(last[5]) == pytest.approx(0.75, abs=0.1)
        manifest = json.loads((tmp_path / "s_manifest.json").read_text())
        assert manifest["rule"] == "max2"
        assert manifest["seed"] == 3
        assert manifest["files"] == {"stats": "s_stats.csv"}
        assert manifest["backend"] in ("compiled", "pure")

    def test_rerun_is_byte_identical(self, tmp_path):
        args = ("simulate", "--rule", "mix-60-40", "--steps", "1500",
                "--seed", "11", "--replicas", "1", "--ecdf", "--poisson-time",
                "--prefix", "r")
        run_cli(*args, "--out", str(tmp_path / "x"))
        run_cli(*args, "--out", str(tmp_path / "y"))
        for name in ("r_stats.csv", "r_ecdf.csv", "r_manifest.json"):
            assert (tmp_path / "x" / name).read_bytes() == \
                   (tmp_path / "y" / name).read_bytes(), name

    def test_poisson_time_column(self, tmp_path):
        run_cli("simulate", "--rule", "uniform", "--steps", "100", "--seed",
                "1", "--poisson-time", "--out", str(tmp_path), "--prefix", "t")
        rows = (tmp_path / "t_stats.csv").read_text().strip().splitlines()
        t_n = [r.split(",")[2] for r in rows[1:]]
        assert all(v and float(v) > 0 for v in t_n)

    def test_kakutani_rule(self, tmp_path):
        rc = run_cli("simulate", "--rule", "kakutani", "--steps", "3000",
                     "--seed", "5", "--out", str(tmp_path), "--prefix", "k")
        assert rc == 0
        rows = (tmp_path / "k_stats.csv").read_text().strip().splitlines()
        last = rows[-1].split(",")
        assert float(last[8]) == pytest.approx(2.0, abs=0.3)

    def test_direct_rule_and_custom_alphas(self, tmp_path):
        rc = run_cli("simulate", "--rule", "direct-max2", "--steps", "500",
                     "--seed", "2", "--alphas", "0.5", "--out", str(tmp_path),
                     "--prefix", "d")
        assert rc == 0
        manifest = json.loads((tmp_path / "d_manifest.json").read_text())
        assert manifest["rule"] == "direct-max2"
        assert manifest["alphas"] == [0.5]

    def test_bad_steps_rejected(self, capsys):
        assert run_cli("simulate", "--rule", "max2", "--steps", "0") == 2
        assert capsys.readouterr().err


class TestScan:
    def test_range_params(self, tmp_path):
        rc = run_cli("scan", "--family", "two-term", "--params", "0.5:0.7:3",
                     "--out", str(tmp_path), "--prefix", "sc")
        assert rc == 0
        rows = (tmp_path / "sc_scan.csv").read_text().strip().splitlines()
        assert rows[0] == "param,lambda,R_star,delta_max,verdict,error"
        assert len(rows) == 4
        params = [float(r.split(",")[0]) for r in rows[1:]]
        assert params == pytest.approx([0.5, 0.6, 0.7])
        assert all(r.split(",")[4] == "PASS" for r in rows[1:])

    def test_list_params_and_max_order_family(self, tmp_path):
        rc = run_cli("scan", "--family", "max-order", "--params", "2,3",
                     "--out", str(tmp_path), "--prefix", "mo")
        assert rc == 0
        rows = (tmp_path / "mo_scan.csv").read_text().strip().splitlines()
        verdicts = [r.split(",")[4] for r in rows[1:]]
        assert verdicts == ["PASS", "FAIL"]


class TestCompare:
    def test_distance_columns(self, tmp_path):
        rc = run_cli("compare", "--rule", "max2", "--steps", "20000",
                     "--seed", "4", "--replicas", "1", "--out", str(tmp_path),
                     "--prefix", "c")
        assert rc == 0
        rows = (tmp_path / "c_compare.csv").read_text().strip().splitlines()
        assert rows[0] == "replica,n,alpha,N_alpha_over_n,distance"
        dist = [float(r.split(",")[4]) for r in rows[1:]]
        assert all(0 <= d < 0.1 for d in dist), \
            "empirical curves should already sit near the limit at n=2e4"

    def test_kakutani_has_no_limit_curve(self, capsys):
        assert run_cli("compare", "--rule", "kakutani", "--steps", "100") == 2
        assert "limit curve" in capsys.readouterr().err.lower()
