"""End-to-end checks of the command-line interface via subprocesses."""

import csv
import json
import math
import os
import subprocess
import sys

import pytest

from insider_lab.brownian import mix_seed

CLI = [sys.executable, "-m", "insider_lab"]


def run_cli(*argv, env_extra=None):
    env = dict(os.environ)
    if env_extra:
        env.update(env_extra)
    return subprocess.run([*CLI, *argv], capture_output=True, text=True, env=env)


def load_payload(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


class TestViability:
    def test_divergent_powerlaw_prints_not_viable(self):
        proc = run_cli("viability", "--schedule", "powerlaw:q=2", "--T", "1")
        assert proc.returncode == 0
        assert "NotViable" in proc.stdout
        assert "NotViableBelowHorizon" not in proc.stdout

    def test_square_root_schedule_is_viable(self, tmp_path):
        out = tmp_path / "via.json"
        proc = run_cli("viability", "--schedule", "powerlaw:q=0.5", "--T", "1",
                       "--output", str(out))
        assert proc.returncode == 0
        assert "-> Viable" in proc.stdout
        payload = load_payload(out)
        assert payload["classification"] == "Viable"
        assert payload["integral"] == pytest.approx(2.0)
        assert payload["method"] == "Analytic"

    def test_below_horizon_classification_and_truncated_integral(self, tmp_path):
        out = tmp_path / "via.json"
        proc = run_cli("viability", "--schedule", "affine_below:c=0.5",
                       "--T", "1", "--delta", "0.1", "--output", str(out))
        assert proc.returncode == 0
        assert "NotViableBelowHorizon" in proc.stdout
        payload = load_payload(out)
        # integral of 2/(1-t) from 0 to 0.9 is 2*ln(10)
        assert payload["truncated_integral"] == pytest.approx(2 * math.log(10), rel=1e-6)

    def test_csv_output_layout(self, tmp_path):
        out = tmp_path / "via.csv"
        proc = run_cli("viability", "--schedule", "const:1", "--T", "1",
                       "--output", str(out), "--format", "csv")
        assert proc.returncode == 0
        rows = list(csv.reader(out.open()))
        assert rows[0] == ["schedule", "horizon", "classification", "integral", "method"]
        assert rows[1][2] == "Viable"


class TestSimulate:
    def test_repeat_runs_identical_except_wall_time(self, tmp_path):
        args = ["simulate", "--schedule", "const:1", "--strategy", "merton",
                "--paths", "100", "--base-points", "512"]
        first, second = tmp_path / "a.json", tmp_path / "b.json"
        assert run_cli(*args, "--output", str(first)).returncode == 0
        assert run_cli(*args, "--output", str(second)).returncode == 0
        pa, pb = load_payload(first), load_payload(second)
        pa.pop("wall_time_s"), pb.pop("wall_time_s")
        assert pa == pb
        assert json.dumps(pa, sort_keys=True) == json.dumps(pb, sort_keys=True)

    def test_dumped_config_reproduces_the_run(self, tmp_path):
        cfg_file = tmp_path / "cfg.json"
        out1, out2 = tmp_path / "r1.json", tmp_path / "r2.json"
        proc = run_cli("simulate", "--schedule", "powerlaw:q=0.5",
                       "--delta", "1e-3", "--paths", "200",
                       "--base-points", "1024", "--dump-config", str(cfg_file),
                       "--output", str(out1))
        assert proc.returncode == 0
        proc = run_cli("simulate", "--config", str(cfg_file), "--output", str(out2))
        assert proc.returncode == 0
        pa, pb = load_payload(out1), load_payload(out2)
        pa.pop("wall_time_s"), pb.pop("wall_time_s")
        assert pa == pb

    def test_flags_override_config_file(self, tmp_path):
        cfg_file = tmp_path / "cfg.json"
        cfg_file.write_text(json.dumps({
            "schedule": {"kind": "const", "value": 1.0},
            "strategy": {"kind": "merton"},
            "n_paths": 1000,
            "base_points": 512,
        }))
        out = tmp_path / "r.json"
        proc = run_cli("simulate", "--config", str(cfg_file), "--paths", "400",
                       "--output", str(out))
        assert proc.returncode == 0
        payload = load_payload(out)
        assert payload["config"]["n_paths"] == 400
        assert payload["config"]["base_points"] == 512

    def test_thread_count_does_not_change_results(self, tmp_path):
        args = ["simulate", "--schedule", "const:1", "--paths", "400",
                "--base-points", "512"]
        one, two = tmp_path / "t1.json", tmp_path / "t2.json"
        assert run_cli(*args, "--threads", "1", "--output", str(one)).returncode == 0
        assert run_cli(*args, "--threads", "4", "--output", str(two)).returncode == 0
        pa, pb = load_payload(one), load_payload(two)
        pa.pop("wall_time_s"), pb.pop("wall_time_s")
        assert pa == pb

    def test_env_var_thread_fallback(self, tmp_path):
        args = ["simulate", "--schedule", "const:1", "--paths", "400",
                "--base-points", "512"]
        one, two = tmp_path / "e1.json", tmp_path / "e2.json"
        assert run_cli(*args, "--threads", "1",
                       "--output", str(one)).returncode == 0
        assert run_cli(*args, "--output", str(two),
                       env_extra={"INSIDER_LAB_THREADS": "2"}).returncode == 0
        pa, pb = load_payload(one), load_payload(two)
        pa.pop("wall_time_s"), pb.pop("wall_time_s")
        assert pa == pb

    def test_debug_dumps_and_csv_output(self, tmp_path):
        path_csv = tmp_path / "path.csv"
        wealth_csv = tmp_path / "wealth.csv"
        out = tmp_path / "r.csv"
        proc = run_cli("simulate", "--schedule", "const:1", "--paths", "200",
                       "--base-points", "256", "--dump-path", str(path_csv),
                       "--dump-wealth", str(wealth_csv),
                       "--output", str(out), "--format", "csv")
        assert proc.returncode == 0
        assert path_csv.read_text().splitlines()[0] == "t,B"
        assert wealth_csv.read_text().splitlines()[0] == "t,pi,log_wealth"
        rows = list(csv.reader(out.open()))
        assert rows[0][:3] == ["config_digest", "mean", "stderr"]
        assert len(rows) == 2


class TestCompareAndSweep:
    def test_compare_constant_window_passes(self, tmp_path):
        out = tmp_path / "cmp.json"
        proc = run_cli("compare", "--schedule", "const:1", "--paths", "4000",
                       "--base-points", "512", "--strict", "--output", str(out))
        assert proc.returncode == 0
        assert proc.stdout.startswith("Pass")
        payload = load_payload(out)
        assert payload["report"]["theory"] == pytest.approx(0.625)
        assert payload["report"]["verdict"] == "Pass"
        assert payload["config_digest"] == payload["config_digest"].lower()
        assert len(payload["config_digest"]) == 16

    def test_sweep_reciprocal_window_csv(self, tmp_path):
        out = tmp_path / "sweep.csv"
        proc = run_cli("sweep", "--schedule", "powerlaw:q=1", "--alpha", "0",
                       "--paths", "4000", "--base-points", "2048",
                       "--deltas", "1e-1,1e-2", "--abs-tol", "0.05",
                       "--strict", "--output", str(out), "--format", "csv")
        assert proc.returncode == 0
        assert "2/2 Pass" in proc.stdout
        rows = list(csv.reader(out.open()))
        assert rows[0] == ["delta", "theory", "mc_mean", "mc_stderr", "z", "verdict"]
        assert len(rows) == 3
        assert float(rows[1][1]) == pytest.approx(0.5 * math.log(10))
        assert float(rows[2][1]) == pytest.approx(math.log(10))


class TestDiagnostics:
    def test_duality_constant_lookahead(self, tmp_path):
        out = tmp_path / "du.json"
        proc = run_cli("duality", "--kind", "constant_lookahead", "--eps", "0.5",
                       "--paths", "4000", "--base-points", "1024",
                       "--strict", "--output", str(out))
        assert proc.returncode == 0
        payload = load_payload(out)
        assert payload["analytic"] == pytest.approx(1.0)
        assert payload["verdict"] == "Pass"

    def test_duality_requires_eps_for_lookahead_kind(self):
        proc = run_cli("duality", "--kind", "constant_lookahead", "--paths", "400",
                       "--base-points", "512")
        assert proc.returncode == 1
        assert "eps" in proc.stderr

    def test_donsker_table_rows_satisfy_ratio_identity(self, tmp_path):
        out = tmp_path / "table.csv"
        proc = run_cli("donsker-table", "--eps1", "0.25", "--eps2", "1.0",
                       "--points", "5", "--output", str(out), "--format", "csv")
        assert proc.returncode == 0
        rows = list(csv.reader(out.open()))
        assert rows[0] == ["y1", "y2", "density", "derivative", "ratio"]
        assert len(rows) == 26
        for row in rows[1:]:
            density, deriv, ratio = map(float, row[2:])
            assert density >= 0.0
            assert deriv == pytest.approx(density * ratio, abs=1e-15)

    def test_drift_check_passes_on_both_sides_of_the_window(self, tmp_path):
        out = tmp_path / "drift.json"
        proc = run_cli("drift-check", "--ratios", "0.5,1,2", "--paths", "20000",
                       "--strict", "--output", str(out))
        assert proc.returncode == 0
        # the boundary ratio 1 is checked from both sides, so 3 ratios
        # produce 4 rows
        assert "4/4 Pass" in proc.stdout
        rows = load_payload(out)["rows"]
        kinds = [r["kind"] for r in rows]
        assert kinds == ["bridge", "bridge", "martingale", "martingale"]
        assert rows[1]["slope"] == 1.0 and rows[1]["stderr"] == 0.0
        assert rows[2]["slope"] == 1.0 and rows[2]["stderr"] == 0.0
        assert rows[3]["expected"] == 1.0

    def test_refine_reports_levels_and_gap_ratios(self, tmp_path):
        out = tmp_path / "refine.json"
        proc = run_cli("refine", "--schedule", "powerlaw:q=0.5",
                       "--delta", "1e-3", "--paths", "2000",
                       "--base-points", "512", "--levels", "2", "--factor", "2",
                       "--output", str(out))
        assert proc.returncode == 0
        payload = load_payload(out)
        assert [r["base_points"] for r in payload["levels"]] == [512, 1024]
        assert len(payload["gap_ratios"]) == 1
        assert payload["theory"] == pytest.approx(1.0932522233983162)
        assert payload["verdict"] == "Pass"


class TestExitCodes:
    def test_unknown_config_key_is_an_error(self, tmp_path):
        cfg_file = tmp_path / "bad.json"
        cfg_file.write_text(json.dumps({
            "schedule": {"kind": "const", "value": 1.0},
            "bogus_key": 3,
        }))
        proc = run_cli("simulate", "--config", str(cfg_file))
        assert proc.returncode == 1
        assert "bogus_key" in proc.stderr

    def test_missing_schedule_is_an_error(self):
        proc = run_cli("simulate", "--paths", "200", "--base-points", "256")
        assert proc.returncode == 1
        assert "schedule" in proc.stderr

    def test_unknown_schedule_kind_is_an_error(self):
        proc = run_cli("simulate", "--schedule", "nope:1")
        assert proc.returncode == 1
        assert "unknown schedule kind" in proc.stderr

    def test_divergent_horizon_comparison_is_an_error(self):
        proc = run_cli("compare", "--schedule", "powerlaw:q=1", "--delta", "0",
                       "--paths", "200", "--base-points", "256")
        assert proc.returncode == 1
        assert "diverges" in proc.stderr

    def test_exploding_path_reports_its_seed_with_exit_2(self, tmp_path):
        profile = tmp_path / "profile.csv"
        profile.write_text("t,pi\n0.0,nan\n1.0,nan\n")
        proc = run_cli("simulate", "--schedule", "const:1", "--strategy",
                       f"table:@{profile}", "--paths", "200",
                       "--base-points", "256")
        assert proc.returncode == 2
        assert str(mix_seed(42, 0)) in proc.stderr

    def test_strict_verdict_failure_exits_3(self):
        # seed 24 lands the honest estimate four standard errors low, and
        # the tiny abs tolerance removes the rescue floor
        args = ["compare", "--schedule", "const:1", "--strategy", "merton",
                "--paths", "400", "--base-points", "256", "--seed", "24",
                "--no-antithetic", "--abs-tol", "1e-9"]
        assert run_cli(*args, "--strict").returncode == 3
        assert run_cli(*args).returncode == 0

    def test_bad_thread_env_var_is_an_error(self):
        proc = run_cli("simulate", "--schedule", "const:1", "--paths", "200",
                       "--base-points", "256",
                       env_extra={"INSIDER_LAB_THREADS": "abc"})
        assert proc.returncode == 1
        assert "INSIDER_LAB_THREADS" in proc.stderr

    def test_help_exits_cleanly(self):
        proc = run_cli("--help")
        assert proc.returncode == 0
        assert "viability" in proc.stdout
