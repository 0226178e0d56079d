"""Command-line front end: parsing, artifacts, exit codes, determinism.

Everything runs in-process through cli.main, which returns the exit
code instead of raising SystemExit.  Monte Carlo configs are kept to a
couple thousand paths so the whole module stays in seconds.
"""

import json
import os

import numpy as np
import pytest

from fpduality import cli

D1_PROCESS = {
    "d": 1, "diffusion": 1.0, "drift_strength": 1.0, "drift_sign": 1,
    "target_radius": 0.0, "start_radius": 1.0,
}
D2_PROCESS = {
    "d": 2, "diffusion": 1.0, "drift_strength": 4.0, "drift_sign": 1,
    "target_radius": 1.0, "start_radius": 2.0,
}


def write_config(path, **sections):
    path.write_text(json.dumps(sections))
    return str(path)


def read_bytes(out_dir, name):
    with open(os.path.join(out_dir, name), "rb") as fh:
        return fh.read()


@pytest.fixture(scope="module")
def verify_run(tmp_path_factory):
    """One small end-to-end verify with both Monte Carlo checks."""
    base = tmp_path_factory.mktemp("verify")
    cfg = write_config(
        base / "config.json",
        process=D1_PROCESS,
        simulation={"n_paths": 2000, "dt": 1e-3, "t_max": 200.0,
                    "r_escape": 12.0, "seed": 20260825},
        checks=["distribution", "mean"],
        mean_engine="simulate",
    )
    out = str(base / "run")
    code = cli.main(["verify", "--config", cfg, "--out", out])
    return cfg, out, code


class TestValidate:
    def test_empty_config_uses_documented_defaults(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "c.json")
        assert cli.main(["validate", "--config", cfg]) == 0
        out = capsys.readouterr().out
        assert "config ok" in out
        assert "d=1" in out

    def test_unknown_field_is_a_config_error(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "c.json", process={"flux": 2.0})
        assert cli.main(["validate", "--config", cfg]) == 2
        assert "process.flux: unknown field" in capsys.readouterr().err

    def test_all_violations_reported_at_once(self, tmp_path, capsys):
        cfg = write_config(
            tmp_path / "c.json",
            process=dict(D2_PROCESS, start_radius=0.5, diffusion=-1.0),
        )
        assert cli.main(["validate", "--config", cfg]) == 2
        err = capsys.readouterr().err
        assert "start_radius" in err
        assert "diffusion" in err
        assert err.count("config error:") >= 2

    def test_malformed_json(self, tmp_path, capsys):
        path = tmp_path / "c.json"
        path.write_text("{not json")
        assert cli.main(["validate", "--config", str(path)]) == 2
        assert "not valid JSON" in capsys.readouterr().err

    def test_unknown_check_name(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "c.json", checks=["ks"])
        assert cli.main(["validate", "--config", cfg]) == 2
        assert "unknown check 'ks'" in capsys.readouterr().err

    def test_bad_engine_and_mode(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "c.json", check_mode="hope", mean_engine="guess")
        assert cli.main(["validate", "--config", cfg]) == 2
        err = capsys.readouterr().err
        assert "check_mode" in err and "mean_engine" in err

    def test_type_coercion(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "c.json", simulation={"n_paths": 10.5})
        assert cli.main(["validate", "--config", cfg]) == 2
        assert "expected int" in capsys.readouterr().err

    def test_checks_echoed(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "c.json", process=D2_PROCESS, checks=["mean"])
        assert cli.main(["validate", "--config", cfg]) == 0
        assert "checks: mean" in capsys.readouterr().out

    def test_bad_threads(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "c.json")
        assert cli.main(["validate", "--config", cfg, "--threads", "0"]) == 2
        assert "--threads" in capsys.readouterr().err


class TestSimulateVerb:
    def test_artifacts_and_determinism(self, tmp_path, capsys):
        cfg = write_config(
            tmp_path / "c.json",
            process=D1_PROCESS,
            simulation={"n_paths": 400, "dt": 1e-3, "t_max": 50.0,
                        "r_escape": 10.0, "seed": 11},
        )
        out1, out2 = str(tmp_path / "a"), str(tmp_path / "b")
        assert cli.main(["simulate", "--config", cfg, "--out", out1]) == 0
        assert "hit fraction" in capsys.readouterr().out
        lines = read_bytes(out1, "ensemble.csv").decode().splitlines()
        assert lines[0] == "path_index,outcome,tau"
        assert len(lines) == 401
        labels = set()
        for line in lines[1:]:
            idx, outcome, tau = line.split(",")
            labels.add(outcome)
            if outcome == "hit":
                assert float(tau) > 0.0
            else:
                assert tau == ""
        assert labels <= {"hit", "censored_time", "censored_escape"}
        assert "hit" in labels
        resolved = json.loads(read_bytes(out1, "resolved_config.json"))
        assert resolved["derived"] == {"seed": 11, "r_escape": 10.0}

        assert cli.main(["simulate", "--config", cfg, "--out", out2]) == 0
        assert read_bytes(out1, "ensemble.csv") == read_bytes(out2, "ensemble.csv")

    def test_output_path_collision(self, tmp_path):
        cfg = write_config(
            tmp_path / "c.json",
            process=D1_PROCESS,
            simulation={"n_paths": 10, "dt": 1e-2, "t_max": 1.0,
                        "r_escape": 8.0, "seed": 1},
        )
        blocker = tmp_path / "occupied"
        blocker.write_text("a file, not a directory")
        assert cli.main(["simulate", "--config", cfg, "--out", str(blocker)]) == 3


class TestSolveVerb:
    def test_writes_all_three_fields(self, tmp_path, capsys):
        cfg = write_config(
            tmp_path / "c.json",
            process=D2_PROCESS,
            grid={"r_max": 10.0, "n_cells": 128, "dt": 0.01, "t_end": 0.5},
        )
        out = str(tmp_path / "out")
        assert cli.main(["solve", "--config", cfg, "--out", out]) == 0
        assert "wrote" in capsys.readouterr().out
        names = sorted(os.listdir(out))
        assert names == [
            "field_hitting_0.csv",
            "field_mean_0.csv",
            "field_survival_0.5.csv",
            "resolved_config.json",
        ]
        rows = read_bytes(out, "field_hitting_0.csv").decode().splitlines()
        assert rows[0] == "r,value"
        first_r, first_v = rows[1].split(",")
        assert float(first_r) == 1.0 and float(first_v) == 1.0

    def test_infinite_regime_skips_mean(self, tmp_path, capsys):
        cfg = write_config(
            tmp_path / "c.json",
            process=dict(D2_PROCESS, drift_strength=1.0),
            grid={"r_max": 10.0, "n_cells": 64, "dt": 0.01, "t_end": 0.2},
        )
        out = str(tmp_path / "out")
        assert cli.main(["solve", "--config", cfg, "--out", out]) == 0
        assert "diverges" in capsys.readouterr().out
        assert "field_mean_0.csv" not in os.listdir(out)

    def test_unclosable_mean_is_reported_not_fatal(self, tmp_path, capsys):
        # d=5 conditioned mean is finite, but no closed form exists for the
        # far boundary and the extrapolation row refuses to fake one
        cfg = write_config(
            tmp_path / "c.json",
            process={"d": 5, "diffusion": 1.0, "drift_strength": 1.0,
                     "drift_sign": 1, "target_radius": 1.0, "start_radius": 2.0},
            grid={"r_max": 9.0, "n_cells": 128, "dt": 0.01, "t_end": 0.2},
        )
        out = str(tmp_path / "out")
        assert cli.main(["solve", "--config", cfg, "--out", out]) == 0
        assert "mean field skipped" in capsys.readouterr().out
        assert "field_hitting_0.csv" in os.listdir(out)

    def test_misaligned_t_end(self, tmp_path, capsys):
        cfg = write_config(
            tmp_path / "c.json",
            process=D2_PROCESS,
            grid={"r_max": 10.0, "n_cells": 64, "dt": 0.01, "t_end": 0.015},
        )
        assert cli.main(["solve", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
        assert "grid.t_end" in capsys.readouterr().err


class TestVerifyVerb:
    def test_end_to_end_passes(self, verify_run):
        _, out, code = verify_run
        assert code == 0
        report = json.loads(read_bytes(out, "report.json"))
        assert report["schema"] == "fpduality-report-v1"
        assert report["pass_flags"] == {"distribution": "PASS", "mean": "PASS"}
        # frozen run (seed 20260825): KS statistic 0.0255526
        assert report["ks_statistic"] == pytest.approx(0.0255526, abs=1e-6)
        assert report["ks_drift_matched"] is True
        resolved = json.loads(read_bytes(out, "resolved_config.json"))
        # per-sign streams derived from the base seed, frozen in test_rng
        assert resolved["derived"]["seed_plus"] == 13313840597386020326
        assert resolved["derived"]["seed_minus"] == 6041096824302721404

    def test_summary_table_printed(self, verify_run, tmp_path, capsys):
        cfg, _, _ = verify_run
        out = str(tmp_path / "again")
        assert cli.main(["verify", "--config", cfg, "--out", out]) == 0
        text = capsys.readouterr().out
        assert "CHECK" in text and "VERDICT" in text
        assert text.count("PASS") == 2

    def test_rerun_is_byte_identical(self, verify_run, tmp_path):
        cfg, out, _ = verify_run
        out2 = str(tmp_path / "rerun")
        assert cli.main(["verify", "--config", cfg, "--out", out2]) == 0
        for name in ("ensemble_plus.csv", "ensemble_minus.csv",
                     "report.json", "resolved_config.json"):
            assert read_bytes(out, name) == read_bytes(out2, name), name

    def test_seed_override_changes_streams(self, verify_run, tmp_path):
        cfg, out, _ = verify_run
        out2 = str(tmp_path / "override")
        assert cli.main(
            ["verify", "--config", cfg, "--out", out2, "--seed-override", "7"]
        ) == 0
        assert read_bytes(out, "ensemble_plus.csv") != read_bytes(out2, "ensemble_plus.csv")
        resolved = json.loads(read_bytes(out2, "resolved_config.json"))
        assert resolved["simulation"]["seed"] == 7

    def test_thread_count_cannot_change_output(self, verify_run, tmp_path):
        import numba

        cfg, out, _ = verify_run
        try:
            out1 = str(tmp_path / "t1")
            assert cli.main(
                ["verify", "--config", cfg, "--out", out1, "--threads", "1"]
            ) == 0
            assert read_bytes(out, "ensemble_plus.csv") == read_bytes(out1, "ensemble_plus.csv")
            assert read_bytes(out, "report.json") == read_bytes(out1, "report.json")
        finally:
            numba.set_num_threads(numba.config.NUMBA_NUM_THREADS)

    def test_expect_fail_inverts_the_gate(self, tmp_path):
        broken = write_config(
            tmp_path / "broken.json",
            process={"d": 3, "diffusion": 1.0, "drift_strength": 1.0,
                     "drift_sign": 1, "target_radius": 1.0, "start_radius": 2.0},
            checks=["theorem1"],
            theorem1={"levels": 2, "perturb_drift": True},
            check_mode="expect-fail",
        )
        out = str(tmp_path / "neg")
        assert cli.main(["verify", "--config", broken, "--out", out]) == 0
        report = json.loads(read_bytes(out, "report.json"))
        assert report["pass_flags"] == {"theorem1": "FAIL"}

    def test_failing_run_still_writes_evidence(self, tmp_path):
        broken = write_config(
            tmp_path / "broken.json",
            process={"d": 3, "diffusion": 1.0, "drift_strength": 1.0,
                     "drift_sign": 1, "target_radius": 1.0, "start_radius": 2.0},
            checks=["theorem1"],
            theorem1={"levels": 2, "perturb_drift": True},
        )
        out = str(tmp_path / "fail")
        assert cli.main(["verify", "--config", broken, "--out", out]) == 1
        report = json.loads(read_bytes(out, "report.json"))
        assert report["pass_flags"]["theorem1"] == "FAIL"

    def test_theorem1_wiring_with_defaults(self, tmp_path):
        cfg = write_config(
            tmp_path / "c.json",
            process={"d": 3, "diffusion": 1.0, "drift_strength": 1.0,
                     "drift_sign": 1, "target_radius": 1.0, "start_radius": 2.0},
            checks=["theorem1"],
            theorem1={"levels": 2},
        )
        out = str(tmp_path / "out")
        assert cli.main(["verify", "--config", cfg, "--out", out]) == 0
        report = json.loads(read_bytes(out, "report.json"))
        assert len(report["theorem1_ratios"]) == 1
        assert 3.85 < report["theorem1_ratios"][0] < 4.1

    def test_proposition_wiring_with_defaults(self, tmp_path):
        cfg = write_config(
            tmp_path / "c.json",
            process=dict(D1_PROCESS, drift_sign=-1),
            checks=["proposition"],
        )
        out = str(tmp_path / "out")
        assert cli.main(["verify", "--config", cfg, "--out", out]) == 0
        report = json.loads(read_bytes(out, "report.json"))
        assert report["pass_flags"]["proposition"] == "PASS"
        assert report["proposition_mode"] == "stationary"

    def test_infinite_regime_mean(self, tmp_path, capsys):
        cfg = write_config(
            tmp_path / "c.json",
            process=dict(D2_PROCESS, drift_strength=1.0),
            checks=["mean"],
        )
        out = str(tmp_path / "out")
        assert cli.main(["verify", "--config", cfg, "--out", out]) == 0
        assert "INF-REGIME" in capsys.readouterr().out
        report = json.loads(read_bytes(out, "report.json"))
        assert report["mean_plus_conditioned"] == "infinite"
        assert report["pass_flags"]["mean"] == "INF-REGIME"

    def test_infinite_regime_is_not_a_failure_for_expect_fail(self, tmp_path):
        # expect-fail demands FAIL; the infinite regime is a non-answer,
        # so the negative-control gate refuses to count it
        cfg = write_config(
            tmp_path / "c.json",
            process=dict(D2_PROCESS, drift_strength=1.0),
            checks=["mean"],
            check_mode="expect-fail",
        )
        assert cli.main(["verify", "--config", cfg, "--out", str(tmp_path / "o")]) == 1

    def test_analytic_mean_needs_no_ensembles(self, tmp_path):
        cfg = write_config(tmp_path / "c.json", process=D2_PROCESS, checks=["mean"])
        out = str(tmp_path / "out")
        assert cli.main(["verify", "--config", cfg, "--out", out]) == 0
        names = os.listdir(out)
        assert "ensemble_plus.csv" not in names
        assert "ensemble_minus.csv" not in names


class TestReportVerb:
    def test_reprints_and_exits_by_flags(self, verify_run, capsys):
        _, out, _ = verify_run
        assert cli.main(["report", "--out", out]) == 0
        text = capsys.readouterr().out
        assert "distribution" in text and "PASS" in text

    def test_fail_report_exits_one(self, tmp_path):
        os.makedirs(tmp_path / "failed")
        with open(tmp_path / "failed" / "report.json", "w") as fh:
            json.dump({"pass_flags": {"theorem1": "FAIL"}, "theorem1_ratios": [1.0],
                       "theorem1_ratio_band": [3.5, 4.5]}, fh)
        assert cli.main(["report", "--out", str(tmp_path / "failed")]) == 1

    def test_missing_report_is_io_error(self, tmp_path):
        assert cli.main(["report", "--out", str(tmp_path / "nowhere")]) == 3
