import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from spintrack.cli import main, parse_scenario
from spintrack.errors import ConfigurationError

SCENARIOS = Path(__file__).resolve().parents[1] / "src" / "spintrack" / "scenarios"


def run_cli(args):
    return main(args)


def read_csv(path):
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh]
    return header, rows


class TestScenarioParsing:
    def test_fixture_loads(self):
        sc = parse_scenario(str(SCENARIOS / "riccati_fluctuating.scn"))
        assert sc["J"] == 1e6 and sc["sigma_bF"] == 2e5 and sc["seed"] == 42

    def test_unknown_key_rejected(self, tmp_path):
        bad = tmp_path / "bad.scn"
        bad.write_text("J = 1\nwhatever = 2\n")
        with pytest.raises(ConfigurationError, match="whatever"):
            parse_scenario(str(bad))

    def test_duplicate_key_rejected(self, tmp_path):
        bad = tmp_path / "dup.scn"
        bad.write_text("J = 1\nJ = 2\n")
        with pytest.raises(ConfigurationError, match="duplicate"):
            parse_scenario(str(bad))

    def test_list_values(self, tmp_path):
        f = tmp_path / "l.scn"
        f.write_text("f_sweep = 0.5, 1, 2\n")
        assert parse_scenario(str(f))["f_sweep"] == [0.5, 1.0, 2.0]

    def test_invalid_physics_rejected_at_build(self, tmp_path):
        f = tmp_path / "p.scn"
        f.write_text("J = 1e6\ngamma = 1e6\nM = 1e4\neta = 2\ndt = 1e-9\nT = 1e-7\n")
        rc = run_cli(["simulate", "--scenario", str(f), "--out", str(tmp_path / "o.csv")])
        assert rc == 2


class TestCommands:
    def test_simulate_csv_schema(self, tmp_path):
        out = tmp_path / "sim.csv"
        sc = tmp_path / "s.scn"
        sc.write_text("J = 1e4\ngamma = 1e6\nM = 1e4\nsigma_z0 = 5e3\nsigma_b0 = 1e-4\n"
                      "gamma_b = 1e5\nsigma_bF = 2e-4\ndt = 1e-8\nT = 1e-6\nseed = 3\n")
        assert run_cli(["simulate", "--scenario", str(sc), "--out", str(out)]) == 0
        header, rows = read_csv(out)
        assert header == ["t", "z", "b", "u", "ydt"]
        assert len(rows) == 101

    def test_riccati_constant_field_agreement_columns(self, tmp_path):
        out = tmp_path / "ric.csv"
        rc = run_cli(["riccati", "--scenario", str(SCENARIOS / "constant_field_tables.scn"),
                      "--out", str(out)])
        assert rc == 0
        header, rows = read_csv(out)
        assert header[0] == "t" and "bdev_analytic" in header
        devs = np.array([float(r[header.index("bdev_analytic")]) for r in rows])
        assert np.nanmax(devs) < 1e-6

    def test_montecarlo_small(self, tmp_path):
        out = tmp_path / "mc.csv"
        sc = tmp_path / "mc.scn"
        base = (SCENARIOS / "montecarlo_matched.scn").read_text()
        sc.write_text(base.replace("trials   = 2000", "trials   = 100")
                          .replace("T        = 5e-8", "T        = 1e-8"))
        assert run_cli(["montecarlo", "--scenario", str(sc), "--out", str(out)]) == 0
        header, rows = read_csv(out)
        assert header[:3] == ["t", "sigma_bE", "se_bE"]
        assert "sigma_bR" in header

    def test_montecarlo_determinism_and_worker_invariance(self, tmp_path):
        sc = tmp_path / "mc.scn"
        base = (SCENARIOS / "montecarlo_matched.scn").read_text()
        sc.write_text(base.replace("trials   = 2000", "trials   = 600")
                          .replace("T        = 5e-8", "T        = 5e-9"))
        outs = []
        for tag, workers in (("a", "1"), ("b", "1"), ("c", "2")):
            out = tmp_path / f"mc_{tag}.csv"
            assert run_cli(["montecarlo", "--scenario", str(sc), "--out", str(out),
                            "--workers", workers]) == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]  # repeated run byte-identical
        assert outs[0] == outs[2]  # worker count does not change bytes

    def test_montecarlo_steady_gain_fixture(self, tmp_path, capsys):
        sc = tmp_path / "sg.scn"
        base = (SCENARIOS / "transfer_function_comparison.scn").read_text()
        sc.write_text(base.replace("trials   = 2000", "trials   = 100")
                          .replace("T        = 5e-8", "T        = 5e-9"))
        out = tmp_path / "sg.csv"
        assert run_cli(["montecarlo", "--scenario", str(sc), "--out", str(out)]) == 0
        assert "steady_gain" in capsys.readouterr().out

    def test_mismatch_steady(self, tmp_path):
        out = tmp_path / "mm.csv"
        rc = run_cli(["mismatch", "--scenario", str(SCENARIOS / "mismatch_steady.scn"),
                      "--out", str(out)])
        assert rc == 0
        header, rows = read_csv(out)
        factors = {float(r[0]): (float(r[3]), float(r[4])) for r in rows}
        for f, (measured, predicted) in factors.items():
            assert measured == pytest.approx(predicted, rel=0.02)

    def test_mismatch_transient_flags_invalid_row(self, tmp_path):
        out = tmp_path / "mmt.csv"
        rc = run_cli(["mismatch", "--scenario", str(SCENARIOS / "mismatch_transient.scn"),
                      "--out", str(out)])
        assert rc == 0
        header, rows = read_csv(out)
        by_f = {float(r[0]): r for r in rows}
        assert by_f[0.5][header.index("valid")] == "0"
        assert by_f[1.0][header.index("valid")] == "1"

    def test_bode_report(self, tmp_path, capsys):
        out = tmp_path / "bode.csv"
        rc = run_cli(["bode", "--scenario", str(SCENARIOS / "bode_nominal.scn"),
                      "--out", str(out)])
        assert rc == 0
        report = capsys.readouterr().out
        assert "omega_C / omega_H" in report
        header, rows = read_csv(out)
        assert header[0] == "omega" and "Gu_mag_dB" in header

    def test_design_report_and_exit(self, tmp_path, capsys):
        out = tmp_path / "design.csv"
        rc = run_cli(["design", "--scenario", str(SCENARIOS / "robust_design.scn"),
                      "--out", str(out)])
        report = capsys.readouterr().out
        assert rc == 0, report
        assert "criterion_met: 1" in report
        header, rows = read_csv(out)
        assert len(rows) == 25
        assert all(float(r[1]) < 1.0 for r in rows)

    def test_design_infeasible_exit_code(self, tmp_path):
        sc = tmp_path / "bad_design.scn"
        sc.write_text("gamma = 1e6\nJ_min = 1e5\nJ_max = 1e6\nomega_Q = 1e9\n"
                      "omega_1 = 8e7\nomega_L = 1e9\n")
        rc = run_cli(["design", "--scenario", str(sc), "--out", str(tmp_path / "d.csv")])
        assert rc == 2

    def test_simulate_closed_loop_schema(self, tmp_path):
        out = tmp_path / "clo.csv"
        sc = tmp_path / "clo.scn"
        base = (SCENARIOS / "montecarlo_matched.scn").read_text()
        sc.write_text(base.replace("T        = 5e-8", "T        = 2e-9"))
        assert run_cli(["simulate", "--scenario", str(sc), "--out", str(out)]) == 0
        header, rows = read_csv(out)
        assert header == ["t", "z", "b", "u", "z_tilde", "b_tilde"]
        assert len(rows) == 401

    def test_qsme_verify_plumbing(self, tmp_path, monkeypatch, capsys):
        import numpy as _np
        from spintrack import qsme as _qsme

        def fake_suites(seed=0):
            t = _np.array([0.0, 1.0])
            return [
                {"name": "jx_decay", "passed": True, "measured": 1e-4,
                 "tolerance": 0.01, "t": t, "jx": t + 1.0, "predicted": t + 1.0},
                {"name": "variance_tracking", "passed": True, "measured": 2e-3,
                 "tolerance": 0.05, "t": t, "dJz2": t, "predicted": t},
                {"name": "grid_vs_kalman", "passed": True, "measured": 0.02,
                 "tolerance": 0.1, "posterior": (_np.array([-1.0, 1.0]),
                                                 _np.array([0.25, 0.75]))},
                {"name": "two_point_posterior", "passed": False, "measured": 0.5,
                 "tolerance": 0.9},
            ]

        monkeypatch.setattr(_qsme, "run_all_suites", fake_suites)
        out = tmp_path / "q.csv"
        rc = run_cli(["qsme-verify", "--scenario", str(SCENARIOS / "qsme_verify.scn"),
                      "--out", str(out)])
        assert rc == 4  # one suite failed
        report = capsys.readouterr().out
        assert "two_point_posterior: FAIL" in report
        header, rows = read_csv(out)
        assert header == ["suite", "t", "value", "predicted"]
        assert any(r[0] == "grid_posterior" for r in rows)

    def test_seventeen_digit_floats(self, tmp_path):
        out = tmp_path / "ric.csv"
        run_cli(["riccati", "--scenario", str(SCENARIOS / "constant_field_tables.scn"),
                 "--out", str(out)])
        _, rows = read_csv(out)
        val = rows[0][1]
        assert float(val) == float("%.17g" % float(val))
        assert len(val.replace(".", "").replace("-", "").replace("e", "").lstrip("0")) >= 15

    def test_riccati_determinism_bytes(self, tmp_path):
        outs = []
        for tag in ("a", "b"):
            out = tmp_path / f"r_{tag}.csv"
            run_cli(["riccati", "--scenario", str(SCENARIOS / "riccati_fluctuating.scn"),
                     "--out", str(out)])
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]


def test_console_entry_point(tmp_path):
    out = tmp_path / "sim.csv"
    sc = tmp_path / "s.scn"
    sc.write_text("J = 1e4\ngamma = 1e6\nM = 1e4\nsigma_z0 = 5e3\nsigma_b0 = 0\n"
                  "dt = 1e-8\nT = 1e-7\nseed = 1\n")
    proc = subprocess.run([sys.executable, "-m", "spintrack.cli", "simulate",
                           "--scenario", str(sc), "--out", str(out)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert out.exists()
