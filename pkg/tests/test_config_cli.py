import math

import numpy as np
import pytest

from dlczsim import cli
from dlczsim.config import ConfigError, load_config, parse_config_text
from dlczsim.reporting import (
    TRAJECTORY_COLUMNS,
    read_trajectory_csv,
    write_trajectory_csv,
)
from dlczsim import IntegratorConfig, evolve_meanfield
from dlczsim.figures import US, resolve_figure, solve_alpha_for_n1

from conftest import PER_US, STD_TL, rect_sched

BASE_CFG = """
[timeline]
T_W = 1.6      # us
tau_d = 1.4
T_R = 1.0

[rates]        # per-microsecond units
alpha = 0.86643
beta = 8.6643
gamma_c = 0.03
k = 3000.0

[integrator]
rate_step_product = 0.002
stride = 4

[oracle]
dim = 40
tolerance = 1e-4
"""


def write_cfg(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


class TestConfigParsing:
    def test_base_config_round_trips_units(self):
        cfg = parse_config_text(BASE_CFG)
        assert cfg.tl.T_W == pytest.approx(1.6e-6)
        assert cfg.sched.alpha == pytest.approx(0.86643e6)
        assert cfg.sched.gamma_c == pytest.approx(0.03e6)
        assert cfg.sched.k == pytest.approx(3.0e9)
        assert cfg.integrator.stride == 4
        assert cfg.oracle.dim == 40
        assert cfg.oracle_tolerance == 1e-4

    def test_unknown_key_is_an_error(self):
        with pytest.raises(ConfigError, match="unknown key 'alpah'"):
            parse_config_text(BASE_CFG.replace("alpha =", "alpah ="))

    def test_unknown_section_is_an_error(self):
        with pytest.raises(ConfigError, match=r"unknown section \[misc\]"):
            parse_config_text(BASE_CFG + "\n[misc]\nx = 1\n")

    def test_rates_and_raw_are_exclusive(self):
        with pytest.raises(ConfigError, match="exactly one"):
            parse_config_text(BASE_CFG + "\n[raw]\nOmega_W = 1e7\n")
        no_rates = BASE_CFG.replace("[rates]", "[oracle.disabled]")
        with pytest.raises(ConfigError):
            parse_config_text(no_rates)

    def test_raw_section_derives_rates(self):
        text = """
[timeline]
T_W = 1.6
tau_d = 1.4
T_R = 1.0

[raw]
Omega_W = 1.0e7
Omega_R = 1.0e8
Delta_W = 3.1623e9
Delta_R = 3.1623e9
gamma_32 = 1.0e7
gamma_41 = 1.0e7
gamma_c = 1.0e4
N = 1.0e12
k = 3.0e9
g_S = 2.2458e4
g_AS = 2.2458e4
"""
        with pytest.warns(UserWarning, match="bad-cavity"):
            cfg = parse_config_text(text)
        assert cfg.raw is not None
        assert 1e5 < cfg.sched.alpha < 1e7

    def test_non_numeric_value_reported(self):
        with pytest.raises(ConfigError, match="not a number"):
            parse_config_text(BASE_CFG.replace("= 8.6643", "= fast"))

    def test_trapezoid_envelope_section(self):
        text = BASE_CFG + "\n[envelope.write]\nshape = trapezoid\nrise_time = 0.08\n"
        cfg = parse_config_text(text)
        assert cfg.sched.f_W.shape == "trapezoid"
        assert cfg.sched.f_W.rise_time == pytest.approx(0.08e-6)

    def test_tabulated_envelope_section(self):
        text = BASE_CFG + (
            "\n[envelope.write]\nshape = tabulated\n"
            "times = 0.0, 0.4, 1.0, 1.6\nvalues = 0.0, 1.0, 0.8, 0.0\n"
        )
        cfg = parse_config_text(text)
        assert cfg.sched.f_W.shape == "tabulated"
        assert cfg.sched.f_W.value(0.4e-6) == pytest.approx(1.0)

    def test_fixed_step_key(self):
        cfg = parse_config_text(BASE_CFG)
        assert cfg.integrator.step is None
        cfg2 = parse_config_text(
            BASE_CFG.replace("[integrator]", "[integrator]\nstep = 0.001")
        )
        assert cfg2.integrator.step == pytest.approx(1e-9)

    def test_sweep_grids(self):
        log = BASE_CFG + "\n[sweep]\nparam = p\ngrid = logspace\nstart = 1e-3\nstop = 1e-1\nnum = 15\n"
        cfg = parse_config_text(log)
        assert cfg.sweep.param == "p"
        assert len(cfg.sweep.values) == 15
        explicit = BASE_CFG + "\n[sweep]\nparam = tau_d\nvalues = 0.5, 1.0, 1.5\n"
        assert parse_config_text(explicit).sweep.values == (0.5, 1.0, 1.5)
        with pytest.raises(ConfigError, match="param must be one of"):
            parse_config_text(BASE_CFG + "\n[sweep]\nparam = banana\nvalues = 1\n")


class TestTrajectoryCsv:
    def test_round_trip_is_exact(self, tmp_path, std_tl):
        traj = evolve_meanfield(
            rect_sched(gamma_c=0.03 * PER_US), std_tl,
            IntegratorConfig(rate_step_product=5e-3, stride=8),
        )
        path = tmp_path / "traj.csv"
        write_trajectory_csv(traj, path)
        data = read_trajectory_csv(path)
        assert np.array_equal(data["t_us"], traj.t / 1e-6)
        assert np.array_equal(data["nsp"], traj.nsp)
        assert np.array_equal(data["flux2_per_us"], traj.flux2 * 1e-6)
        assert tuple(data) == TRAJECTORY_COLUMNS


class TestCliSimulate:
    def test_outputs_and_determinism(self, tmp_path):
        cfgp = write_cfg(tmp_path, BASE_CFG)
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert cli.main(["--out", str(out1), "simulate", "--config", str(cfgp)]) == 0
        assert cli.main(["--out", str(out2), "simulate", "--config", str(cfgp)]) == 0
        for name in ("trajectory.csv", "correlations.csv", "summary.txt"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
        assert (out1 / "trajectory.png").exists()
        header = (out1 / "trajectory.csv").read_text().splitlines()[0]
        assert header == ",".join(TRAJECTORY_COLUMNS)

    def test_zero_drive_reports_undefined_statistics(self, tmp_path):
        text = BASE_CFG.replace("alpha = 0.86643", "alpha = 0.0")
        cfgp = write_cfg(tmp_path, text)
        out = tmp_path / "out"
        assert cli.main(["--out", str(out), "simulate", "--config", str(cfgp)]) == 0
        summary = (out / "summary.txt").read_text()
        assert "undefined" in summary
        assert "infinite" in summary
        data = read_trajectory_csv(out / "trajectory.csv")
        assert np.all(data["nsp"] == 0.0)

    def test_config_error_exit_code(self, tmp_path):
        cfgp = write_cfg(tmp_path, BASE_CFG.replace("alpha", "alpah"))
        assert cli.main(["--out", str(tmp_path / "o"), "simulate", "--config", str(cfgp)]) == 1

    def test_missing_config_file_exit_code(self, tmp_path):
        assert cli.main(["--out", str(tmp_path / "o"), "simulate", "--config", "nope.cfg"]) == 1


class TestCliSweep:
    def test_single_point_sweep_matches_scenario_run(self, tmp_path):
        text = BASE_CFG + "\n[sweep]\nparam = alpha\nvalues = 0.86643\n"
        cfgp = write_cfg(tmp_path, text)
        out = tmp_path / "out"
        assert cli.main(["--out", str(out), "sweep", "--config", str(cfgp)]) == 0
        lines = (out / "sweep.csv").read_text().splitlines()
        assert len(lines) == 2
        row = dict(zip(lines[0].split(","), lines[1].split(",")))
        cfg = load_config(cfgp)
        traj = evolve_meanfield(cfg.sched, cfg.tl, cfg.integrator)
        assert float(row["n1_out_TW"]) == pytest.approx(traj.n1_out_write_end, rel=1e-12)
        assert row["error"] == ""

    def test_per_point_failures_recorded_and_run_continues(self, tmp_path):
        text = BASE_CFG + "\n[sweep]\nparam = tau_d\nvalues = 0.5, -1.0, 1.5\n"
        cfgp = write_cfg(tmp_path, text)
        out = tmp_path / "out"
        assert cli.main(["--out", str(out), "sweep", "--config", str(cfgp)]) == 0
        lines = (out / "sweep.csv").read_text().splitlines()
        assert len(lines) == 4
        assert "ParameterError" in lines[2]
        assert lines[1].endswith(",") and lines[3].endswith(",")  # no error entry

    def test_worker_pool_gives_identical_csv(self, tmp_path):
        text = BASE_CFG + "\n[sweep]\nparam = p\ngrid = logspace\nstart = 0.01\nstop = 0.05\nnum = 4\n"
        cfgp = write_cfg(tmp_path, text)
        out1, out2 = tmp_path / "w1", tmp_path / "w2"
        assert cli.main(["--out", str(out1), "sweep", "--config", str(cfgp)]) == 0
        assert cli.main(
            ["--out", str(out2), "--workers", "2", "sweep", "--config", str(cfgp)]
        ) == 0
        assert (out1 / "sweep.csv").read_bytes() == (out2 / "sweep.csv").read_bytes()

    def test_p_sweep_solves_drive_per_point(self, tmp_path):
        text = BASE_CFG + "\n[sweep]\nparam = p\nvalues = 0.05\n"
        cfgp = write_cfg(tmp_path, text)
        out = tmp_path / "out"
        assert cli.main(["--out", str(out), "sweep", "--config", str(cfgp)]) == 0
        lines = (out / "sweep.csv").read_text().splitlines()
        row = dict(zip(lines[0].split(","), lines[1].split(",")))
        assert float(row["n1_out_TW"]) == pytest.approx(0.05, rel=1e-9)
        assert float(row["R"]) == pytest.approx(
            121.0 * math.exp(-0.03 * 1.4), rel=1e-9
        )


class TestCliOracleCheck:
    OC_CFG = """
[timeline]
T_W = 1.6
tau_d = 1.4
T_R = 1.0

[rates]
alpha = 0.0305
beta = 4.0
gamma_c = 0.0
k = 3000.0

[integrator]
rate_step_product = 0.002

[oracle]
dim = 24
tolerance = 1e-4
rate_step_product = 0.002
"""

    def test_pass_gives_exit_zero_and_diff_csv(self, tmp_path):
        cfgp = write_cfg(tmp_path, self.OC_CFG)
        out = tmp_path / "out"
        assert cli.main(["--out", str(out), "oracle-check", "--config", str(cfgp)]) == 0
        diff = (out / "oracle_diff.csv").read_text().splitlines()
        assert diff[0] == "quantity,analytic,oracle,rel_diff,tolerance,status"
        assert all(line.endswith("pass") for line in diff[1:])
        assert (out / "oracle_values.csv").exists()

    def test_unreachable_tolerance_gives_exit_three(self, tmp_path):
        cfgp = write_cfg(tmp_path, self.OC_CFG)
        out = tmp_path / "out"
        code = cli.main(
            ["--out", str(out), "--tolerance", "1e-16", "oracle-check",
             "--config", str(cfgp)]
        )
        assert code == 3
        diff = (out / "oracle_diff.csv").read_text()
        assert "FAIL" in diff

    def test_undersized_truncation_gives_exit_two_with_hint(self, tmp_path, capsys):
        big_drive = self.OC_CFG.replace("alpha = 0.0305", "alpha = 0.86643")
        cfgp = write_cfg(tmp_path, big_drive)
        code = cli.main(["--out", str(tmp_path / "o"), "oracle-check", "--config", str(cfgp)])
        assert code == 2
        assert "dim" in capsys.readouterr().err


class TestCliFigure:
    def test_fig2b_pins_three_stokes_photons(self, tmp_path):
        out = tmp_path / "figs"
        assert cli.main(["--out", str(out), "figure", "fig2b"]) == 0
        csvs = sorted(out.glob("fig2b_*.csv"))
        assert len(csvs) == 3
        assert (out / "fig2b.png").exists()
        spec = resolve_figure("fig2b")
        for path in csvs:
            data = read_trajectory_csv(path)
            n1_tw = float(np.interp(spec.tl.T_W / US, data["t_us"], data["n1_out"]))
            assert n1_tw == pytest.approx(3.0, rel=1e-9)

    def test_unknown_figure_id_rejected(self, tmp_path):
        assert cli.main(["--out", str(tmp_path), "figure", "fig9z"]) == 1

    def test_alpha_solver_accounts_for_decoherence(self):
        a0 = solve_alpha_for_n1(3.0, STD_TL, gamma_c=0.0)
        a1 = solve_alpha_for_n1(3.0, STD_TL, gamma_c=0.3e6)
        assert a0 == pytest.approx(math.log(4.0) / STD_TL.T_W, rel=1e-12)
        assert a1 > a0  # decoherence during the write must be compensated
