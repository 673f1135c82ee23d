import json

import numpy as np
import pytest

from conftest import small_config_text
from eitrouter.cli import main, read_switching_data
from eitrouter.errors import ConfigError
from eitrouter.io import read_csv_rows


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert "eitrouter" in capsys.readouterr().out


def test_spectrum_both(capsys, small_config, tmp_path):
    out = tmp_path / "o"
    code, stdout, _ = run(capsys, "--config", small_config, "--out", out, "spectrum")
    assert code == 0
    assert sorted(p.name for p in out.glob("*.csv")) == ["spectrum_off.csv", "spectrum_on.csv"]
    assert sorted(p.name for p in out.glob("*.svg")) == ["spectrum.svg"]
    header, rows = read_csv_rows(out / "spectrum_on.csv")
    assert header == ["delta_i_mhz", "r_mean", "r_stderr", "t_mean", "t_stderr"]
    assert len(rows) == 141
    assert (out / "spectrum.svg").read_text().lstrip().startswith("<?xml")
    summary = json.loads((out / "spectrum.json").read_text())
    assert summary["control_on"]["transparency_dip_mhz"] == pytest.approx(15.0, abs=1.0)
    assert "control_off" in stdout


@pytest.mark.parametrize("control, names", [("on", ["spectrum_on.csv"]), ("off", ["spectrum_off.csv"])])
def test_spectrum_single(capsys, small_config, tmp_path, control, names):
    code, _, _ = run(capsys, "spectrum", "--control", control, "--config", small_config, "--out", tmp_path / "o")
    assert code == 0
    assert sorted(p.name for p in (tmp_path / "o").glob("*.csv")) == names


def test_provenance_embedded(capsys, small_config, tmp_path):
    run(capsys, "--config", small_config, "--out", tmp_path, "spectrum", "--control", "off")
    lines = (tmp_path / "spectrum_off.csv").read_text().splitlines()
    assert lines[0].startswith("# eitrouter ")
    cfg = json.loads(lines[1][len("# config: "):])
    assert cfg["lattice"]["filling"] == 0.26 and cfg["seed"] == 0
    doc = json.loads((tmp_path / "spectrum.json").read_text())
    assert doc["provenance"]["config"] == cfg


def test_missing_filling_exit_2(capsys, tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text(small_config_text(**{"  filling: 0.26\n": ""}))
    code, _, err = run(capsys, "--config", path, "--out", tmp_path / "o", "spectrum")
    assert code == 2
    assert "lattice.filling" in err


def test_unknown_config(capsys):
    code, _, err = run(capsys, "--config", "/nonexistent/cfg.yaml", "spectrum")
    assert code == 2 and "neither a file nor a preset" in err


def test_switching_report(capsys, small_config, tmp_path):
    code, stdout, _ = run(capsys, "--config", small_config, "--out", tmp_path, "switching")
    assert code == 0
    report = json.loads((tmp_path / "switching_fit.json").read_text())
    assert report["e_r_fj"] > 0 and report["e_t_fj"] > 0
    assert "E_R" in stdout and "E_T" in stdout
    header, rows = read_csv_rows(tmp_path / "switching.csv")
    assert header == ["energy_fj", "r", "r_stderr", "t", "t_stderr"]
    assert len(rows) == 20
    assert (tmp_path / "switching.svg").exists()


def test_switching_one_point_exit_3(capsys, small_config, tmp_path):
    code, _, err = run(capsys, "--config", small_config, "--out", tmp_path, "switching", "--energies", "0.5")
    assert code == 3
    assert "fit failed" in err
    report = json.loads((tmp_path / "switching_fit.json").read_text())
    assert "fit_error" in report


def test_switching_bad_energies(capsys, small_config, tmp_path):
    code, _, _ = run(capsys, "--config", small_config, "--out", tmp_path, "switching", "--energies", "a,b")
    assert code == 2


def test_switching_calibrate(capsys, small_config, tmp_path):
    code, _, _ = run(capsys, "--config", small_config, "--out", tmp_path, "switching", "--calibrate")
    assert code == 0
    report = json.loads((tmp_path / "switching_fit.json").read_text())
    assert report["e_r_fj"] == pytest.approx(0.16, rel=1e-5)
    assert "kappa: " in (tmp_path / "calibration.yaml").read_text()


def test_extinction(capsys, small_config, tmp_path):
    code, stdout, _ = run(capsys, "--config", small_config, "--out", tmp_path, "extinction")
    assert code == 0
    report = json.loads((tmp_path / "extinction.json").read_text())
    assert {"center_mhz", "peak_db", "fwhm_mhz"} <= set(report)
    assert "3-dB bandwidth" in stdout
    header, rows = read_csv_rows(tmp_path / "extinction_reflection.csv")
    assert header == ["delta_i_mhz", "extinction_db"]


def test_extinction_identical_states_all_zero(capsys, tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text(small_config_text(**{"omega_c_mhz: 8.0": "omega_c_mhz: 0.0"}))
    run(capsys, "--config", path, "--out", tmp_path / "o", "extinction")
    for port in ("reflection", "transmission"):
        _, rows = read_csv_rows(tmp_path / "o" / f"extinction_{port}.csv")
        cells = [r["extinction_db"] for _, r, _ in rows]
        # points below the floor stay masked; every other point is exactly 0 dB
        assert all(float(c) == 0.0 for c in cells if c != "")
        assert sum(c != "" for c in cells) > len(cells) // 2


def test_extinction_masked_cells_empty(capsys, tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text(small_config_text(**{"er_floor: 1.0e-6": "er_floor: 0.3"}))
    run(capsys, "--config", path, "--out", tmp_path / "o", "extinction")
    _, rows = read_csv_rows(tmp_path / "o" / "extinction_reflection.csv")
    cells = [r["extinction_db"] for _, r, _ in rows]
    assert "" in cells and any(c != "" for c in cells)


def test_pulse_with_shots(capsys, small_config, tmp_path):
    code, stdout, _ = run(capsys, "--config", small_config, "--out", tmp_path, "pulse", "--shots", "4000")
    assert code == 0
    table = json.loads((tmp_path / "truth_table.json").read_text())
    assert table["binary"] is True
    assert table["detected"]["control_off"]["reflection_counts"] > 0
    header, rows = read_csv_rows(tmp_path / "pulse_on.csv")
    assert header == ["time_ns", "refl_mean", "refl_counts", "trans_mean", "trans_counts"]
    assert rows[0][1]["refl_counts"] != ""
    for name in ("pulse.svg", "truth_table.svg", "pulse_coherent_on.csv"):
        assert (tmp_path / name).exists()
    assert "binary routing" in stdout


def test_pulse_zero_shots_envelopes_only(capsys, small_config, tmp_path):
    code, _, _ = run(capsys, "--config", small_config, "--out", tmp_path, "pulse", "--shots", "0")
    assert code == 0
    _, rows = read_csv_rows(tmp_path / "pulse_off.csv")
    assert all(r["refl_counts"] == "" for _, r, _ in rows)
    assert json.loads((tmp_path / "truth_table.json").read_text())["detected"] is None


def test_pulse_rerun_byte_identical(capsys, small_config, tmp_path):
    for d in ("a", "b"):
        assert run(capsys, "--config", small_config, "--out", tmp_path / d, "pulse")[0] == 0
    for f in (tmp_path / "a").iterdir():
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes(), f.name


def test_global_flags_after_subcommand(capsys, small_config, tmp_path):
    code, _, _ = run(capsys, "spectrum", "--control", "off", "--config", small_config, "--seed", "3",
                     "--workers", "2", "--out", tmp_path)
    assert code == 0
    cfg = json.loads((tmp_path / "spectrum_off.csv").read_text().splitlines()[1][len("# config: "):])
    assert cfg["seed"] == 3


def test_seed_changes_output(capsys, small_config, tmp_path):
    run(capsys, "--config", small_config, "--out", tmp_path / "a", "spectrum", "--control", "off")
    run(capsys, "--config", small_config, "--seed", "1", "--out", tmp_path / "b", "spectrum", "--control", "off")
    assert (tmp_path / "a" / "spectrum_off.csv").read_bytes() != (tmp_path / "b" / "spectrum_off.csv").read_bytes()


class TestFit:
    def test_empty_file_exit_2(self, capsys, small_config, tmp_path):
        data = tmp_path / "e.csv"
        data.write_text("")
        code, _, err = run(capsys, "--config", small_config, "--out", tmp_path, "fit", "--data", data)
        assert code == 2 and "empty" in err

    def test_malformed_row_reports_line(self, capsys, small_config, tmp_path):
        data = tmp_path / "bad.csv"
        data.write_text("# comment\nenergy_fj,r,t\n0,0.8,0.1\n0.5,0.3\n")
        code, _, err = run(capsys, "--config", small_config, "--out", tmp_path, "fit", "--data", data)
        assert code == 2 and "line 4" in err

    def test_non_numeric_cell(self, capsys, small_config, tmp_path):
        data = tmp_path / "bad.csv"
        data.write_text("energy_fj,r,t\n0,0.8,0.1\n0.5,x,0.2\n")
        code, _, err = run(capsys, "--config", small_config, "--out", tmp_path, "fit", "--data", data)
        assert code == 2 and "line 3" in err

    def test_missing_column(self, capsys, small_config, tmp_path):
        data = tmp_path / "bad.csv"
        data.write_text("energy_fj,r\n0,0.8\n")
        code, _, err = run(capsys, "--config", small_config, "--out", tmp_path, "fit", "--data", data)
        assert code == 2 and "t" in err

    def test_missing_file(self, capsys, small_config, tmp_path):
        code, _, _ = run(capsys, "--config", small_config, "--out", tmp_path, "fit", "--data", tmp_path / "no.csv")
        assert code == 2

    def test_noisy_curve_reports_residual(self, capsys, small_config, tmp_path):
        assert run(capsys, "--config", small_config, "--out", tmp_path / "s", "switching")[0] == 0
        e, r, t = read_switching_data(tmp_path / "s" / "switching.csv")
        rng = np.random.default_rng(0)
        noisy = tmp_path / "noisy.csv"
        rows = zip(e, r + rng.normal(0, 0.01, r.size), t + rng.normal(0, 0.01, t.size))
        lines = ["energy_fj,r,t"] + [",".join(repr(float(v)) for v in row) for row in rows]
        noisy.write_text("\n".join(lines) + "\n")
        code, stdout, _ = run(capsys, "--config", small_config, "--out", tmp_path / "f", "fit", "--data", noisy)
        assert code == 0
        report = json.loads((tmp_path / "f" / "fit_report.json").read_text())
        assert report["residual_norm"] > 0.01
        assert report["kappa_stderr"] > 0
        assert "residual norm" in stdout

    def test_fit_gamma_1d(self, capsys, small_config, tmp_path):
        assert run(capsys, "--config", small_config, "--out", tmp_path / "s", "switching")[0] == 0
        code, _, _ = run(capsys, "--config", small_config, "--out", tmp_path / "f", "fit",
                         "--data", tmp_path / "s" / "switching.csv", "--fit-gamma-1d")
        assert code == 0
        report = json.loads((tmp_path / "f" / "fit_report.json").read_text())
        assert report["gamma_1d_fraction"] == pytest.approx(0.012, rel=1e-6)
        assert "gamma_1d_fraction" in (tmp_path / "f" / "calibration.yaml").read_text()


def test_read_switching_data_errors(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("energy_fj,r,t\n")
    with pytest.raises(ConfigError, match="no data rows"):
        read_switching_data(p)
    p.write_text("energy_fj,r,t\n-1,0.5,0.5\n")
    with pytest.raises(ConfigError, match=">= 0"):
        read_switching_data(p)
