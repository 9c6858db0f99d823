import csv
import io
import math
import subprocess
import sys

import numpy as np
import pytest

from pointer_entropy.cli import (COLUMNS, ConfigError, UnknownPreset, main, parse_config,
                                 preset, run_scenario, summarize, write_csv)
from pointer_entropy.distributions import write_density

from conftest import two_peak_state


def rows_by_time(rows):
    return {r.t: r for r in rows}


def read_rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


class TestPresets:
    def test_ak_closed_saturates_at_unit_time(self):
        cfg = preset("ak-closed")
        assert len(cfg.times) == 20 and cfg.times[0] == 0.1 and cfg.times[-1] == 2.0
        row = rows_by_time(run_scenario(cfg))[1.0]
        assert abs(row.delta_x2 - 0.5) < 1e-9 and abs(row.delta_p2 - 0.5) < 1e-9
        assert row.s_total == pytest.approx(1 + math.log(2 * math.pi), abs=1e-6)
        assert abs(row.gap) < 1e-6 and not row.violation

    def test_ak_closed_early_time(self):
        row = rows_by_time(run_scenario(preset("ak-closed")))[0.1]
        assert row.delta_x2 == pytest.approx(0.25 / 0.01 + 0.01 / 4, abs=1e-9)
        assert row.delta_x2 * row.delta_p2 > 600
        # delta_X = delta_P keeps sigma_x^2 = 1/2 optimal, so the bound is still met exactly
        assert abs(row.gap) < 1e-12

    def test_ak_ohmic_bath_positive(self):
        row = rows_by_time(run_scenario(preset("ak-ohmic")))[1.0]
        assert row.delta_x2_bath > 0
        assert row.route_disagreement < 1e-4
        assert row.gap >= -1e-6 and not row.violation

    def test_unknown(self):
        with pytest.raises(UnknownPreset):
            preset("nope")

    def test_text_round_trip(self):
        cfg = preset("ak-ohmic")
        again = parse_config(cfg.to_text())
        assert np.array_equal(again.times, cfg.times)
        assert again.sections == cfg.sections


class TestConfig:
    base = preset("ak-closed").to_text()

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown keys"):
            parse_config(self.base + "\n[numerics]\nmax_stepp = 0.1\n")

    def test_unknown_block(self):
        with pytest.raises(ConfigError, match="unknown block"):
            parse_config(self.base + "\n[extras]\nfoo = 1\n")

    def test_missing_block(self):
        with pytest.raises(ConfigError, match="missing block"):
            parse_config("[model]\nkappa = 1\n")

    def test_bad_values(self):
        with pytest.raises(ConfigError):
            parse_config(self.base.replace("choice = X1X2", "choice = X1X1"))
        with pytest.raises(ConfigError):
            parse_config(self.base + "\n[bath]\nfamily = ohmic\ngamma = 0.1\ncutoff = 5\nbeta = 1\nmodes = 0\n")

    def test_piecewise_coupling(self):
        text = self.base.replace(
            "kappa = 1", "coupling = 0 0 1 0; 0 0 0 1 | 0 0 0 0; 0 0 0 0\ncoupling_breaks = 0.5")
        cfg = parse_config(text)
        assert cfg.model.breakpoints() == (0.5,)
        # coupling switched off after t = 0.5: inference frozen at the t = 0.5 values
        rows = rows_by_time(run_scenario(cfg))
        late = [r for t, r in rows.items() if t >= 0.5]
        assert all(r.delta_x2 == pytest.approx(late[0].delta_x2, rel=1e-9) for r in late)


class TestMain:
    def test_simulate_and_determinism(self, tmp_path):
        cfg = tmp_path / "s.ini"
        assert main(["preset", "--name", "ak-ohmic", "--write", str(cfg)]) == 0
        out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(["simulate", "--config", str(cfg), "--out", str(out1)]) == 0
        assert main(["simulate", "--config", str(cfg), "--out", str(out2)]) == 0
        assert out1.read_bytes() == out2.read_bytes()
        rows = read_rows(out1)
        assert tuple(rows[0]) == COLUMNS and len(rows) == 20

    def test_momentum_pair_flagged(self, tmp_path, capsys):
        cfg = tmp_path / "s.ini"
        cfg.write_text(preset("ak-closed").to_text().replace("X1X2", "P1P2"))
        out = tmp_path / "o.csv"
        assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
        assert all(r["exists"] == "0" for r in read_rows(out))
        assert "not invertible" in capsys.readouterr().err

    def test_config_errors_exit_2(self, tmp_path):
        bad = tmp_path / "bad.ini"
        bad.write_text("[model]\nkappa = 1\nspin = 3\n")
        assert main(["simulate", "--config", str(bad)]) == 2
        assert main(["simulate", "--config", str(tmp_path / "missing.ini")]) == 2
        assert main(["preset", "--name", "nope"]) == 2

    def test_violation_exits_1(self):
        rows = run_scenario(preset("ak-closed"))
        rows[0].violation = True
        assert summarize(rows).exit_code == 1
        assert summarize(rows[1:]).exit_code == 0

    def test_tabulated_system(self, tmp_path):
        st_ = two_peak_state(1024)
        write_density(tmp_path / "x.txt", st_.position)
        write_density(tmp_path / "p.txt", st_.momentum)
        text = preset("ak-closed").to_text()
        start = text.index("[system]")
        end = text.index("[", start + 1)
        text = (text[:start] + "[system]\nkind = tabulated\nposition_file = x.txt\n"
                "momentum_file = p.txt\n\n" + text[end:])
        cfg = tmp_path / "tab.ini"
        cfg.write_text(text)
        out = tmp_path / "o.csv"
        assert main(["simulate", "--config", str(cfg), "--out", str(out), "--grid-points", "2048"]) == 0
        gaps = [float(r["gap"]) for r in read_rows(out)]
        assert min(gaps) > 0

    def test_module_entry_point(self, tmp_path):
        res = subprocess.run([sys.executable, "-m", "pointer_entropy", "preset", "--name", "ak-closed"],
                             capture_output=True, text=True, check=True)
        assert "[model]" in res.stdout


def test_csv_is_full_precision():
    rows = run_scenario(preset("ak-closed"))
    buf = io.StringIO()
    write_csv(rows, buf)
    back = list(csv.DictReader(io.StringIO(buf.getvalue())))
    assert all(float(b["s_total"]) == r.s_total for b, r in zip(back, rows))
