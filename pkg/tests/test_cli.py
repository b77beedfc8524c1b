import csv
import json
import math
from pathlib import Path

import pytest

from outage_analysis import main

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"


@pytest.fixture(autouse=True)
def _plain_logging(tmp_path, monkeypatch):
    # keep the ini file from replacing pytest's log capture handlers
    monkeypatch.setenv("HARQ_LOG_CONFIG", str(tmp_path / "no-logging.ini"))
    monkeypatch.delenv("HARQ_TERM_CAP", raising=False)


@pytest.fixture
def write_config(tmp_path):
    def write(data, name="run.json"):
        path = tmp_path / name
        path.write_text(json.dumps(data), encoding="utf-8")
        return str(path)

    return write


def read_table(text):
    lines = [line for line in text.splitlines() if not line.startswith("#")]
    return list(csv.DictReader(lines))


def run_cli(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr().out


class TestOutage:
    def test_independent_single_round(self, capsys, write_config):
        path = write_config({"K": 1, "rho": 0.0, "R": 2, "P_T_dB": 0})
        code, out = run_cli(capsys, "outage", "--config", path)
        assert code == 0
        assert out.startswith("# outage_true lies in")
        (row,) = read_table(out)
        assert float(row["outage_series"]) == pytest.approx(1 - math.exp(-3.0), rel=1e-15)
        assert float(row["bound"]) == 0.0
        assert row["n_used"] == "0"
        assert row["mc_p_hat"] == "" and row["mc_stderr"] == ""

    def test_json_carries_cross_checks(self, capsys, write_config):
        path = write_config({"K": 2, "rho": 0.5, "p_total_db": 5, "nodes": 64, "mc": {"samples": 20000, "seed": 1}})
        code, out = run_cli(capsys, "outage", "--config", path, "--format", "json")
        assert code == 0
        doc = json.loads(out)
        summary = doc["summary"]
        assert summary["outage_quadrature"] == pytest.approx(summary["outage_series"], rel=1e-5)
        assert summary["outage_upper"] == min(1.0, summary["outage_series"] + summary["bound"])
        assert summary["mc"]["samples"] == 20000
        parts = summary["asymptotic_breakdown"]
        assert parts["product"] == pytest.approx(summary["outage_asymptotic"])
        assert doc["rows"][0]["mc_p_hat"] == summary["mc"]["p_hat"]
        methods = {e["method"]: e for e in summary["estimates"]}
        assert sorted(methods) == ["asymptotic", "monte_carlo", "quadrature", "series"]
        assert methods["series"]["bound"] == summary["bound"]
        assert methods["series"]["order"] == summary["n_used"]
        assert methods["monte_carlo"]["stderr"] == summary["mc"]["stderr"]
        assert methods["asymptotic"]["bound"] is None

    def test_rho_one_is_a_config_error(self, capsys, caplog, write_config):
        path = write_config({"K": 2, "rho": 1.0, "p_total_db": 10})
        code, out = run_cli(capsys, "outage", "--config", path)
        assert code == 2
        assert out == ""
        assert "0 ≤ ρ < 1" in caplog.text

    def test_power_beyond_double_range(self, capsys, caplog, write_config):
        path = write_config({"K": 1, "rho": 0.0, "p_total_db": 4000})
        code, out = run_cli(capsys, "outage", "--config", path)
        assert code == 2
        assert out == ""
        assert "does not fit in a double" in caplog.text

    def test_out_into_new_directory(self, capsys, write_config, tmp_path):
        path = write_config({"K": 1, "rho": 0.0, "p_total_db": 0})
        target = tmp_path / "results" / "nested" / "point.csv"
        code, out = run_cli(capsys, "outage", "--config", path, "--out", str(target))
        assert code == 0
        assert out == ""
        (row,) = read_table(target.read_text(encoding="utf-8"))
        assert float(row["outage_series"]) == pytest.approx(1 - math.exp(-3.0), rel=1e-15)

    def test_missing_config(self, capsys, tmp_path):
        code, _ = run_cli(capsys, "outage", "--config", str(tmp_path / "absent.json"))
        assert code == 2

    def test_malformed_config(self, capsys, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json", encoding="utf-8")
        code, _ = run_cli(capsys, "outage", "--config", str(path))
        assert code == 2

    def test_term_cap(self, capsys, caplog, write_config, monkeypatch):
        monkeypatch.setenv("HARQ_TERM_CAP", "10")
        path = write_config({"K": 4, "rho": 0.5, "p_total_db": 10})
        code, _ = run_cli(capsys, "outage", "--config", path)
        assert code == 3
        assert "HARQ_TERM_CAP" in caplog.text


class TestSweep:
    def test_high_snr_slope(self, capsys, write_config):
        path = write_config({"K": 4, "rho": 0.5, "db_grid": [20, 25, 30]})
        code, out = run_cli(capsys, "sweep", "--config", path)
        assert code == 0
        rows = read_table(out)
        assert [float(r["p_total_db"]) for r in rows] == [20.0, 25.0, 30.0]
        values = [float(r["outage_series"]) for r in rows]
        assert values[0] > values[1] > values[2]
        assert 3.5 <= math.log10(values[0] / values[2]) <= 4.5
        for r in rows:
            assert float(r["bound"]) <= 1e-9

    def test_single_point_matches_outage(self, capsys, write_config):
        point = write_config({"K": 3, "rho": 0.7, "p_total_db": 7.5}, "point.json")
        grid = write_config({"K": 3, "rho": 0.7, "db_grid": [7.5]}, "grid.json")
        _, single = run_cli(capsys, "outage", "--config", point)
        _, sweep = run_cli(capsys, "sweep", "--config", grid)
        assert single.splitlines()[-1] == sweep.splitlines()[-1]

    def test_byte_identical_reruns(self, capsys, write_config, tmp_path):
        path = write_config(
            {"K": 2, "rho": 0.5, "db_grid": [0, 5, 10], "mc": {"samples": 20000, "seed": 7, "streams": 8}}
        )
        first, second = tmp_path / "first.csv", tmp_path / "second.csv"
        assert main(["sweep", "--config", path, "--out", str(first)]) == 0
        assert main(["sweep", "--config", path, "--out", str(second)]) == 0
        assert first.read_bytes() == second.read_bytes()
        rows = read_table(first.read_text(encoding="utf-8"))
        assert all(r["mc_p_hat"] != "" for r in rows)

    def test_parallel_points_keep_order(self, capsys, write_config):
        serial = write_config({"K": 2, "rho": 0.3, "db_grid": [0, 2, 4, 6, 8]}, "serial.json")
        parallel = write_config({"K": 2, "rho": 0.3, "db_grid": [0, 2, 4, 6, 8], "workers": 4}, "parallel.json")
        _, a = run_cli(capsys, "sweep", "--config", serial)
        _, b = run_cli(capsys, "sweep", "--config", parallel)
        assert read_table(a) == read_table(b)

    def test_delta_sensitivity(self, capsys):
        code, out = run_cli(capsys, "sweep", "--config", str(CONFIG_DIR / "delta_sensitivity.json"))
        assert code == 0
        rows = read_table(out)
        assert len(rows) == 9
        assert sorted({float(r["delta"]) for r in rows}) == [0.5, 1.0, 2.0]
        # a longer feedback delay decorrelates the rounds
        at_30 = {float(r["delta"]): float(r["outage_series"]) for r in rows if float(r["p_total_db"]) == 30.0}
        assert at_30[2.0] < at_30[1.0] < at_30[0.5]

    def test_one_curve_per_round_count(self, capsys, write_config):
        path = write_config({"K_list": [1, 2, 3, 4], "rho": 0.5, "db_grid": [20, 30]})
        code, out = run_cli(capsys, "sweep", "--config", path)
        assert code == 0
        assert out.splitlines()[2].startswith("# one curve per K")
        rows = read_table(out)
        assert [(int(r["K"]), float(r["p_total_db"])) for r in rows] == [
            (K, db) for K in (1, 2, 3, 4) for db in (20.0, 30.0)
        ]
        outage = {(int(r["K"]), float(r["p_total_db"])): float(r["outage_series"]) for r in rows}
        # more rounds, lower outage, at every power
        for db in (20.0, 30.0):
            assert outage[(1, db)] > outage[(2, db)] > outage[(3, db)] > outage[(4, db)]
        # a 10 dB step buys about K decades
        for K in (1, 2, 3, 4):
            assert K - 0.5 <= math.log10(outage[(K, 20.0)] / outage[(K, 30.0)]) <= K + 0.5
        assert outage[(1, 20.0)] == pytest.approx(-math.expm1(-3.0 / 100.0), rel=1e-7)

    def test_shipped_power_curves_without_monte_carlo(self, capsys, write_config):
        raw = json.loads((CONFIG_DIR / "outage_vs_power.json").read_text(encoding="utf-8"))
        raw.pop("mc")
        code, out = run_cli(capsys, "sweep", "--config", write_config(raw))
        assert code == 0
        rows = read_table(out)
        assert len(rows) == len(raw["K_list"]) * len(raw["db_grid"])
        assert sorted({int(r["K"]) for r in rows}) == raw["K_list"]
        assert all(r["mc_p_hat"] == "" for r in rows)

    def test_round_list_rejects_per_round_fields(self, capsys, caplog, write_config):
        path = write_config({"K_list": [1, 2], "rho": 0.5, "db_grid": [10], "sigma_sq": [1]})
        code, _ = run_cli(capsys, "sweep", "--config", path)
        assert code == 2
        assert "cannot be combined with K_list" in caplog.text

    def test_unsorted_grid(self, capsys, write_config):
        path = write_config({"K": 2, "rho": 0.5, "db_grid": [10, 5]})
        code, _ = run_cli(capsys, "sweep", "--config", path)
        assert code == 2

    @pytest.mark.slow
    def test_outage_curve_with_monte_carlo(self, capsys):
        code, out = run_cli(capsys, "sweep", "--config", str(CONFIG_DIR / "outage_vs_power.json"))
        assert code == 0
        rows = read_table(out)
        assert len(rows) == 4 * 7
        for r in rows:
            series = float(r["outage_series"])
            p_hat, stderr = float(r["mc_p_hat"]), float(r["mc_stderr"])
            if p_hat * 1_000_000 >= 100:
                assert abs(p_hat - series) <= 4 * stderr + float(r["bound"])


class TestTruncationStudy:
    def test_independent_has_no_error(self, capsys, write_config):
        path = write_config({"K": 2, "rho": 0.0, "p_total_db": 5, "N_list": [0, 3, 6]})
        code, out = run_cli(capsys, "truncation-study", "--config", path)
        assert code == 0
        for r in read_table(out):
            assert float(r["bound"]) == 0.0
            assert float(r["error_vs_reference"]) == 0.0

    def test_bound_covers_error(self, capsys, write_config):
        path = write_config({"K": 4, "rho": 0.9, "p_total_db": 0, "N_list": list(range(11))})
        _, out = run_cli(capsys, "truncation-study", "--config", path)
        rows = read_table(out)
        assert [int(r["N"]) for r in rows] == list(range(11))
        for r in rows:
            assert float(r["error_vs_reference"]) <= float(r["bound"])

    def test_settings_grid(self, capsys):
        code, out = run_cli(capsys, "truncation-study", "--config", str(CONFIG_DIR / "truncation_error.json"))
        assert code == 0
        rows = read_table(out)
        settings = {(float(r["rho"]), float(r["p_total_db"])) for r in rows}
        assert settings == {(0.5, 0.0), (0.5, 10.0), (0.9, 0.0), (0.9, 10.0)}

        relative = {}
        for setting in settings:
            block = [r for r in rows if (float(r["rho"]), float(r["p_total_db"])) == setting]
            assert [int(r["N"]) for r in block] == list(range(11))
            errors = [float(r["error_vs_reference"]) for r in block]
            assert all(b <= a + 1e-15 for a, b in zip(errors, errors[1:]))
            for r in block:
                assert float(r["error_vs_reference"]) <= float(r["bound"])
            relative[setting] = {int(r["N"]): float(r["error_vs_reference"]) / float(r["value"]) for r in block}

        # two layers are enough at moderate correlation and 10 dB
        assert relative[(0.5, 10.0)][2] <= 0.01
        # the tail matters more at strong correlation and at low power
        assert relative[(0.9, 0.0)][5] > relative[(0.9, 10.0)][5] > relative[(0.5, 10.0)][5]
        assert relative[(0.9, 0.0)][5] > relative[(0.5, 0.0)][5]

    def test_rho_list_outside_range(self, capsys, write_config):
        path = write_config({"K": 2, "rho_list": [0.5, 1.0], "p_total_db": 0, "N_list": [0, 1]})
        code, _ = run_cli(capsys, "truncation-study", "--config", path)
        assert code == 2


class TestEllStudy:
    def test_penalty_table(self, capsys):
        code, out = run_cli(capsys, "ell-study", "--config", str(CONFIG_DIR / "ell_vs_rho.json"))
        assert code == 0
        rows = read_table(out)
        assert len(rows) == 60
        assert [(int(r["K"]), float(r["rho"])) for r in rows] == sorted((int(r["K"]), float(r["rho"])) for r in rows)
        for r in rows:
            if float(r["rho"]) == 0.0:
                assert float(r["ell"]) == 1.0
            if r["K"] == "1":
                assert float(r["ell"]) == pytest.approx(1.0, abs=1e-15)
        k4 = [float(r["ell"]) for r in rows if r["K"] == "4"]
        assert all(b < a for a, b in zip(k4, k4[1:]))

    def test_rho_outside_range(self, capsys, write_config):
        path = write_config({"K_list": [2], "rho_grid": [0.5, 1.0]})
        code, _ = run_cli(capsys, "ell-study", "--config", path)
        assert code == 2


class TestDiversity:
    def test_slope_near_K(self, capsys):
        code, out = run_cli(capsys, "diversity", "--config", str(CONFIG_DIR / "diversity_k4.json"), "--format", "json")
        assert code == 0
        summary = json.loads(out)["summary"]
        assert summary["target_K"] == 4
        assert 3.8 <= summary["slope_series"] <= 4.2
        assert summary["slope_asymptotic"] == pytest.approx(4.0, rel=1e-9)

    def test_window_below_high_snr(self, capsys, caplog, write_config):
        path = write_config({"K": 1, "rho": 0.0, "window_db": [-40, -35, -30]})
        code, out = run_cli(capsys, "diversity", "--config", path)
        assert code == 2
        assert out == ""
        assert "high-SNR regime" in caplog.text
        assert "-40.0 dB" in caplog.text

    def test_window_too_short(self, capsys, write_config):
        path = write_config({"K": 2, "rho": 0.5, "window_db": [20, 30]})
        code, _ = run_cli(capsys, "diversity", "--config", path)
        assert code == 2


class TestMonteCarloCommand:
    def test_seed_override(self, capsys, write_config):
        path = write_config({"K": 2, "rho": 0.5, "p_total_db": 0, "mc": {"samples": 50000, "seed": 1}})
        _, base = run_cli(capsys, "mc", "--config", path, "--format", "json")
        _, same = run_cli(capsys, "mc", "--config", path, "--format", "json", "--seed", "1")
        _, other = run_cli(capsys, "mc", "--config", path, "--format", "json", "--seed", "0x2a")
        base, same, other = json.loads(base), json.loads(same), json.loads(other)
        assert base["rows"] == same["rows"]
        assert "seed=42" in other["notes"][0]
        row = other["rows"][0]
        assert row["samples"] == 50000
        assert row["ci95_low"] <= row["p_hat"] <= row["ci95_high"]

    def test_defaults_without_block(self, capsys, write_config):
        path = write_config({"K": 1, "rho": 0.0, "p_total_db": 0})
        code, out = run_cli(capsys, "mc", "--config", path)
        assert code == 0
        (row,) = read_table(out)
        assert int(row["samples"]) == 1_000_000
        assert abs(float(row["p_hat"]) - (1 - math.exp(-3.0))) <= 4 * float(row["stderr"])

    def test_bad_samples(self, capsys, write_config):
        path = write_config({"K": 1, "rho": 0.0, "p_total_db": 0, "mc": {"samples": 0}})
        code, _ = run_cli(capsys, "mc", "--config", path)
        assert code == 2


def test_report_artifacts(capsys, write_config, tmp_path):
    path = write_config({"K": 2, "rho": 0.5, "db_grid": [0, 10]})
    report_dir = tmp_path / "reports"
    code, _ = run_cli(capsys, "sweep", "--config", path, "--report-dir", str(report_dir))
    assert code == 0
    (json_file,) = report_dir.glob("sweep_*.json")
    (html_file,) = report_dir.glob("sweep_*.html")
    assert json.loads(json_file.read_text(encoding="utf-8"))["command"] == "sweep"
    assert "outage_series" in html_file.read_text(encoding="utf-8")
