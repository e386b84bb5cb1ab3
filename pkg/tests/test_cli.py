"""Command-line front end: configs, outputs, determinism, exit codes."""

import json

import pytest

from nmtraj.cli import ScenarioConfig, default_scenario_dict, main


def write_config(tmp_path, overrides=None, a=0.5):
    cfg = default_scenario_dict(a)
    cfg["run"]["n_samples"] = 60
    cfg["run"]["master_seed"] = 3
    if overrides:
        for dotted, value in overrides.items():
            node = cfg
            *parents, leaf = dotted.split(".")
            for key in parents:
                node = node[key]
            node[leaf] = value
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(cfg, indent=2, sort_keys=True))
    return path


class TestScenarioConfig:
    def test_round_trip_identity(self):
        raw = default_scenario_dict(0.3)
        emitted = ScenarioConfig.from_dict(raw).to_json()
        again = ScenarioConfig.from_dict(json.loads(emitted)).to_json()
        assert emitted == again

    def test_error_names_offending_field(self):
        raw = default_scenario_dict()
        raw["system"]["hamiltonian"][1] = [0.0, 1.0]  # breaks Hermiticity
        with pytest.raises(ValueError, match="system"):
            ScenarioConfig.from_dict(raw)
        raw = default_scenario_dict()
        raw["system"]["initial_ket"] = [[1.0, 0.0], [1.0, 0.0]]
        with pytest.raises(ValueError, match="initial_ket"):
            ScenarioConfig.from_dict(raw)
        raw = default_scenario_dict()
        raw["run"]["mode"] = "exact"
        with pytest.raises(ValueError, match="run.mode"):
            ScenarioConfig.from_dict(raw)

    def test_strategy_alias(self):
        raw = default_scenario_dict()
        raw["strategy"]["type"] = "diosi_monitoring"
        assert ScenarioConfig.from_dict(raw).strategy.kind == "monitoring"


class TestSimulate:
    def test_csv_and_json_agree_fieldwise(self, tmp_path):
        cfg_path = write_config(tmp_path)
        out_csv = tmp_path / "out.csv"
        out_json = tmp_path / "out.json"
        assert main(["simulate", "--config", str(cfg_path),
                     "--out", str(out_csv)]) == 0
        assert main(["simulate", "--config", str(cfg_path), "--format", "json",
                     "--out", str(out_json)]) == 0

        doc = json.loads(out_json.read_text())
        lines = out_csv.read_text().splitlines()
        traj_header = lines[1].split(",")
        first_row = dict(zip(traj_header, lines[2].split(",")))
        assert first_row["observable"] == doc["trajectory"][0]["observable"]
        assert float(first_row["purity"]) == doc["trajectory"][0]["purity"]
        ens_idx = lines.index("# ensemble")
        ens = dict(zip(lines[ens_idx + 1].split(","), lines[ens_idx + 2].split(",")))
        assert float(ens["trace_distance_to_reference"]) == (
            doc["ensemble"]["trace_distance_to_reference"]
        )
        assert int(ens["n_samples"]) == doc["ensemble"]["n_samples"]

    def test_byte_identical_reruns(self, tmp_path):
        cfg_path = write_config(tmp_path)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(["simulate", "--config", str(cfg_path), "--out", str(a)]) == 0
        assert main(["simulate", "--config", str(cfg_path), "--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_config_error_exit_2(self, tmp_path):
        cfg_path = write_config(tmp_path, {"run.mode": "bogus"})
        assert main(["simulate", "--config", str(cfg_path)]) == 2
        assert main(["simulate", "--config", str(tmp_path / "missing.json")]) == 2

    def test_non_pd_kernel_exit_3(self, tmp_path):
        cfg_path = write_config(tmp_path, a=1.0)
        assert main(["simulate", "--config", str(cfg_path)]) == 3

    def test_quadrature_mode(self, tmp_path):
        cfg_path = write_config(
            tmp_path,
            {"run.mode": "quadrature", "run.points_per_axis": 61,
             "strategy.type": "all_at_once"},
        )
        out = tmp_path / "q.csv"
        assert main(["simulate", "--config", str(cfg_path), "--out", str(out)]) == 0
        text = out.read_text()
        assert "# ensemble" in text


class TestPaperExample:
    def test_outputs_and_pattern(self, tmp_path):
        out = tmp_path / "pe"
        assert main(["paper-example", "--samples", "50", "--points", "41",
                     "--out", str(out)]) == 0
        lines = (out / "compare.csv").read_text().splitlines()
        header = lines[0].split(",")
        rows = [dict(zip(header, ln.split(","))) for ln in lines[1:]]
        assert len(rows) == 8  # 4 strategies x {a, 0}
        by_key = {(r["a"], r["strategy"]): r for r in rows}
        # pure all-at-once, mixed monitoring with a nonzero trace distance
        assert float(by_key[("0.5", "all_at_once")]["mean_purity"]) > 1 - 1e-10
        assert float(by_key[("0.5", "monitoring")]["min_purity"]) < 1 - 1e-3
        td = float(by_key[("0.5", "monitoring")]["trace_distance_to_reference"])
        assert td > 1e-3
        assert float(by_key[("0", "monitoring")]["trace_distance_to_reference"]) < 1e-8
        # a=0 rows: monitoring and all_at_once agree within tolerance
        for col in ("mean_purity", "trace_distance_to_reference"):
            assert abs(float(by_key[("0", "monitoring")][col])
                       - float(by_key[("0", "all_at_once")][col])) < 1e-8
        hist = (out / "purity_hist.csv").read_text().splitlines()
        assert hist[0] == "a,strategy,bin_lo,bin_hi,count"
        assert len(hist) == 1 + 8 * 20

    def test_deterministic(self, tmp_path):
        out1, out2 = tmp_path / "p1", tmp_path / "p2"
        args = ["paper-example", "--samples", "30", "--points", "41"]
        assert main(args + ["--out", str(out1)]) == 0
        assert main(args + ["--out", str(out2)]) == 0
        assert (out1 / "compare.csv").read_bytes() == (out2 / "compare.csv").read_bytes()
        assert (out1 / "purity_hist.csv").read_bytes() == (
            out2 / "purity_hist.csv"
        ).read_bytes()

    def test_a_out_of_range_exit_2(self, tmp_path):
        assert main(["paper-example", "--a", "-0.2",
                     "--out", str(tmp_path / "x")]) == 2

    def test_a_one_exit_3(self, tmp_path):
        assert main(["paper-example", "--a", "1.0",
                     "--out", str(tmp_path / "x")]) == 3


class TestSweep:
    def test_monitoring_distance_increases_with_a(self, tmp_path):
        out = tmp_path / "sweep.csv"
        assert main(["sweep", "--param", "a", "--grid", "0,0.25,0.5,0.75",
                     "--samples", "20", "--points", "41", "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        header = lines[0].split(",")
        rows = [dict(zip(header, ln.split(","))) for ln in lines[1:]]
        tds = [float(r["trace_distance_to_reference"]) for r in rows
               if r["strategy"] == "monitoring"]
        assert tds[0] < 1e-8
        assert all(b > a for a, b in zip(tds, tds[1:]))

    def test_empty_grid_exit_2(self, tmp_path):
        assert main(["sweep", "--param", "a", "--grid", "",
                     "--out", str(tmp_path / "s.csv")]) == 2

    def test_single_point_matches_compare(self, tmp_path):
        out = tmp_path / "one.csv"
        assert main(["sweep", "--param", "a", "--grid", "0.5", "--samples", "25",
                     "--points", "41", "--seed", "99", "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert len(lines) == 5  # header + 4 strategies


class TestCheckCovariance:
    def test_runs_and_reports(self, tmp_path, capsys):
        out = tmp_path / "cov.csv"
        assert main(["check-covariance", "--samples", "4000", "--seed", "2",
                     "--out", str(out)]) == 0
        captured = capsys.readouterr().out
        assert "within 3 sigma" in captured
        lines = out.read_text().splitlines()
        assert lines[0] == "l,m,empirical,expected,std_error,sigma_units"
        assert len(lines) == 5  # header + 2x2 entries
