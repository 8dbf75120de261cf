"""Scenario parsing, CSV artifacts, exit codes, determinism."""

import json
from dataclasses import replace

import numpy as np
import pytest
import yaml

from clustercache import cli
from clustercache.errors import ConfigError, NumericFailure
from clustercache.cli import (
    default_table1,
    load_scenario,
    run_scenario,
    scenario_to_mapping,
    main,
)


def _tiny_scenario(tmp_path, **overrides):
    base = default_table1()
    from clustercache.model import ContentLibrary
    lib = ContentLibrary.zipf(30, 1.0, 3)
    fields = dict(
        lib=lib,
        grid=(0.5, 1.0),
        tasks=("offload",),
        mc_trials=2000,
        output_dir=str(tmp_path / "out"),
    )
    fields.update(overrides)
    return replace(base, **fields)


class TestDefaultScenario:
    def test_table1_verbatim_conversions(self):
        sc = default_table1()
        assert sc.cfg.theta == 1.0  # 0 dB
        assert sc.cfg.p_b / sc.cfg.p_d == pytest.approx(100.0, rel=1e-12)  # 20 dB
        assert sc.cfg.lambda_p == pytest.approx(2e-5)  # 20 clusters/km^2
        assert sc.cfg.w_total == 20e6
        assert sc.cfg.sigma == 10.0
        assert sc.lib.n_files == 500 and sc.lib.cache_size == 10
        assert sc.lib.mean_size_mbits == 5.0
        assert sc.cfg.n_bar == 5.0 and sc.cfg.alpha == 4.0
        assert sc.zeta_tot == 2.0
        # Access probability sits just above the feasibility bound.
        assert sc.cfg.access_p == pytest.approx(0.1, rel=1e-5)
        assert sc.cfg.access_p > 0.1

    def test_yaml_roundtrip(self, tmp_path):
        sc = default_table1()
        path = tmp_path / "scenario.yaml"
        path.write_text(yaml.safe_dump(scenario_to_mapping(sc)))
        loaded = load_scenario(path)
        assert loaded.cfg == sc.cfg
        assert loaded.grid == sc.grid
        assert loaded.tasks == sc.tasks
        assert np.allclose(loaded.lib.popularity, sc.lib.popularity)


class TestScenarioValidation:
    def test_scenario_invariants(self):
        base = default_table1()
        with pytest.raises(ConfigError):
            replace(base, tasks=())
        with pytest.raises(ConfigError):
            replace(base, tasks=("plot",))
        with pytest.raises(ConfigError):
            replace(base, grid=())
        with pytest.raises(ConfigError):
            replace(base, grid=(2.0, 1.0))
        with pytest.raises(ConfigError):
            replace(base, sweep_variable="bandwidth")

    def test_db_fields_are_exclusive(self, tmp_path):
        mapping = scenario_to_mapping(default_table1())
        mapping["network"]["theta"] = 1.0  # both theta and theta_db present
        path = tmp_path / "bad.yaml"
        path.write_text(yaml.safe_dump(mapping))
        with pytest.raises(ConfigError, match="exactly one"):
            load_scenario(path)

    def test_missing_section_reported(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("name: x\n")
        with pytest.raises(ConfigError, match="network"):
            load_scenario(path)

    def test_unparseable_file(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("{:::")
        with pytest.raises(ConfigError):
            load_scenario(path)


class TestRunScenario:
    def test_offload_task_artifacts(self, tmp_path):
        sc = _tiny_scenario(tmp_path)
        assert run_scenario(sc) == 0
        csv_path = tmp_path / "out" / "table1_offload.csv"
        lines = csv_path.read_text().splitlines()
        assert lines[0] == "# schema=1"
        header = lines[1].split(",")
        assert header == ["value", "prob_r1_gt_r0", "po_pc", "po_zipf",
                          "po_cpf", "error"]
        assert len(lines) == 2 + len(sc.grid)
        for line in lines[2:]:
            cells = line.split(",")
            values = [float(c) for c in cells[:-1]]
            assert all(np.isfinite(values))
            # The optimized scheme dominates both baselines pointwise.
            assert values[2] >= values[3] - 1e-9
            assert values[2] >= values[4] - 1e-9
        summary = json.loads((tmp_path / "out" / "table1_summary.json").read_text())
        assert summary["library_version"]
        assert summary["tasks"]["offload"]["rows"] == len(sc.grid)
        assert len(summary["tasks"]["offload"]["point_wall_times_s"]) == len(sc.grid)

    def test_energy_task_dominance(self, tmp_path):
        sc = _tiny_scenario(tmp_path, tasks=("energy",), grid=(0.5, 1.5))
        assert run_scenario(sc) == 0
        lines = (tmp_path / "out" / "table1_energy.csv").read_text().splitlines()
        for line in lines[2:]:
            value, e_pc, e_zipf, e_cpf = (float(c) for c in line.split(",")[:4])
            assert e_pc <= e_zipf + 1e-9
            assert e_pc <= e_cpf + 1e-9

    def test_infeasible_sweep_points_become_error_rows(self, tmp_path):
        # Sweeping the access probability through infeasible values must
        # not abort the run; those points carry a reason instead.
        sc = _tiny_scenario(tmp_path, sweep_variable="p", grid=(0.05, 0.5))
        assert run_scenario(sc) == 0
        lines = (tmp_path / "out" / "table1_offload.csv").read_text().splitlines()
        first = lines[2].split(",")
        assert "InfeasibleAccessProbability" in first[-1]
        assert first[1] == ""  # no numeric cell fabricated
        second = lines[3].split(",")
        assert second[-1] == ""
        assert float(second[2]) > 0

    def test_jobs_do_not_change_output(self, tmp_path):
        sc1 = _tiny_scenario(tmp_path, output_dir=str(tmp_path / "a"))
        sc2 = _tiny_scenario(tmp_path, output_dir=str(tmp_path / "b"))
        run_scenario(sc1, jobs=1)
        run_scenario(sc2, jobs=2)
        a = (tmp_path / "a" / "table1_offload.csv").read_bytes()
        b = (tmp_path / "b" / "table1_offload.csv").read_bytes()
        assert a == b

    def test_validate_rows_and_determinism(self, tmp_path):
        # Byte-identical CSVs for identical seeds; trial count kept small
        # here (the full-size determinism run is an acceptance criterion).
        sc = replace(default_table1(), mc_trials=3000,
                     output_dir=str(tmp_path / "v1"))
        code = run_scenario(sc)
        first = (tmp_path / "v1" / "table1_validate.csv").read_bytes()
        sc2 = replace(sc, output_dir=str(tmp_path / "v2"))
        run_scenario(sc2)
        second = (tmp_path / "v2" / "table1_validate.csv").read_bytes()
        assert first == second
        assert code in (0, 4)  # 3000 trials may legitimately miss 2%
        other = replace(sc, seed=1, output_dir=str(tmp_path / "v3"))
        run_scenario(other)
        third = (tmp_path / "v3" / "table1_validate.csv").read_bytes()
        assert third != first


class TestMainEntryPoint:
    def test_print_default_config(self, capsys):
        assert main(["print-default-config"]) == 0
        out = capsys.readouterr().out
        parsed = yaml.safe_load(out)
        assert parsed["network"]["theta_db"] == 0.0
        assert "theta" not in parsed["network"]

    def test_config_error_exit_code(self, tmp_path, capsys):
        bad = tmp_path / "bad.yaml"
        bad.write_text("network: {}\nlibrary: {}\n")
        assert main(["run", str(bad)]) == 2

    def test_missing_file_exit_code(self, tmp_path):
        assert main(["run", str(tmp_path / "nope.yaml")]) == 2

    def test_validation_failure_exit_code(self, tmp_path, monkeypatch):
        failing_row = {
            "quantity": "forced", "analytic": 1.0, "mc_mean": 0.0,
            "mc_hw95": 0.0, "pass": False, "error": "",
        }
        monkeypatch.setattr(cli, "_validate_rows", lambda scenario: [failing_row])
        assert main(["validate", "--out", str(tmp_path)]) == 4

    def test_numeric_failure_marks_row_and_exit_code(self, tmp_path, monkeypatch):
        def boom(scenario, value):
            raise NumericFailure("synthetic quadrature failure")

        monkeypatch.setitem(cli._POINT_FUNCTIONS, "offload", boom)
        sc = _tiny_scenario(tmp_path)
        assert run_scenario(sc) == 3
        lines = (tmp_path / "out" / "table1_offload.csv").read_text().splitlines()
        assert "numeric-failure" in lines[2]
