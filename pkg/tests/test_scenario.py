import csv

import numpy as np
import pytest

from smecplan.energymodel import Plan
from smecplan.optimizer import optimal_frequencies
from smecplan.scenario import (
    InconsistencyError,
    LabeledResult,
    ScenarioConfig,
    SchemaError,
    Task,
    TopologyMode,
    builtin_scenarios,
    emit_results,
    lapalma_widths,
    load_scenario,
    load_width_profile,
    save_scenario,
)


class TestLoadScenario:
    def test_empty_file_gives_defaults(self, tmp_path):
        path = tmp_path / "empty.toml"
        path.write_text("")
        cfg = load_scenario(path)
        assert cfg.constellation.n_sats == 20
        assert cfg.constellation.altitude_m == 600e3
        assert cfg.compute.f_cpu_hz == 1.8e9
        assert cfg.compute.n_cores == 4
        assert cfg.compute.p_proc_max_w == 10.0
        assert cfg.link.isl_rate_bps == 10e9
        assert cfg.link.isl_power_w == 60.0
        assert cfg.link.tx_power_rf_w == 10.0
        assert cfg.link.carrier_hz == 20e9
        assert cfg.link.bandwidth_hz == 500e6
        assert cfg.link.gain_tx_dbi == 32.13
        assert cfg.link.gain_rx_dbi == 34.20
        assert cfg.link.noise_power_dbw == -119.32
        assert cfg.imaging.gsd_m == 0.5
        assert cfg.compute.rho_max == 20.0
        assert cfg.compute.epsilon == 0.1

    def test_partial_override(self, tmp_path):
        path = tmp_path / "s.toml"
        path.write_text("[constellation]\nn_sats = 40\n\n[task]\nframe_widths = [2, 3]\nsource_sat = 7\n")
        cfg = load_scenario(path)
        assert cfg.constellation.n_sats == 40
        assert cfg.task.frame_widths == (2, 3)
        assert cfg.task.source_sat == 7
        assert cfg.link.isl_rate_bps == 10e9  # untouched default

    def test_source_outside_ring_is_inconsistent(self, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text("[constellation]\nn_sats = 4\n\n[task]\nsource_sat = 9\n")
        with pytest.raises(InconsistencyError):
            load_scenario(path)

    def test_eta_out_of_range_is_schema_error(self, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text("[link]\nisl_tx_fraction = 1.4\n")
        with pytest.raises(SchemaError):
            load_scenario(path)

    def test_unknown_section_rejected(self, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text("[warp_drive]\nspeed = 9\n")
        with pytest.raises(SchemaError):
            load_scenario(path)

    def test_unparseable_value_names_location(self, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text("[task]\nsource_sat = banana\n")
        with pytest.raises(SchemaError, match="bad.toml:2"):
            load_scenario(path)

    def test_widths_file_reference(self, tmp_path):
        (tmp_path / "widths.txt").write_text("3\n1\n# comment\n2\n")
        path = tmp_path / "s.toml"
        path.write_text('[task]\nframe_widths_file = "widths.txt"\n')
        cfg = load_scenario(path)
        assert cfg.task.frame_widths == (3, 1, 2)

    def test_round_trip_identity(self, tmp_path):
        original = ScenarioConfig(
            task=Task(source_sat=3, frame_widths=(1, 0, 4)),
            topology_mode=TopologyMode.V_D_OFFSET,
            vd_offset_hops=2,
        )
        p1, p2 = tmp_path / "a.toml", tmp_path / "b.toml"
        save_scenario(original, p1)
        loaded = load_scenario(p1)
        assert loaded == original
        save_scenario(loaded, p2)
        assert load_scenario(p2) == loaded
        assert p1.read_text() == p2.read_text()

    def test_optimizer_options_round_trip(self, tmp_path):
        path = tmp_path / "s.toml"
        path.write_text("[optimizer]\ndelta = 0.0001\nouter_cap = 50\n")
        cfg = load_scenario(path)
        assert dict(cfg.optimizer_options) == {"delta": 0.0001, "outer_cap": 50}


class TestBuiltins:
    def test_catalog_contents(self):
        names = set(builtin_scenarios())
        assert {"default", "lapalma", "empty-frames-v0", "empty-frames-v5", "empty-task"} <= names
        assert {"sweep-v0-eta1", "sweep-v0-eta01", "sweep-v5-eta1", "sweep-v5-eta01"} <= names

    def test_lapalma_shape(self):
        widths = lapalma_widths()
        assert len(widths) == 82
        assert max(widths) == 29
        assert min(widths) == 1

    def test_lapalma_duration(self):
        cfg = builtin_scenarios()["lapalma"]
        duration = len(cfg.task.frame_widths) * cfg.gtfp_s()
        assert duration == pytest.approx(6.4, abs=0.2)

    def test_lapalma_total_width_is_stable(self):
        assert sum(lapalma_widths()) == sum(builtin_scenarios()["lapalma"].task.frame_widths)

    def test_empty_task_entry(self):
        cfg = builtin_scenarios()["empty-task"]
        assert sum(cfg.task.frame_widths) == 0

    def test_width_profile_loader_rejects_empty(self, tmp_path):
        path = tmp_path / "widths.txt"
        path.write_text("# only comments\n")
        with pytest.raises(SchemaError):
            load_width_profile(path)


class TestEmitResults:
    def _plan(self, cfg, w=2):
        x = np.zeros((1, 21))
        x[0, 5] = w * 49_766_400.0
        rho = np.array([2.0])
        f, _ = optimal_frequencies(x, rho, cfg.compute, cfg.gtfp_s())
        plan = Plan(X=x, rho=rho, F=f, feasible=True)
        plan.energy_breakdown = {"scatter": 0.0, "gather": 0.25, "proc": 0.05}
        plan.trace = [
            {
                "iteration": 0,
                "objective_j": 0.3,
                "proc_residual": -0.5,
                "downlink_residual": -0.9,
                "isl_residual": -1.0,
                "dx": 0.1,
                "drho": 0.0,
            }
        ]
        return plan

    def test_summary_columns_and_values(self, tmp_path):
        cfg = ScenarioConfig()
        plan = self._plan(cfg)
        rows = [
            LabeledResult("demo", "global", "W=2", 2, plan=plan),
            LabeledResult("demo", "direct", "W=9", 9, infeasible_binding="downlink"),
            LabeledResult("demo", "local", "W=1", 1, error="ValueError: boom"),
        ]
        paths = emit_results(rows, tmp_path / "out")
        with open(paths["summary"]) as fh:
            recs = list(csv.DictReader(fh))
        assert len(recs) == 3
        ok = recs[0]
        assert ok["feasible"] == "yes"
        assert float(ok["total_j"]) == pytest.approx(0.30)
        assert float(ok["j_per_image"]) == pytest.approx(0.15)  # total / image count
        assert float(ok["rho_min"]) == 2.0
        bad = recs[1]
        assert bad["feasible"] == "no"
        assert bad["violated"] == "downlink"
        assert bad["total_j"] == ""
        assert recs[2]["feasible"] == "error"

    def test_allocation_rows_reconstruct_frame(self, tmp_path):
        cfg = ScenarioConfig()
        plan = self._plan(cfg, w=3)
        paths = emit_results([LabeledResult("demo", "global", "W=3", 3, plan=plan)], tmp_path / "out")
        with open(paths["allocation"]) as fh:
            recs = list(csv.DictReader(fh))
        total = sum(float(r["x_bits"]) for r in recs if r["k"] == "0")
        assert total == pytest.approx(3 * 49_766_400.0, rel=1e-9)

    def test_trace_rows_emitted(self, tmp_path):
        cfg = ScenarioConfig()
        paths = emit_results(
            [LabeledResult("demo", "global", "W=2", 2, plan=self._plan(cfg))], tmp_path / "out"
        )
        with open(paths["trace"]) as fh:
            recs = list(csv.DictReader(fh))
        assert recs and recs[0]["iteration"] == "0"


class TestCalibration:
    def test_first_slot_rate_is_edge_rate(self):
        from smecplan.scenario import build_snapshots

        for mode, hops in ((TopologyMode.V_D_EQUALS_V0, 0), (TopologyMode.V_D_OFFSET, 5)):
            cfg = ScenarioConfig(topology_mode=mode, vd_offset_hops=hops)
            snap = build_snapshots(cfg)[0]
            assert snap.downlink_rate_bps == pytest.approx(2.16e9, rel=1e-12)
            assert snap.dest_sat == (5 + hops) % 20

    def test_destination_approaches_over_task(self):
        from smecplan import orbital
        from smecplan.scenario import calibrate_geometry
        from smecplan.linkbudget import RateTable

        cfg = ScenarioConfig(task=Task(frame_widths=(1,) * 82))
        con = calibrate_geometry(cfg, RateTable.shannon_default())
        d0 = orbital.slant_distance(con, 5, 0.0)
        d1 = orbital.slant_distance(con, 5, 82 * cfg.gtfp_s())
        assert d1 < d0  # moving toward the coverage center
