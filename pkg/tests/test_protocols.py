import math
from dataclasses import replace

import pytest

from tdubench.config import (
    BatteryTestConfig,
    NoiseTestConfig,
    StaticTorqueConfig,
    ThermalConfig,
    VelocitySweepConfig,
    default_config,
)
from tdubench.csvio import column, float_column, read_csv
from tdubench.errors import ProtocolError
from tdubench.protocols import build_rig, run_protocol
from tdubench.protocols.battery import retime_from_rows as battery_retime
from tdubench.protocols.noise import relevel_from_rows
from tdubench.protocols.static_torque import refit_from_rows
from tdubench.protocols.thermal import retime_from_rows as thermal_retime
from tdubench.protocols.velocity import refit_from_rows as bode_refit


def small_cfg():
    cfg = default_config()
    return replace(
        cfg,
        velocity_sweep=VelocitySweepConfig(
            amplitudes=(5.0, 15.0), frequencies=(0.5, 2.0)
        ),
        noise_test=NoiseTestConfig(window_s=5.0, speeds=(5.0, 30.0), settle_s=1.0),
        battery_test=replace(
            cfg.battery_test, loads_kg=(0.0, 2.0), settle_cycles=1, measure_cycles=2
        ),
        static_torque=replace(cfg.static_torque, repetitions=2, settle_s=5.0),
    )


class TestStaticTorque:
    def test_default_measurement_count(self, cfg):
        report = run_protocol("static-torque", cfg, "sim", 1)
        # 8 levels x 5 repetitions x 2 motors
        assert report.metrics["measurements"] == 80
        assert len(report.tables["telemetry"].rows) == 80

    def test_fit_recovers_torque_map(self, cfg):
        report = run_protocol("static-torque", cfg, "sim", 1)
        m1 = report.metrics["fits"]["motor1"]
        m2 = report.metrics["fits"]["motor2"]
        assert m1["slope"] == pytest.approx(0.915, abs=0.01)
        assert m1["intercept"] == pytest.approx(-0.120, abs=0.01)
        assert m2["slope"] == pytest.approx(0.938, abs=0.01)
        assert m1["r_squared"] >= 0.999

    def test_zero_noise_measures_applied_exactly(self):
        cfg = default_config()
        cfg = replace(
            cfg,
            sensor_noise=replace(cfg.sensor_noise, tension_sd_n=0.0),
            static_torque=StaticTorqueConfig(
                torque_levels=(1.0,), repetitions=1, settle_s=1.0, motors=(1,)
            ),
        )
        report = run_protocol("static-torque", cfg, "sim", 1)
        (row,) = report.tables["telemetry"].rows
        assert row[4] == pytest.approx(0.795, abs=1e-9)

    def test_repetition_spread_bounded_by_noise(self, cfg):
        report = run_protocol("static-torque", cfg, "sim", 3)
        rows = report.tables["telemetry"].rows
        sigma_tau = cfg.sensor_noise.tension_sd_n * cfg.static_torque.pulley_radius_m
        import numpy as np

        for motor in (1, 2):
            for level in cfg.static_torque.torque_levels:
                vals = [r[4] for r in rows if r[0] == motor and r[1] == level]
                assert np.std(vals) <= 3.0 * sigma_tau

    def test_self_consistency_from_csv(self, tmp_path, cfg):
        report = run_protocol("static-torque", cfg, "sim", 5)
        report.write(tmp_path)
        header, rows = read_csv(tmp_path / "telemetry.csv")
        refit = refit_from_rows(header, rows)
        assert refit == report.metrics["fits"]


class TestVelocitySweep:
    def test_point_grid_and_self_consistency(self, tmp_path):
        cfg = small_cfg()
        report = run_protocol("velocity-sweep", cfg, "sim", 2)
        bode = report.tables["bode"].rows
        assert len(bode) == 4  # 2 amplitudes x 2 frequencies, averaged
        assert report.metrics["diverged_points"] == []
        report.write(tmp_path)
        header, rows = read_csv(tmp_path / "telemetry.csv")
        refit = bode_refit(header, rows)
        assert [tuple(r) for r in refit] == [tuple(r) for r in bode]

    def test_sampling_respects_fit_preconditions(self):
        cfg = small_cfg()
        report = run_protocol("velocity-sweep", cfg, "sim", 2)
        rows = report.tables["telemetry"].rows
        for freq in (0.5, 2.0):
            sel = sorted(
                r[3] for r in rows if r[1] == freq and r[2] == 1 and r[0] == 5.0
            )
            span = sel[-1] - sel[0]
            rate = (len(sel) - 1) / span
            assert rate > 10.0 * freq
            assert span >= (cfg.velocity_sweep.cycles_per_point - 1) / freq

    def test_per_motor_rows_when_not_averaged(self):
        cfg = small_cfg()
        cfg = replace(
            cfg,
            velocity_sweep=replace(
                cfg.velocity_sweep, average_motors=False, amplitudes=(15.0,)
            ),
        )
        report = run_protocol("velocity-sweep", cfg, "sim", 2)
        assert len(report.tables["bode"].rows) == 4  # 2 freqs x 2 motors

    def test_replay_is_bit_exact(self):
        cfg = small_cfg()
        a = run_protocol("velocity-sweep", cfg, "sim", 9)
        b = run_protocol("velocity-sweep", cfg, "sim", 9)
        assert a.tables["bode"].rows == b.tables["bode"].rows
        assert a.tables["telemetry"].rows == b.tables["telemetry"].rows


class TestThermal:
    def test_no_load_produces_no_rise(self):
        cfg = default_config()
        cfg = replace(
            cfg,
            thermal_test=ThermalConfig(
                hold_torque_nm=0.0,
                pre_settle_s=10.0,
                cool_horizon_s=600.0,
                fan_phases=(True,),
            ),
        )
        report = run_protocol("thermal", cfg, "sim", 4)
        phase = report.metrics["phases"]["fans_on"]
        assert phase["rise_s"] is None
        assert "rise_error" in phase
        assert any("no rise" in n for n in report.notes)
        ambient = cfg.plant.thermal.ambient_c
        for row in report.tables["telemetry"].rows:
            assert abs(max(row[3], row[4]) - ambient) < 1.0

    def test_self_consistency_from_csv(self, tmp_path, cfg):
        report = run_protocol("thermal", cfg, "sim", 4)
        report.write(tmp_path)
        header, rows = read_csv(tmp_path / "telemetry.csv")
        tc = cfg.thermal_test
        redo = thermal_retime(header, rows, tc.cool_to_c, tc.cutoff_temp_c)
        for phase, m in report.metrics["phases"].items():
            assert redo[phase]["rise_s"] == m["rise_s"]
            assert redo[phase]["fall_s"] == m["fall_s"]
            assert redo[phase]["fall_to_mid_s"] == m["fall_to_mid_s"]

    def test_safety_margin_respected(self, cfg):
        report = run_protocol("thermal", cfg, "sim", 4)
        cutoff = cfg.thermal_test.cutoff_temp_c
        assert report.metrics["max_logged_temp_c"] <= cutoff + 5.0


class TestNoise:
    def test_condition_count_and_floor_first(self):
        cfg = default_config()  # 2 + 3 x 6 = 20 rows
        report = run_protocol("noise", cfg, "sim", 6)
        rows = report.tables["levels"].rows
        assert len(rows) == 20
        assert rows[0][0] == "floor"
        assert rows[0][3] is False
        assert all(r[3] is True for r in rows[1:])

    def test_missing_floor_rejected(self):
        cfg = default_config()
        cfg = replace(
            cfg,
            noise_test=NoiseTestConfig(conditions=("fans_only", "motor1")),
        )
        with pytest.raises(ProtocolError):
            run_protocol("noise", cfg, "sim", 6)

    def test_self_consistency_from_csv(self, tmp_path):
        cfg = small_cfg()
        report = run_protocol("noise", cfg, "sim", 6)
        report.write(tmp_path)
        header, rows = read_csv(tmp_path / "telemetry.csv")
        assert relevel_from_rows(header, rows) == report.metrics["levels_db"]


class TestBattery:
    def test_runtimes_decrease_with_load(self):
        cfg = small_cfg()
        report = run_protocol("battery", cfg, "sim", 8)
        runtimes = [c["runtime_s"] for c in report.metrics["conditions"]]
        assert runtimes == sorted(runtimes, reverse=True)
        assert len(runtimes) == 2

    def test_mean_torque_matches_load(self):
        cfg = small_cfg()
        report = run_protocol("battery", cfg, "sim", 8)
        loaded = report.metrics["conditions"][1]
        assert loaded["load_kg"] == 2.0
        assert loaded["mean_torque_nm"] == pytest.approx(0.294, abs=0.02)

    def test_self_consistency_from_csv(self, tmp_path):
        cfg = small_cfg()
        report = run_protocol("battery", cfg, "sim", 8)
        report.write(tmp_path)
        header, rows = read_csv(tmp_path / "discharge.csv")
        redo = battery_retime(header, rows, cfg.battery_test.cutoff_voltage_v)
        for cond in report.metrics["conditions"]:
            key = f"{cond['load_kg']:.9g}"
            assert redo[key] == cond["runtime_s"]

    def test_telemetry_rows_shape(self):
        cfg = small_cfg()
        report = run_protocol("battery", cfg, "sim", 8)
        rows = report.tables["telemetry"].rows
        assert rows, "loaded condition must log telemetry"
        assert all(r[0] == 2.0 for r in rows)
        ts = [r[1] for r in rows if r[2] == 1]
        assert ts == sorted(ts)


class TestFrameBackend:
    def test_velocity_hold_matches_sim_within_wire_precision(self):
        cfg = default_config()
        results = {}
        for backend in ("sim", "frame"):
            rig = build_rig(backend, cfg)
            from tdubench.hal import DriveCommand, DriveMode

            rig.drive.send_command(DriveCommand(1, DriveMode.VELOCITY_PID, 10.0))
            rig.drive.send_command(DriveCommand(2, DriveMode.VELOCITY_PID, 10.0))
            rig.drive.run(0.5)
            results[backend] = rig.drive.sample(1)
        sim, frame = results["sim"], results["frame"]
        # frame telemetry is quantized to binary32
        assert frame.velocity == pytest.approx(sim.velocity, abs=1e-4)
        assert frame.torque == pytest.approx(sim.torque, abs=1e-5)
        assert frame.stator_temp == pytest.approx(sim.stator_temp, abs=0.01)

    def test_static_torque_over_the_wire(self):
        cfg = default_config()
        cfg = replace(
            cfg,
            static_torque=StaticTorqueConfig(
                torque_levels=(0.5, 1.0), repetitions=1, settle_s=1.0
            ),
        )
        report = run_protocol("static-torque", cfg, "frame", 1)
        assert report.backend == "frame"
        assert report.metrics["measurements"] == 4

    def test_streamed_targets_cross_the_codec(self):
        cfg = default_config()
        rig = build_rig("frame", cfg)
        from tdubench.hal import DriveCommand, DriveMode

        rig.drive.send_command(DriveCommand(1, DriveMode.VELOCITY_PID, 0.0))
        rig.drive.send_command(DriveCommand(2, DriveMode.VELOCITY_PID, 0.0))
        sent_before = rig.drive.transport.frames_sent
        rig.drive.run(0.1, targets=lambda t: (5.0, 5.0))
        assert rig.drive.transport.frames_sent - sent_before == 200  # 2 per tick
        assert rig.plant.vel[0] > 1.0


class TestReplay:
    def test_same_seed_reproduces_metrics(self):
        cfg = small_cfg()
        for protocol in ("static-torque", "noise", "battery"):
            a = run_protocol(protocol, cfg, "sim", 12)
            b = run_protocol(protocol, cfg, "sim", 12)
            assert a.metrics == b.metrics

    def test_different_seed_changes_noisy_measurements(self):
        cfg = small_cfg()
        a = run_protocol("static-torque", cfg, "sim", 1)
        b = run_protocol("static-torque", cfg, "sim", 2)
        assert a.tables["telemetry"].rows != b.tables["telemetry"].rows
