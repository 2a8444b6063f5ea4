"""Thermal stress and cooling test.

The two motors are coupled back-to-back through a redirect pulley: motor 1
holds a constant torque while motor 2 tracks a position sinusoid, spreading
the heating over all windings.  Each fan phase pre-settles, heats until the
first stator reaches the cutoff, then releases the load and logs the cooldown.

Heating and cooling advance on the accelerated clock: a few detailed cycles
establish the mean copper loss, after which the exact exponential stator
model is stepped at one-second resolution (the loss is load-dependent, not
temperature-dependent, so the fast-forward is exact).
"""

from __future__ import annotations

import math

from ..analysis import time_to_threshold
from ..config import ToolkitConfig
from ..csvio import THERMAL_CURVE_COLUMNS, q
from ..errors import NotReachedError, ProtocolError
from ..hal import DriveCommand, DriveMode, Rig
from ..plant import COUPLED, FREE, Fixture
from .base import TestReport

SAFETY_MARGIN_C = 5.0
DETAIL_SETTLE_CYCLES = 1
DETAIL_MEASURE_CYCLES = 2
REPORT_MID_THRESHOLD_C = 40.0  # secondary cooling checkpoint


def _phase_label(fans_on: bool) -> str:
    return "fans_on" if fans_on else "fans_off"


def run_thermal(cfg: ToolkitConfig, rig: Rig, rng) -> TestReport:
    tc = cfg.thermal_test
    tc.validate()
    report = TestReport(protocol="thermal", backend=rig.backend, seed=0, config=cfg)
    curves = report.table("telemetry", THERMAL_CURVE_COLUMNS)
    drive = rig.drive
    plant = rig.plant
    temp_sd = cfg.sensor_noise.temperature_sd_c
    cutoff = tc.cutoff_temp_c
    period = tc.position_period_s
    max_seen = [0.0]

    def log_row(phase: str, segment: str, t: float) -> None:
        m1 = q(plant.temp[0] + rng.normal(0.0, temp_sd))
        m2 = q(plant.temp[1] + rng.normal(0.0, temp_sd))
        peak = max(m1, m2)
        if peak > max_seen[0]:
            max_seen[0] = peak
        curves.rows.append((phase, segment, q(t), m1, m2))
        if peak > cutoff + SAFETY_MARGIN_C:
            raise ProtocolError(
                f"stator temperature {peak:.1f} degC overshot the "
                f"{cutoff:g} degC cutoff by more than {SAFETY_MARGIN_C:g} degC"
            )

    phases = []
    for fans_on in tc.fan_phases:
        phase = _phase_label(fans_on)
        drive.set_fans(fans_on)
        rig.attach(Fixture(kind=FREE))
        rig.zero_motion()
        drive.send_command(DriveCommand(1, DriveMode.IDLE, 0.0))
        drive.send_command(DriveCommand(2, DriveMode.IDLE, 0.0))
        rig.fast_forward(tc.pre_settle_s, dt=1.0)

        # heating under the coupled dynamic load
        rig.attach(Fixture(kind=COUPLED))
        drive.send_command(DriveCommand(1, DriveMode.TORQUE, tc.hold_torque_nm))
        drive.send_command(DriveCommand(2, DriveMode.POSITION_PID, 0.0))
        t0 = drive.time()
        two_pi = 2.0 * math.pi

        def targets(t: float):
            ref = tc.position_amplitude_rad * math.sin(two_pi * (t - t0) / period)
            return tc.hold_torque_nm, ref

        dt = plant.params.dt
        ticks_per_s = int(round(1.0 / dt))
        drive.run(DETAIL_SETTLE_CYCLES * period, targets=targets)
        acc = [0.0, 0.0, 0]

        def accumulate(t: float) -> None:
            acc[0] += plant.loss_w[0]
            acc[1] += plant.loss_w[1]
            acc[2] += 1
            if acc[2] % ticks_per_s == 0:
                log_row(phase, "heat", t)

        drive.run(
            DETAIL_MEASURE_CYCLES * period, targets=targets, on_tick=accumulate
        )
        losses = (acc[0] / acc[2], acc[1] / acc[2])

        heat_horizon = tc.cool_horizon_s
        rig.fast_forward(
            heat_horizon,
            motor_losses_w=losses,
            dt=1.0,
            on_sample=lambda t: log_row(phase, "heat", t),
            stop=lambda: max(plant.temp) >= cutoff,
        )
        reached = max(plant.temp) >= cutoff
        if not reached:
            report.notes.append(
                f"{phase}: cutoff {cutoff:g} degC not reached within "
                f"{heat_horizon:g} s (no rise)"
            )

        # release the load and cool
        drive.send_command(DriveCommand(1, DriveMode.IDLE, 0.0))
        drive.send_command(DriveCommand(2, DriveMode.IDLE, 0.0))
        rig.attach(Fixture(kind=FREE))
        rig.zero_motion()
        rig.fast_forward(
            tc.cool_horizon_s,
            dt=1.0,
            on_sample=lambda t: log_row(phase, "cool", t),
            stop=lambda: max(plant.temp) <= tc.cool_to_c,
        )
        phases.append((phase, fans_on, losses))

    metrics = {"phases": {}, "max_logged_temp_c": max_seen[0]}
    for phase, fans_on, losses in phases:
        heat_t = [r[2] for r in curves.rows if r[0] == phase and r[1] == "heat"]
        heat_v = [max(r[3], r[4]) for r in curves.rows if r[0] == phase and r[1] == "heat"]
        cool_t = [r[2] for r in curves.rows if r[0] == phase and r[1] == "cool"]
        cool_v = [max(r[3], r[4]) for r in curves.rows if r[0] == phase and r[1] == "cool"]
        entry = {
            "fans_on": fans_on,
            "mean_loss_w": [q(losses[0]), q(losses[1])],
            "rise_s": None,
            "fall_s": None,
            "fall_to_mid_s": None,
            "thresholds_c": {
                "low": tc.cool_to_c,
                "mid": REPORT_MID_THRESHOLD_C,
                "high": cutoff,
            },
        }
        try:
            entry["rise_s"] = q(
                time_to_threshold(heat_t, heat_v, tc.cool_to_c, cutoff)
            )
        except NotReachedError as e:
            entry["rise_error"] = f"not reached (last {e.last_value})"
        try:
            entry["fall_s"] = q(
                time_to_threshold(cool_t, cool_v, cutoff, tc.cool_to_c)
            )
        except NotReachedError as e:
            entry["fall_error"] = f"not reached (last {e.last_value})"
        try:
            entry["fall_to_mid_s"] = q(
                time_to_threshold(cool_t, cool_v, cutoff, REPORT_MID_THRESHOLD_C)
            )
        except NotReachedError:
            pass
        metrics["phases"][phase] = entry
    report.metrics = metrics
    return report


def retime_from_rows(header, rows, low: float, high: float) -> dict:
    """Recompute rise/fall times from parsed curve rows (self-consistency)."""
    idx = {name: list(header).index(name) for name in THERMAL_CURVE_COLUMNS}
    out: dict[str, dict] = {}
    for phase in dict.fromkeys(r[idx["phase"]] for r in rows):
        entry = {}
        for segment, a, b, key in (
            ("heat", low, high, "rise_s"),
            ("cool", high, low, "fall_s"),
            ("cool", high, REPORT_MID_THRESHOLD_C, "fall_to_mid_s"),
        ):
            sel = [
                r for r in rows if r[idx["phase"]] == phase and r[idx["segment"]] == segment
            ]
            t = [float(r[idx["t_s"]]) for r in sel]
            v = [
                max(float(r[idx["motor1_temp_c"]]), float(r[idx["motor2_temp_c"]]))
                for r in sel
            ]
            try:
                entry[key] = q(time_to_threshold(t, v, a, b))
            except NotReachedError:
                entry[key] = None
        out[phase] = entry
    return out
