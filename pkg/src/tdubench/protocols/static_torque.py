"""Open-loop static torque test.

Each motor in turn is cabled to a rigid crane scale through its pulley and
commanded through a ladder of fixed torques.  After every settle period the
scale tension is read and converted back to shaft torque, and the measured
vs commanded relationship is fitted per motor with ordinary least squares.
"""

from __future__ import annotations

from ..analysis import linear_fit
from ..config import ToolkitConfig
from ..csvio import STATIC_COLUMNS, q
from ..errors import DriveFault
from ..hal import DriveCommand, DriveMode, Rig
from ..plant import Fixture, LOCKED
from .base import TestReport


def run_static_torque(cfg: ToolkitConfig, rig: Rig, rng) -> TestReport:
    sc = cfg.static_torque
    sc.validate()
    report = TestReport(
        protocol="static-torque", backend=rig.backend, seed=0, config=cfg
    )
    table = report.table("telemetry", STATIC_COLUMNS)
    drive = rig.drive
    tension_sd = cfg.sensor_noise.tension_sd_n

    rig.attach(Fixture(kind=LOCKED, pulley_radius=sc.pulley_radius_m))
    if rig.plant.state().fans_on is False:
        drive.set_fans(True)

    # motors run sequentially so the scale channel is unambiguous
    for motor_id in sc.motors:
        for level in sc.torque_levels:
            drive.send_command(DriveCommand(motor_id, DriveMode.TORQUE, level))
            for rep in range(1, sc.repetitions + 1):
                # two control ticks latch and apply the command; the rest of
                # the settle window runs on the accelerated clock
                drive.run(2 * rig.plant.params.dt)
                losses = (rig.plant.loss_w[0], rig.plant.loss_w[1])
                rig.fast_forward(
                    sc.settle_s, motor_losses_w=losses, dt=0.5
                )
                tension = q(
                    rig.read_tension(motor_id) + rng.normal(0.0, tension_sd)
                )
                measured = q(tension * sc.pulley_radius_m)
                table.rows.append((motor_id, q(level), rep, tension, measured))
        drive.send_command(DriveCommand(motor_id, DriveMode.IDLE, 0.0))

    fits = {}
    for motor_id in sc.motors:
        pts = [
            (row[1], row[4]) for row in table.rows if row[0] == motor_id
        ]
        if len({x for x, _ in pts}) < 2:
            fits[f"motor{motor_id}"] = None
            report.notes.append(
                f"motor {motor_id}: fewer than two torque levels, no regression"
            )
            continue
        fit = linear_fit(pts)
        fits[f"motor{motor_id}"] = {
            "slope": fit.slope,
            "intercept": fit.intercept,
            "r_squared": fit.r_squared,
            "points": len(pts),
        }
    report.metrics = {
        "fits": fits,
        "measurements": len(table.rows),
        "pulley_radius_m": sc.pulley_radius_m,
    }
    if rig.plant.depleted:
        raise DriveFault("pack depleted during static test")
    return report


def refit_from_rows(header, rows) -> dict:
    """Recompute the per-motor fits from parsed CSV rows (self-consistency)."""
    im = list(header).index("motor_id")
    ic = list(header).index("commanded_nm")
    iy = list(header).index("measured_nm")
    out = {}
    for motor_id in sorted({r[im] for r in rows}):
        pts = [
            (float(r[ic]), float(r[iy])) for r in rows if r[im] == motor_id
        ]
        fit = linear_fit(pts)
        out[f"motor{motor_id}"] = {
            "slope": fit.slope,
            "intercept": fit.intercept,
            "r_squared": fit.r_squared,
            "points": len(pts),
        }
    return out
