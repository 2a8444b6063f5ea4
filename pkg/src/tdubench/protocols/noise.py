"""Acoustic noise test.

Measures the equivalent continuous sound pressure level over a fixed window
for each condition: room floor (unit off), fans only, then each motor alone
and both together across the speed ladder.  Every non-floor level has the
room floor subtracted energetically.  Fans stay on for the motor conditions.
"""

from __future__ import annotations

import math

from ..analysis import leq_subtract
from ..config import ToolkitConfig
from ..csvio import NOISE_LEVEL_COLUMNS, NOISE_RECORD_COLUMNS, q
from ..errors import ProtocolError
from ..hal import DriveCommand, DriveMode, Rig
from ..plant import FREE, Fixture, sound_level
from .base import TestReport

RECORD_HZ = 100.0


def _leq(levels_db) -> float:
    return 10.0 * math.log10(
        sum(10.0 ** (l / 10.0) for l in levels_db) / len(levels_db)
    )


def run_noise(cfg: ToolkitConfig, rig: Rig, rng) -> TestReport:
    nc = cfg.noise_test
    nc.validate()
    if "floor" not in nc.conditions:
        raise ProtocolError(
            "noise test needs the room-floor condition before any subtraction"
        )
    report = TestReport(protocol="noise", backend=rig.backend, seed=0, config=cfg)
    record = report.table("telemetry", NOISE_RECORD_COLUMNS)
    levels = report.table("levels", NOISE_LEVEL_COLUMNS)
    drive = rig.drive
    plant = rig.plant
    sd = cfg.sensor_noise.acoustic_sd_db
    rig.attach(Fixture(kind=FREE))
    divisor = max(1, int(round(1.0 / (plant.params.dt * RECORD_HZ))))

    def measure(condition: str, speed: float, fans_on: bool, spin: tuple[int, ...]):
        """Run one condition and return its per-sample Leq."""
        drive.set_fans(fans_on)
        rig.zero_motion()
        for motor_id in (1, 2):
            if motor_id in spin:
                drive.send_command(
                    DriveCommand(motor_id, DriveMode.VELOCITY_PID, speed)
                )
            else:
                drive.send_command(DriveCommand(motor_id, DriveMode.IDLE, 0.0))
        if spin:
            drive.run(nc.settle_s)
        samples: list[float] = []
        spd = q(speed)

        def log(t: float) -> None:
            # with fans off and both motors at rest the mic sees the bare
            # room floor, which doubles as the unit-off condition
            level = q(plant.mic_level() + rng.normal(0.0, sd))
            samples.append(level)
            record.rows.append((condition, spd, q(t), level))

        drive.run(nc.window_s, on_tick=log, tick_divisor=divisor)
        for motor_id in spin:
            drive.send_command(DriveCommand(motor_id, DriveMode.IDLE, 0.0))
        return q(_leq(samples))

    # the floor is always captured first; it calibrates every other row
    floor_leq = measure("floor", 0.0, fans_on=False, spin=())
    levels.rows.append(("floor", 0.0, floor_leq, False))

    table_rows = {"floor": {"0": floor_leq}}
    for condition in nc.conditions:
        if condition == "floor":
            continue
        speeds = (0.0,) if condition == "fans_only" else nc.speeds
        spin = {
            "fans_only": (),
            "motor1": (1,),
            "motor2": (2,),
            "both": (1, 2),
        }[condition]
        table_rows[condition] = {}
        for speed in speeds:
            leq = measure(condition, speed, fans_on=True, spin=spin)
            corrected = q(leq_subtract(leq, floor_leq))
            levels.rows.append((condition, q(speed), corrected, True))
            table_rows[condition][f"{speed:g}"] = corrected

    report.metrics = {
        "window_s": nc.window_s,
        "floor_db": floor_leq,
        "levels_db": table_rows,
        "measurements": len(levels.rows),
    }
    return report


def relevel_from_rows(header, rows) -> dict:
    """Recompute the level table from the raw record (self-consistency)."""
    idx = {name: list(header).index(name) for name in NOISE_RECORD_COLUMNS}
    grouped: dict[tuple[str, str], list[float]] = {}
    order: list[tuple[str, str]] = []
    for r in rows:
        key = (r[idx["condition"]], r[idx["speed_rad_s"]])
        if key not in grouped:
            grouped[key] = []
            order.append(key)
        grouped[key].append(float(r[idx["level_db"]]))
    floor = None
    out = {}
    for key in order:
        leq = q(_leq(grouped[key]))
        if key[0] == "floor":
            floor = leq
            out.setdefault("floor", {})["0"] = leq
        else:
            if floor is None:
                raise ProtocolError("record is missing the floor condition")
            out.setdefault(key[0], {})[f"{float(key[1]):g}"] = q(
                leq_subtract(leq, floor)
            )
    return out
