"""Closed-loop velocity control test (sine sweep).

Both motors track sinusoidal velocity references with the pulleys detached.
For each (amplitude, frequency) pair the loop runs one discarded transient
cycle plus the configured measurement cycles; gain and phase of the response
relative to the reference are extracted by least-squares projection at the
excitation frequency and, by default, averaged across the two motors.

The record is decimated to at least 40 samples per excitation cycle; the
fit consumes exactly the recorded samples, so the stored CSV reproduces the
reported Bode points.
"""

from __future__ import annotations

import math

from ..analysis import gain_phase_at
from ..config import ToolkitConfig
from ..csvio import BODE_COLUMNS, SWEEP_RECORD_COLUMNS, q
from ..hal import DriveCommand, DriveMode, Rig
from ..plant import FREE, Fixture
from .base import TestReport

SAMPLES_PER_CYCLE = 40
DIVERGENCE_FACTOR = 2.0


def _record_point(rig: Rig, amp: float, freq: float, cycles: int):
    """Excite one sweep point and return decimated (t, ref, meas1, meas2)."""
    drive = rig.drive
    rig.zero_motion()
    drive.send_command(DriveCommand(1, DriveMode.VELOCITY_PID, 0.0))
    drive.send_command(DriveCommand(2, DriveMode.VELOCITY_PID, 0.0))
    t0 = drive.time()
    two_pi_f = 2.0 * math.pi * freq

    def targets(t: float):
        v = amp * math.sin(two_pi_f * (t - t0))
        return v, v

    # transient cycle, discarded before fitting
    drive.run(1.0 / freq, targets=targets)

    dt = rig.plant.params.dt
    divisor = max(1, int(1.0 / (dt * SAMPLES_PER_CYCLE * freq)))
    ts: list[float] = []
    v1: list[float] = []
    v2: list[float] = []
    plant = rig.plant

    def log(t: float) -> None:
        ts.append(q(t - t0))
        v1.append(q(plant.vel[0]))
        v2.append(q(plant.vel[1]))

    drive.run(cycles / freq, targets=targets, on_tick=log, tick_divisor=divisor)
    refs = [q(amp * math.sin(two_pi_f * t)) for t in ts]
    return ts, refs, v1, v2


def run_velocity_sweep(cfg: ToolkitConfig, rig: Rig, rng) -> TestReport:
    vs = cfg.velocity_sweep
    vs.validate()
    report = TestReport(
        protocol="velocity-sweep", backend=rig.backend, seed=0, config=cfg
    )
    record = report.table("telemetry", SWEEP_RECORD_COLUMNS)
    bode = report.table("bode", BODE_COLUMNS)
    rig.attach(Fixture(kind=FREE))

    points = []
    diverged = []
    for amp in vs.amplitudes:
        for freq in vs.grid():
            ts, refs, v1, v2 = _record_point(rig, amp, freq, vs.cycles_per_point)
            qa, qf = q(amp), q(freq)
            for t, r, a, b in zip(ts, refs, v1, v2):
                record.rows.append((qa, qf, 1, t, r, a))
                record.rows.append((qa, qf, 2, t, r, b))
            limit = DIVERGENCE_FACTOR * amp
            if max(max(map(abs, v1)), max(map(abs, v2))) > limit:
                diverged.append({"amplitude": qa, "freq_hz": qf})
                report.notes.append(
                    f"tracking divergence at amplitude {amp:g} rad/s, "
                    f"{freq:g} Hz; point skipped"
                )
                continue
            g1, p1 = gain_phase_at(ts, refs, v1, freq)
            g2, p2 = gain_phase_at(ts, refs, v2, freq)
            if vs.average_motors:
                rows = [(qa, qf, q((g1 + g2) / 2.0), q((p1 + p2) / 2.0))]
            else:
                rows = [(qa, qf, q(g1), q(p1)), (qa, qf, q(g2), q(p2))]
            for row in rows:
                bode.rows.append(row)
                points.append(
                    {
                        "amplitude_rad_s": row[0],
                        "freq_hz": row[1],
                        "gain_db": row[2],
                        "phase_deg": row[3],
                    }
                )
    drive = rig.drive
    drive.send_command(DriveCommand(1, DriveMode.IDLE, 0.0))
    drive.send_command(DriveCommand(2, DriveMode.IDLE, 0.0))

    report.metrics = {
        "bode_points": points,
        "averaged_motors": vs.average_motors,
        "cycles_per_point": vs.cycles_per_point,
        "diverged_points": diverged,
    }
    return report


def refit_from_rows(header, rows, average_motors: bool = True) -> list[tuple]:
    """Recompute Bode rows from a parsed sweep record (self-consistency)."""
    cols = {name: list(header).index(name) for name in SWEEP_RECORD_COLUMNS}
    groups: dict[tuple[str, str], dict[str, list]] = {}
    order: list[tuple[str, str]] = []
    for r in rows:
        key = (r[cols["amplitude_rad_s"]], r[cols["freq_hz"]])
        if key not in groups:
            groups[key] = {"t": [], "ref": [], "1": [], "2": []}
            order.append(key)
        g = groups[key]
        motor = r[cols["motor_id"]]
        if motor == "1":
            g["t"].append(float(r[cols["t_s"]]))
            g["ref"].append(float(r[cols["ref_rad_s"]]))
        g[motor].append(float(r[cols["meas_rad_s"]]))
    out = []
    for key in order:
        g = groups[key]
        freq = float(key[1])
        g1, p1 = gain_phase_at(g["t"], g["ref"], g["1"], freq)
        g2, p2 = gain_phase_at(g["t"], g["ref"], g["2"], freq)
        if average_motors:
            out.append(
                (float(key[0]), freq, q((g1 + g2) / 2.0), q((p1 + p2) / 2.0))
            )
        else:
            out.append((float(key[0]), freq, q(g1), q(p1)))
            out.append((float(key[0]), freq, q(g2), q(p2)))
    return out
