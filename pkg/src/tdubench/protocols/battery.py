"""Battery endurance test.

Each load condition starts from a fully charged pack.  Idle leaves the
motors disabled; loaded conditions raise and lower per-motor weights with a
sinusoidal position profile through a redirect pulley.  A few detailed
cycles establish the mean pack power and the motor torque statistics, after
which the discharge is fast-forwarded at that power (the profile is
periodic, so per-cycle energy is constant) while the pack voltage is logged
until the BMS cutoff.
"""

from __future__ import annotations

import math

from ..analysis import runtime_from_log, torque_stats
from ..config import ToolkitConfig
from ..csvio import (
    BATTERY_TELEMETRY_COLUMNS,
    DISCHARGE_COLUMNS,
    RUNTIME_COLUMNS,
    hms,
    q,
)
from ..errors import NotReachedError, ProtocolError
from ..hal import DriveCommand, DriveMode, Rig
from ..plant import FREE, GRAVITY_WINCH, Fixture
from .base import TestReport

TELEMETRY_HZ = 100.0
DISCHARGE_LOG_DT = 5.0  # s between voltage samples during fast-forward


def run_battery(cfg: ToolkitConfig, rig: Rig, rng) -> TestReport:
    bc = cfg.battery_test
    bc.validate()
    report = TestReport(protocol="battery", backend=rig.backend, seed=0, config=cfg)
    discharge = report.table("discharge", DISCHARGE_COLUMNS)
    telemetry = report.table("telemetry", BATTERY_TELEMETRY_COLUMNS)
    runtimes = report.table("runtimes", RUNTIME_COLUMNS)
    drive = rig.drive
    plant = rig.plant
    params = plant.params
    temp_sd = cfg.sensor_noise.temperature_sd_c
    dt = params.dt
    divisor = max(1, int(round(1.0 / (dt * TELEMETRY_HZ))))
    conditions = []

    for load in bc.loads_kg:
        plant.recharge()
        rig.zero_motion()
        drive.set_fans(True)
        load_q = q(load)
        t0 = drive.time()
        soc0 = plant.soc
        volt_rows = [(load_q, 0.0, q(plant.pack_voltage))]
        torque_samples: list[float] = []

        if load > 0.0:
            rig.attach(
                Fixture(
                    kind=GRAVITY_WINCH,
                    pulley_radius=bc.pulley_radius_m,
                    mass1=load,
                    mass2=load,
                    friction=params.redirect_friction,
                )
            )
            drive.send_command(DriveCommand(1, DriveMode.POSITION_PID, 0.0))
            drive.send_command(DriveCommand(2, DriveMode.POSITION_PID, 0.0))
            period = bc.position_period_s
            two_pi = 2.0 * math.pi

            def targets(t: float):
                ref = bc.position_amplitude_rad * math.sin(two_pi * (t - t0) / period)
                return ref, ref

            drive.run(bc.settle_cycles * period, targets=targets)

            # detailed measurement cycles: telemetry plus power accounting
            acc = {"loss1": 0.0, "loss2": 0.0, "mech": 0.0, "n": 0}

            def log(t: float) -> None:
                acc["loss1"] += plant.loss_w[0]
                acc["loss2"] += plant.loss_w[1]
                mech = plant.applied[0] * plant.vel[0]
                if mech > 0.0:
                    acc["mech"] += mech
                mech = plant.applied[1] * plant.vel[1]
                if mech > 0.0:
                    acc["mech"] += mech
                acc["n"] += 1
                if acc["n"] % divisor == 0:
                    t_rel = q(t - t0)
                    for motor_id in (1, 2):
                        s = drive.sample(motor_id)
                        telemetry.rows.append(
                            (
                                load_q,
                                t_rel,
                                motor_id,
                                q(s.position),
                                q(s.velocity),
                                q(s.torque),
                                q(s.current),
                                q(s.stator_temp + rng.normal(0.0, temp_sd)),
                                q(s.pack_voltage),
                            )
                        )
                        torque_samples.append(q(s.torque))
                    volt_rows.append((load_q, t_rel, q(plant.pack_voltage)))

            drive.run(bc.measure_cycles * period, targets=targets, on_tick=log)
            losses = (acc["loss1"] / acc["n"], acc["loss2"] / acc["n"])
            mech_power = acc["mech"] / acc["n"]
            drive.send_command(DriveCommand(1, DriveMode.IDLE, 0.0))
            drive.send_command(DriveCommand(2, DriveMode.IDLE, 0.0))
        else:
            rig.attach(Fixture(kind=FREE))
            drive.send_command(DriveCommand(1, DriveMode.IDLE, 0.0))
            drive.send_command(DriveCommand(2, DriveMode.IDLE, 0.0))
            losses = (0.0, 0.0)
            mech_power = 0.0

        # fast-forward the remaining discharge at the measured mean power
        def log_voltage(t: float) -> None:
            volt_rows.append((load_q, q(t - t0), q(plant.pack_voltage)))

        rig.fast_forward(
            bc.horizon_s,
            motor_losses_w=losses,
            mech_power_w=mech_power,
            dt=DISCHARGE_LOG_DT,
            on_sample=log_voltage,
            stop=lambda: plant.depleted,
        )
        discharge.rows.extend(volt_rows)
        ts = [r[1] for r in volt_rows]
        vs = [r[2] for r in volt_rows]
        try:
            runtime = q(runtime_from_log(ts, vs, bc.cutoff_voltage_v))
        except NotReachedError as e:
            raise ProtocolError(
                f"pack never reached cutoff within {bc.horizon_s:g} s for "
                f"{load:g} kg (last voltage {e.last_value})"
            ) from e
        if torque_samples:
            mean_tau, sd_tau = torque_stats(torque_samples)
        else:
            mean_tau, sd_tau = 0.0, 0.0
        mean_power = (
            params.battery.idle_power_w + mech_power + losses[0] + losses[1]
        )
        energy_used = (soc0 - plant.soc) * params.battery.usable_energy_wh
        row = (
            load_q,
            runtime,
            hms(runtime),
            q(mean_tau),
            q(sd_tau),
            q(mean_power),
            q(energy_used),
        )
        runtimes.rows.append(row)
        conditions.append(
            {
                "load_kg": load_q,
                "runtime_s": runtime,
                "runtime_hms": hms(runtime),
                "mean_torque_nm": q(mean_tau),
                "sd_torque_nm": q(sd_tau),
                "mean_power_w": q(mean_power),
                "energy_used_wh": q(energy_used),
            }
        )

    report.metrics = {"conditions": conditions}
    return report


def retime_from_rows(header, rows, cutoff: float) -> dict[str, float]:
    """Recompute per-load runtimes from the discharge log (self-consistency)."""
    idx = {name: list(header).index(name) for name in DISCHARGE_COLUMNS}
    out: dict[str, float] = {}
    for load in dict.fromkeys(r[idx["load_kg"]] for r in rows):
        sel = [r for r in rows if r[idx["load_kg"]] == load]
        t = [float(r[idx["t_s"]]) for r in sel]
        v = [float(r[idx["pack_voltage_v"]]) for r in sel]
        out[load] = q(runtime_from_log(t, v, cutoff))
    return out
