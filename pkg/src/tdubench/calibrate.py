"""Calibration fits tying plant parameters to the benchmark targets.

Each preset names a target set, the closed-form model that predicts those
targets from a config, and the free parameters that may move.  Fits run
least squares on relative errors; selecting more free parameters than
targets is rejected as underdetermined.  With no free parameters the fit is
the identity and only the residual report is produced.

The models here are the independent energy/thermal/acoustic oracles; the
simulation integrates the same physics step by step, and the test suite
checks that protocol results agree with these predictions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import least_squares

from .config import ToolkitConfig
from .errors import CalibrationError
from .params import GRAVITY
from .plant import applied_torque

RUNTIME_TARGETS_S = {
    "runtime_idle": 40823.0,   # 11:20:23
    "runtime_2kg": 29171.0,    # 08:06:11
    "runtime_4kg": 16774.0,    # 04:39:34
    "runtime_6kg": 9500.0,     # 02:38:20
}
THERMAL_TARGETS_S = {
    "rise_fans_off": 300.0,
    "rise_fans_on": 520.0,
    "fall_fans_on": 850.0,
}
NOISE_TARGETS_DB = {
    "single_motor_5rad_s": 50.7,
    "both_motors_30rad_s": 61.1,
}
TORQUE_TARGETS = {
    "slope_motor1": 0.915,
    "intercept_motor1": -0.120,
    "slope_motor2": 0.938,
    "intercept_motor2": -0.120,
}


@dataclass
class CalibrationResult:
    preset: str
    free: tuple[str, ...]
    fitted: dict[str, float]
    residuals: dict[str, dict[str, float]]
    config: ToolkitConfig

    @property
    def max_rel_error(self) -> float:
        if not self.residuals:
            return 0.0
        return max(abs(r["rel_error"]) for r in self.residuals.values())


# -- predictive models -------------------------------------------------------


def predict_runtimes(cfg: ToolkitConfig) -> dict[str, float]:
    """Mean-power energy model of the battery test."""
    bt = cfg.battery_test
    bat = cfg.plant.battery
    omega_pk = bt.position_amplitude_rad * 2.0 * math.pi / bt.position_period_s
    out = {}
    for name, load in (
        ("runtime_idle", 0.0),
        ("runtime_2kg", 2.0),
        ("runtime_4kg", 4.0),
        ("runtime_6kg", 6.0),
    ):
        power = bat.idle_power_w
        if load > 0.0:
            for motor in (cfg.plant.motor1, cfg.plant.motor2):
                tau = load * GRAVITY * bt.pulley_radius_m
                power += tau * omega_pk / math.pi  # lifting half-cycles only
                power += (tau / motor.kt) ** 2 * motor.winding_resistance
        out[name] = bat.usable_energy_wh * 3600.0 / power
    return out


def _thermal_hold_loss_w(cfg: ToolkitConfig) -> float:
    """Per-motor copper loss while holding the thermal-test torque."""
    m = cfg.plant.motor1
    tau = applied_torque(cfg.thermal_test.hold_torque_nm, m)
    return (tau / m.kt) ** 2 * m.winding_resistance


def predict_thermal(cfg: ToolkitConfig) -> dict[str, float]:
    """First-order node rise/fall times between the reporting thresholds."""
    th = cfg.plant.thermal
    tc = cfg.thermal_test
    p = _thermal_hold_loss_w(cfg)
    low, high = tc.cool_to_c, tc.cutoff_temp_c
    out = {}
    for name, r_th in (("rise_fans_on", th.r_th_fans_on), ("rise_fans_off", th.r_th_fans_off)):
        tau = r_th * th.heat_capacity
        t_inf = th.ambient_c + p * r_th
        if t_inf <= high:
            out[name] = math.inf
        else:
            out[name] = tau * math.log((t_inf - low) / (t_inf - high))
    tau_on = th.r_th_fans_on * th.heat_capacity
    out["fall_fans_on"] = tau_on * math.log(
        (high - th.ambient_c) / (low - th.ambient_c)
    )
    return out


def predict_noise(cfg: ToolkitConfig) -> dict[str, float]:
    """Floor-subtracted levels at the two calibration anchors."""
    ac = cfg.plant.acoustics

    def motor(speed: float) -> float:
        return ac.motor_ref_level_db + ac.motor_slope_db_per_decade * math.log10(
            speed / ac.motor_ref_speed
        )

    def combine(levels) -> float:
        return 10.0 * math.log10(sum(10.0 ** (l / 10.0) for l in levels))

    return {
        "single_motor_5rad_s": combine([ac.fans_level_db, motor(5.0)]),
        "both_motors_30rad_s": combine(
            [ac.fans_level_db, motor(30.0), motor(30.0)]
        ),
    }


def predict_torque(cfg: ToolkitConfig) -> dict[str, float]:
    return {
        "slope_motor1": cfg.plant.motor1.torque_gain,
        "intercept_motor1": -cfg.plant.motor1.torque_offset,
        "slope_motor2": cfg.plant.motor2.torque_gain,
        "intercept_motor2": -cfg.plant.motor2.torque_offset,
    }


# -- free-parameter plumbing ---------------------------------------------------


def _apply_param(cfg: ToolkitConfig, name: str, value: float) -> ToolkitConfig:
    plant = cfg.plant
    if name == "idle_power":
        plant = replace(plant, battery=replace(plant.battery, idle_power_w=value))
    elif name == "winding_resistance":
        plant = replace(
            plant,
            motor1=replace(plant.motor1, winding_resistance=value),
            motor2=replace(plant.motor2, winding_resistance=value),
        )
    elif name == "heat_capacity":
        plant = replace(plant, thermal=replace(plant.thermal, heat_capacity=value))
    elif name == "r_th_fans_on":
        plant = replace(plant, thermal=replace(plant.thermal, r_th_fans_on=value))
    elif name == "r_th_fans_off":
        plant = replace(plant, thermal=replace(plant.thermal, r_th_fans_off=value))
    elif name == "motor_ref_level":
        plant = replace(
            plant, acoustics=replace(plant.acoustics, motor_ref_level_db=value)
        )
    elif name == "motor_slope":
        plant = replace(
            plant,
            acoustics=replace(plant.acoustics, motor_slope_db_per_decade=value),
        )
    elif name == "torque_gain_1":
        plant = replace(plant, motor1=replace(plant.motor1, torque_gain=value))
    elif name == "torque_offset_1":
        plant = replace(plant, motor1=replace(plant.motor1, torque_offset=value))
    elif name == "torque_gain_2":
        plant = replace(plant, motor2=replace(plant.motor2, torque_gain=value))
    elif name == "torque_offset_2":
        plant = replace(plant, motor2=replace(plant.motor2, torque_offset=value))
    else:
        raise CalibrationError(f"unknown free parameter '{name}'")
    return replace(cfg, plant=plant)


def _read_param(cfg: ToolkitConfig, name: str) -> float:
    probes = {
        "idle_power": cfg.plant.battery.idle_power_w,
        "winding_resistance": cfg.plant.motor1.winding_resistance,
        "heat_capacity": cfg.plant.thermal.heat_capacity,
        "r_th_fans_on": cfg.plant.thermal.r_th_fans_on,
        "r_th_fans_off": cfg.plant.thermal.r_th_fans_off,
        "motor_ref_level": cfg.plant.acoustics.motor_ref_level_db,
        "motor_slope": cfg.plant.acoustics.motor_slope_db_per_decade,
        "torque_gain_1": cfg.plant.motor1.torque_gain,
        "torque_offset_1": cfg.plant.motor1.torque_offset,
        "torque_gain_2": cfg.plant.motor2.torque_gain,
        "torque_offset_2": cfg.plant.motor2.torque_offset,
    }
    if name not in probes:
        raise CalibrationError(f"unknown free parameter '{name}'")
    return probes[name]


PRESETS = {
    "runtimes": (RUNTIME_TARGETS_S, predict_runtimes, ("idle_power", "winding_resistance")),
    "thermal": (
        THERMAL_TARGETS_S,
        predict_thermal,
        ("heat_capacity", "r_th_fans_on", "r_th_fans_off"),
    ),
    "noise": (NOISE_TARGETS_DB, predict_noise, ("motor_ref_level", "motor_slope")),
    "torque": (
        TORQUE_TARGETS,
        predict_torque,
        ("torque_gain_1", "torque_offset_1", "torque_gain_2", "torque_offset_2"),
    ),
}


def calibrate(
    cfg: ToolkitConfig, preset: str, free: tuple[str, ...] | None = None
) -> CalibrationResult:
    """Fit the preset's free parameters to its targets by least squares."""
    if preset not in PRESETS:
        raise CalibrationError(
            f"unknown preset '{preset}'; expected one of {sorted(PRESETS)}"
        )
    targets, model, default_free = PRESETS[preset]
    free = tuple(default_free if free is None else free)
    for name in free:
        _read_param(cfg, name)  # reject unknown names up front
    if len(free) > len(targets):
        raise CalibrationError(
            f"{len(free)} free parameters against {len(targets)} targets is "
            "underdetermined"
        )

    fitted_cfg = cfg
    if free:
        x0 = np.array([_read_param(cfg, n) for n in free])
        names = list(targets)

        def residual(x):
            trial = cfg
            for n, v in zip(free, x):
                trial = _apply_param(trial, n, float(v))
            pred = model(trial)
            return [
                (pred[name] - targets[name]) / targets[name] for name in names
            ]

        sol = least_squares(
            residual, x0, bounds=(1e-9, np.inf), xtol=1e-14, ftol=1e-14
        )
        for n, v in zip(free, sol.x):
            fitted_cfg = _apply_param(fitted_cfg, n, float(v))
    fitted_cfg.validate()

    pred = model(fitted_cfg)
    residuals = {
        name: {
            "target": targets[name],
            "achieved": pred[name],
            "rel_error": (pred[name] - targets[name]) / targets[name],
        }
        for name in targets
    }
    return CalibrationResult(
        preset=preset,
        free=free,
        fitted={n: _read_param(fitted_cfg, n) for n in free},
        residuals=residuals,
        config=fitted_cfg,
    )
