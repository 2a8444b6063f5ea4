"""Physical parameter sets for the simulated tendon driver unit.

Defaults describe a two-motor direct-drive unit (KV95 outrunners, 30 mm
pulleys, 7S1P pack) calibrated so the shipped test protocols reproduce the
benchmark targets.  All values are plain SI unless the field name says
otherwise (temperatures in deg C, energy in Wh, levels in dB).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .errors import ConfigError

GRAVITY = 9.80665  # m/s^2

# Torque constant from the KV rating: kt = 60 / (2*pi*KV), KV = 95 rpm/V.
KT_KV95 = 60.0 / (2.0 * math.pi * 95.0)


@dataclass(frozen=True)
class MotorParams:
    """Electromechanical constants of one drive/motor channel."""

    kt: float = KT_KV95              # N*m/A
    rated_torque: float = 1.5        # N*m, continuous
    peak_torque: float = 3.0         # N*m, hard command bound
    torque_gain: float = 0.915       # actual/commanded slope of the torque map
    torque_offset: float = 0.120     # N*m lost to stall stiction
    stiction: float = 0.0            # N*m breakaway friction at the rotor
    cogging_amplitude: float = 0.05  # N*m
    cogging_cycles_per_rev: int = 42
    rotor_inertia: float = 2.0e-4    # kg*m^2
    viscous_friction: float = 1.0e-3  # N*m*s/rad
    winding_resistance: float = 0.15  # ohm, torque-producing loss path

    def validate(self) -> None:
        if not (0.0 < self.rated_torque <= self.peak_torque):
            raise ConfigError("require 0 < rated_torque <= peak_torque")
        if self.kt <= 0.0:
            raise ConfigError("kt must be positive")
        if not (0.0 < self.torque_gain <= 1.2):
            raise ConfigError("torque_gain must lie in (0, 1.2]")
        if self.torque_offset < 0.0:
            raise ConfigError("torque_offset must be >= 0")
        if self.cogging_amplitude < 0.0:
            raise ConfigError("cogging_amplitude must be >= 0")
        if self.rotor_inertia <= 0.0:
            raise ConfigError("rotor_inertia must be positive")
        if self.viscous_friction < 0.0 or self.winding_resistance < 0.0:
            raise ConfigError("friction and winding resistance must be >= 0")
        if self.cogging_cycles_per_rev < 1:
            raise ConfigError("cogging_cycles_per_rev must be >= 1")


@dataclass(frozen=True)
class ThermalParams:
    """Single-node stator model: C*dT/dt = P - (T - ambient)/R_th.

    Two thermal resistances select the cooling regime; forced airflow from
    the case fans roughly quarters the resistance to ambient.
    """

    heat_capacity: float = 124.0     # J/K
    r_th_fans_on: float = 3.27       # K/W
    r_th_fans_off: float = 16.0      # K/W
    ambient_c: float = 23.0          # deg C

    def validate(self) -> None:
        if min(self.heat_capacity, self.r_th_fans_on, self.r_th_fans_off) <= 0.0:
            raise ConfigError("thermal capacity and resistances must be positive")
        if self.r_th_fans_on >= self.r_th_fans_off:
            raise ConfigError("fans-on thermal resistance must be below fans-off")


@dataclass(frozen=True)
class BatteryParams:
    """Energy-bookkeeping pack model with an SOC -> voltage lookup."""

    full_voltage: float = 29.1       # V
    cutoff_voltage: float = 17.5     # V, BMS low-voltage cutoff
    usable_energy_wh: float = 90.718  # Wh between full and cutoff
    idle_power_w: float = 8.0        # W drawn with motors disabled
    # (soc, voltage) pairs, ascending soc; default is a linear discharge.
    soc_voltage_curve: tuple[tuple[float, float], ...] = (
        (0.0, 17.5),
        (1.0, 29.1),
    )

    def validate(self) -> None:
        if self.full_voltage <= self.cutoff_voltage:
            raise ConfigError("full_voltage must exceed cutoff_voltage")
        if self.usable_energy_wh <= 0.0 or self.idle_power_w <= 0.0:
            raise ConfigError("usable energy and idle power must be positive")
        curve = self.soc_voltage_curve
        if len(curve) < 2:
            raise ConfigError("soc_voltage_curve needs at least two points")
        socs = [p[0] for p in curve]
        volts = [p[1] for p in curve]
        if socs != sorted(socs) or len(set(socs)) != len(socs):
            raise ConfigError("soc_voltage_curve soc values must strictly ascend")
        if any(b <= a for a, b in zip(volts, volts[1:])):
            raise ConfigError("pack voltage must strictly increase with soc")
        if not math.isclose(socs[0], 0.0) or not math.isclose(socs[-1], 1.0):
            raise ConfigError("soc_voltage_curve must span soc 0..1")
        if not math.isclose(volts[0], self.cutoff_voltage) or not math.isclose(
            volts[-1], self.full_voltage
        ):
            raise ConfigError("curve endpoints must map to cutoff/full voltage")

    @property
    def usable_energy_j(self) -> float:
        return self.usable_energy_wh * 3600.0


@dataclass(frozen=True)
class AcousticParams:
    """Source levels seen by a virtual microphone 50 cm above the unit.

    Each spinning motor contributes motor_ref_level plus motor_slope dB per
    decade of speed; fans contribute a fixed level; the room floor is always
    present.  Sources combine energetically.
    """

    room_floor_db: float = 25.0
    fans_level_db: float = 43.7
    motor_ref_level_db: float = 49.733471046737954
    motor_ref_speed: float = 5.0     # rad/s
    motor_slope_db_per_decade: float = 10.636071718107303

    def validate(self) -> None:
        if self.fans_level_db <= self.room_floor_db:
            raise ConfigError("fans level must exceed the room floor")
        if self.motor_slope_db_per_decade < 0.0:
            raise ConfigError("motor noise slope must be >= 0")
        if self.motor_ref_speed <= 0.0:
            raise ConfigError("motor_ref_speed must be positive")


@dataclass(frozen=True)
class PlantParams:
    """Complete parameter set of the simulated unit."""

    motor1: MotorParams = field(default_factory=MotorParams)
    motor2: MotorParams = field(
        default_factory=lambda: MotorParams(torque_gain=0.938)
    )
    thermal: ThermalParams = field(default_factory=ThermalParams)
    battery: BatteryParams = field(default_factory=BatteryParams)
    acoustics: AcousticParams = field(default_factory=AcousticParams)
    dt: float = 1.0e-3               # s, fixed mechanics step
    redirect_friction: float = 0.0   # fractional tension loss per redirect pulley

    def validate(self) -> None:
        self.motor1.validate()
        self.motor2.validate()
        self.thermal.validate()
        self.battery.validate()
        self.acoustics.validate()
        if not (0.0 < self.dt <= 0.010):
            raise ConfigError("dt must lie in (0, 10 ms]")
        if not (0.0 <= self.redirect_friction < 1.0):
            raise ConfigError("redirect_friction must lie in [0, 1)")

    def motor(self, motor_id: int) -> MotorParams:
        if motor_id == 1:
            return self.motor1
        if motor_id == 2:
            return self.motor2
        raise ConfigError(f"unknown motor id {motor_id}")


def default_params() -> PlantParams:
    p = PlantParams()
    p.validate()
    return p


def with_motor(params: PlantParams, motor_id: int, **changes) -> PlantParams:
    """Return a copy of ``params`` with one motor's fields replaced."""
    motor = replace(params.motor(motor_id), **changes)
    if motor_id == 1:
        return replace(params, motor1=motor)
    return replace(params, motor2=motor)
