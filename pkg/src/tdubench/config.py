"""Toolkit configuration: defaults, TOML loading, canonical dumping, hashing.

One TOML file carries the plant parameters, controller tuning, sensor-noise
levels and all per-protocol settings.  Files may be partial: values merge
over the built-in defaults, and unknown keys are rejected.  Dumping is
canonical (stable key order, shortest-round-trip floats), so
``dump -> load -> dump`` is byte-identical, and the config hash recorded in
run manifests is taken over those exact bytes.
"""

from __future__ import annotations

import hashlib
import math
import sys
from dataclasses import dataclass, field, fields, is_dataclass
from typing import get_args, get_origin, get_type_hints

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .analysis import log_space_grid
from .errors import ConfigError
from .hal import DEFAULT_POSITION_KP, DEFAULT_VELOCITY_GAINS, PidGains
from .params import PlantParams

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class ControlConfig:
    """Drive-side loop settings; the control rate itself is 1/plant.dt."""

    telemetry_hz: float = 100.0
    position_kp: float = DEFAULT_POSITION_KP
    velocity_gains: PidGains = field(default_factory=lambda: DEFAULT_VELOCITY_GAINS)

    def validate(self) -> None:
        if self.telemetry_hz <= 0.0:
            raise ConfigError("telemetry_hz must be positive")
        if self.position_kp <= 0.0:
            raise ConfigError("position_kp must be positive")
        self.velocity_gains.validate()


@dataclass(frozen=True)
class SensorNoise:
    """Gaussian sensor-noise levels, applied via the seeded run generator."""

    tension_sd_n: float = 0.1
    temperature_sd_c: float = 0.2
    acoustic_sd_db: float = 0.1

    def validate(self) -> None:
        if min(self.tension_sd_n, self.temperature_sd_c, self.acoustic_sd_db) < 0.0:
            raise ConfigError("sensor noise levels must be >= 0")


@dataclass(frozen=True)
class StaticTorqueConfig:
    torque_levels: tuple[float, ...] = (0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0)
    settle_s: float = 30.0
    repetitions: int = 5
    pulley_radius_m: float = 0.015
    motors: tuple[int, ...] = (1, 2)

    def validate(self) -> None:
        lv = self.torque_levels
        if not lv or any(x <= 0.0 for x in lv) or list(lv) != sorted(lv):
            raise ConfigError("torque_levels must be positive and ascending")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        if self.pulley_radius_m <= 0.0:
            raise ConfigError("pulley radius must be positive")
        if not self.motors or any(m not in (1, 2) for m in self.motors):
            raise ConfigError("motors must be a non-empty subset of {1, 2}")


@dataclass(frozen=True)
class VelocitySweepConfig:
    amplitudes: tuple[float, ...] = (5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
    freq_lo_hz: float = 0.1
    freq_hi_hz: float = 10.0
    freq_count: int = 20
    # explicit frequency list overrides the log-space grid when non-empty
    frequencies: tuple[float, ...] = ()
    cycles_per_point: int = 10
    average_motors: bool = True

    def validate(self) -> None:
        if not self.amplitudes or any(a <= 0.0 for a in self.amplitudes):
            raise ConfigError("amplitudes must be positive")
        if self.cycles_per_point < 3:
            raise ConfigError("cycles_per_point must be >= 3")
        if any(f <= 0.0 for f in self.frequencies):
            raise ConfigError("frequencies must be positive")
        if not self.frequencies:
            log_space_grid(self.freq_lo_hz, self.freq_hi_hz, self.freq_count)

    def grid(self) -> list[float]:
        if self.frequencies:
            return list(self.frequencies)
        return log_space_grid(self.freq_lo_hz, self.freq_hi_hz, self.freq_count)


@dataclass(frozen=True)
class ThermalConfig:
    hold_torque_nm: float = 1.5
    position_amplitude_rad: float = TWO_PI
    position_period_s: float = 4.0
    cutoff_temp_c: float = 80.0
    pre_settle_s: float = 300.0
    fan_phases: tuple[bool, ...] = (True, False)
    cool_to_c: float = 30.0
    cool_horizon_s: float = 6000.0

    def validate(self) -> None:
        if self.cutoff_temp_c >= 120.0:
            raise ConfigError("cutoff_temp_c must stay below 120")
        if self.hold_torque_nm < 0.0:
            raise ConfigError("hold_torque_nm must be >= 0")
        if self.position_period_s <= 0.0 or self.pre_settle_s < 0.0:
            raise ConfigError("invalid thermal timing")
        if not self.fan_phases:
            raise ConfigError("need at least one fan phase")


@dataclass(frozen=True)
class NoiseTestConfig:
    window_s: float = 20.0
    speeds: tuple[float, ...] = (5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
    conditions: tuple[str, ...] = ("floor", "fans_only", "motor1", "motor2", "both")
    settle_s: float = 3.0

    def validate(self) -> None:
        if self.window_s <= 0.0:
            raise ConfigError("window_s must be positive")
        if any(s <= 0.0 for s in self.speeds):
            raise ConfigError("speeds must be positive")
        known = {"floor", "fans_only", "motor1", "motor2", "both"}
        bad = [c for c in self.conditions if c not in known]
        if bad:
            raise ConfigError(f"unknown noise conditions: {bad}")


@dataclass(frozen=True)
class BatteryTestConfig:
    loads_kg: tuple[float, ...] = (0.0, 2.0, 4.0, 6.0)
    position_amplitude_rad: float = TWO_PI
    position_period_s: float = 6.0
    start_voltage_v: float = 29.1
    cutoff_voltage_v: float = 17.5
    pulley_radius_m: float = 0.015
    horizon_s: float = 86400.0
    settle_cycles: int = 2
    measure_cycles: int = 5

    def validate(self) -> None:
        if any(m < 0.0 for m in self.loads_kg) or not self.loads_kg:
            raise ConfigError("loads_kg must be >= 0")
        if self.start_voltage_v <= self.cutoff_voltage_v:
            raise ConfigError("start voltage must exceed cutoff")
        if self.settle_cycles < 1 or self.measure_cycles < 1:
            raise ConfigError("cycle counts must be >= 1")


@dataclass(frozen=True)
class ToolkitConfig:
    plant: PlantParams = field(default_factory=PlantParams)
    control: ControlConfig = field(default_factory=ControlConfig)
    sensor_noise: SensorNoise = field(default_factory=SensorNoise)
    static_torque: StaticTorqueConfig = field(default_factory=StaticTorqueConfig)
    velocity_sweep: VelocitySweepConfig = field(default_factory=VelocitySweepConfig)
    thermal_test: ThermalConfig = field(default_factory=ThermalConfig)
    noise_test: NoiseTestConfig = field(default_factory=NoiseTestConfig)
    battery_test: BatteryTestConfig = field(default_factory=BatteryTestConfig)

    def validate(self) -> None:
        self.plant.validate()
        self.control.validate()
        self.sensor_noise.validate()
        self.static_torque.validate()
        self.velocity_sweep.validate()
        self.thermal_test.validate()
        self.noise_test.validate()
        self.battery_test.validate()
        rated = min(self.plant.motor1.rated_torque, self.plant.motor2.rated_torque)
        if self.thermal_test.hold_torque_nm > rated:
            raise ConfigError("thermal hold torque exceeds the rated torque")
        peak = min(self.plant.motor1.peak_torque, self.plant.motor2.peak_torque)
        if any(lv > peak for lv in self.static_torque.torque_levels):
            raise ConfigError("static torque level exceeds peak torque")


def default_config() -> ToolkitConfig:
    cfg = ToolkitConfig()
    cfg.validate()
    return cfg


# --------------------------------------------------------------------------
# dataclass <-> plain tree
# --------------------------------------------------------------------------


def _to_tree(obj):
    if is_dataclass(obj):
        return {f.name: _to_tree(getattr(obj, f.name)) for f in fields(obj)}
    if isinstance(obj, tuple):
        return [_to_tree(v) for v in obj]
    return obj


def _coerce(value, hint, path: str):
    origin = get_origin(hint)
    if is_dataclass(hint):
        if not isinstance(value, dict):
            raise ConfigError(f"{path}: expected a table")
        return _from_tree(hint, value, path)
    if origin is tuple:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{path}: expected an array")
        args = get_args(hint)
        if len(args) == 2 and args[1] is Ellipsis:
            return tuple(_coerce(v, args[0], f"{path}[{i}]") for i, v in enumerate(value))
        if len(args) != len(value):
            raise ConfigError(f"{path}: expected {len(args)} elements")
        return tuple(_coerce(v, a, f"{path}[{i}]") for i, (v, a) in enumerate(zip(value, args)))
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number")
        return float(value)
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer")
        return value
    if hint is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected a boolean")
        return value
    if hint is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string")
        return value
    raise ConfigError(f"{path}: unsupported config field type {hint!r}")


def _from_tree(cls, tree: dict, path: str = ""):
    hints = get_type_hints(cls)
    known = {f.name for f in fields(cls)}
    unknown = set(tree) - known
    if unknown:
        raise ConfigError(f"unknown config key(s) {sorted(unknown)} in [{path or 'root'}]")
    kwargs = {}
    for f in fields(cls):
        if f.name in tree:
            kwargs[f.name] = _coerce(
                tree[f.name], hints[f.name], f"{path}.{f.name}".lstrip(".")
            )
    return cls(**kwargs)


# --------------------------------------------------------------------------
# canonical TOML
# --------------------------------------------------------------------------


def _fmt_scalar(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, int):
        return repr(v)
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, list):
        return "[" + ", ".join(_fmt_scalar(x) for x in v) + "]"
    raise ConfigError(f"cannot serialize {type(v).__name__} to TOML")


def _emit(tree: dict, prefix: str, out: list[str]) -> None:
    scalars = [(k, v) for k, v in tree.items() if not isinstance(v, dict)]
    tables = [(k, v) for k, v in tree.items() if isinstance(v, dict)]
    if prefix and (scalars or not tables):
        out.append(f"[{prefix}]")
    for k, v in scalars:
        out.append(f"{k} = {_fmt_scalar(v)}")
    if scalars or prefix:
        out.append("")
    for k, v in tables:
        _emit(v, f"{prefix}.{k}" if prefix else k, out)


def dumps(cfg: ToolkitConfig) -> str:
    """Serialize a config to canonical TOML text."""
    tree = _to_tree(cfg)
    out: list[str] = []
    for name, sub in tree.items():
        _emit(sub, name, out)
    while out and out[-1] == "":
        out.pop()
    return "\n".join(out) + "\n"


def loads(text: str) -> ToolkitConfig:
    """Parse TOML text, merging over the defaults; validates the result."""
    try:
        tree = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"config is not valid TOML: {e}") from e
    cfg = _from_tree(ToolkitConfig, tree)
    cfg.validate()
    return cfg


def load_file(path) -> ToolkitConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return loads(fh.read())
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e


def config_hash(cfg: ToolkitConfig) -> str:
    """SHA-256 over the canonical serialization."""
    return hashlib.sha256(dumps(cfg).encode("utf-8")).hexdigest()
