"""Executable performance-test protocols producing structured reports."""

from .base import PROTOCOLS, TestReport, build_rig, run_protocol
from .battery import run_battery
from .noise import run_noise
from .static_torque import run_static_torque
from .thermal import run_thermal
from .velocity import run_velocity_sweep

__all__ = [
    "PROTOCOLS",
    "TestReport",
    "build_rig",
    "run_protocol",
    "run_battery",
    "run_noise",
    "run_static_torque",
    "run_thermal",
    "run_velocity_sweep",
]
