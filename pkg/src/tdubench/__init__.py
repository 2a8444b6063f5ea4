"""Benchmarking toolkit for two-motor cable-driven tendon driver units.

The package bundles a deterministic simulated plant (electromechanical,
thermal, battery and acoustic models), a drive abstraction layer with a
CAN-style wire codec, executable performance-test protocols, and the
analysis routines that turn raw telemetry into benchmark metrics.
"""

__version__ = "0.1.0"
