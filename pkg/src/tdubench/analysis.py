"""Numerics turning raw telemetry into benchmark metrics.

Pure functions over immutable input series: least-squares regression,
single-frequency gain/phase extraction, sound-level algebra in the energy
domain, threshold-crossing timers, and runtime statistics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    AnalysisError,
    NoExcitationError,
    NonPhysicalSubtractionError,
    NotReachedError,
    SingularFitError,
)

REFERENCE_AMPLITUDE_FLOOR = 1e-9


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    r_squared: float


@dataclass(frozen=True)
class BodePoint:
    amplitude: float   # rad/s
    frequency: float   # Hz
    gain_db: float
    phase_deg: float   # lag negative, wrapped to (-180, 180]


@dataclass(frozen=True)
class SoundLevel:
    level_db: float    # equivalent continuous level over the window
    window_s: float


def linear_fit(points: Sequence[tuple[float, float]]) -> LinearFit:
    """Ordinary least-squares line through (x, y) points.

    r_squared is 1 - SS_res/SS_tot; a perfect fit of constant data reports 1.
    """
    if len(points) < 2:
        raise SingularFitError("need at least two points")
    x = np.asarray([p[0] for p in points], dtype=float)
    y = np.asarray([p[1] for p in points], dtype=float)
    sxx = float(np.sum((x - x.mean()) ** 2))
    if sxx == 0.0:
        raise SingularFitError("all x values identical; slope undefined")
    sxy = float(np.sum((x - x.mean()) * (y - y.mean())))
    slope = sxy / sxx
    intercept = float(y.mean() - slope * x.mean())
    residuals = y - (slope * x + intercept)
    ss_res = float(np.sum(residuals**2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return LinearFit(slope=slope, intercept=intercept, r_squared=r2)


def _wrap_deg(angle: float) -> float:
    """Wrap an angle in degrees to (-180, 180]."""
    w = math.fmod(angle + 180.0, 360.0)
    if w <= 0.0:
        w += 360.0
    return w - 180.0


def _sine_fit(t: np.ndarray, y: np.ndarray, freq_hz: float) -> tuple[float, float]:
    """Least-squares (amplitude, phase_rad) of y ~ A*sin(2*pi*f*t + phi) + c."""
    w = 2.0 * math.pi * freq_hz
    basis = np.column_stack([np.sin(w * t), np.cos(w * t), np.ones_like(t)])
    coef, *_ = np.linalg.lstsq(basis, y, rcond=None)
    a_sin, a_cos = float(coef[0]), float(coef[1])
    return math.hypot(a_sin, a_cos), math.atan2(a_cos, a_sin)


def gain_phase_at(
    t: Sequence[float],
    reference: Sequence[float],
    measured: Sequence[float],
    freq_hz: float,
) -> tuple[float, float]:
    """Gain (dB) and phase shift (deg) of ``measured`` relative to ``reference``.

    Both records are projected onto {sin, cos, 1} at the known excitation
    frequency, which is exact for non-integer cycle counts where FFT bins
    are not.  Phase is wrapped to (-180, 180] with lag negative.
    """
    if freq_hz <= 0.0:
        raise AnalysisError("excitation frequency must be positive")
    t = np.asarray(t, dtype=float)
    ref = np.asarray(reference, dtype=float)
    meas = np.asarray(measured, dtype=float)
    if not (len(t) == len(ref) == len(meas)):
        raise AnalysisError("time, reference and measured lengths differ")
    a_ref, ph_ref = _sine_fit(t, ref, freq_hz)
    if a_ref < REFERENCE_AMPLITUDE_FLOOR:
        raise NoExcitationError(
            f"reference amplitude {a_ref:g} below the numeric floor"
        )
    a_meas, ph_meas = _sine_fit(t, meas, freq_hz)
    gain_db = 20.0 * math.log10(a_meas / a_ref)
    phase_deg = _wrap_deg(math.degrees(ph_meas - ph_ref))
    return gain_db, phase_deg


def log_space_grid(f_lo: float, f_hi: float, n: int) -> list[float]:
    """n frequencies from f_lo to f_hi in even log-space steps, endpoints exact."""
    if not (0.0 < f_lo < f_hi):
        raise AnalysisError("need 0 < f_lo < f_hi")
    if n < 2:
        raise AnalysisError("need at least two grid points")
    ratio = (f_hi / f_lo) ** (1.0 / (n - 1))
    grid = [f_lo * ratio**i for i in range(n)]
    grid[0] = f_lo
    grid[-1] = f_hi
    return grid


def energetic_add(levels_db: Sequence[float]) -> float:
    """Combine sound levels in the power domain."""
    if len(levels_db) == 0:
        raise AnalysisError("need at least one level")
    return 10.0 * math.log10(sum(10.0 ** (l / 10.0) for l in levels_db))


def leq_subtract(l_meas_db: float, l_room_db: float) -> float:
    """Remove the room-floor energy from a measured level."""
    if l_meas_db <= l_room_db:
        raise NonPhysicalSubtractionError(
            f"measurement {l_meas_db:g} dB at or below the floor {l_room_db:g} dB"
        )
    return 10.0 * math.log10(10.0 ** (l_meas_db / 10.0) - 10.0 ** (l_room_db / 10.0))


def _interp_crossing(
    t0: float, v0: float, t1: float, v1: float, threshold: float
) -> float:
    if v1 == v0:
        return t1
    return t0 + (threshold - v0) * (t1 - t0) / (v1 - v0)


def _first_crossing(
    t: np.ndarray, v: np.ndarray, threshold: float, rising: bool, start_idx: int
) -> tuple[float, int]:
    """Time and index of the first crossing at/after start_idx."""
    if rising:
        hit = v[start_idx:] >= threshold
    else:
        hit = v[start_idx:] <= threshold
    idx = np.argmax(hit)
    if not hit[idx]:
        raise NotReachedError(
            f"value never {'rose to' if rising else 'fell to'} {threshold:g}",
            last_value=float(v[-1]),
        )
    k = start_idx + int(idx)
    if k == 0:
        return float(t[0]), 0
    return _interp_crossing(t[k - 1], v[k - 1], t[k], v[k], threshold), k


def time_to_threshold(
    t: Sequence[float],
    temperature: Sequence[float],
    start: float,
    stop: float,
) -> float:
    """Seconds between the first crossings of ``start`` and then ``stop``.

    The crossing direction is inferred from the ordering of the two
    thresholds; each crossing time is linearly interpolated between the
    bracketing samples.
    """
    if len(t) == 0:
        raise NotReachedError("empty log", last_value=None)
    tt = np.asarray(t, dtype=float)
    vv = np.asarray(temperature, dtype=float)
    rising = stop > start
    t_start, k = _first_crossing(tt, vv, start, rising, 0)
    t_stop, _ = _first_crossing(tt, vv, stop, rising, k)
    return t_stop - t_start


def runtime_from_log(
    t: Sequence[float], voltage: Sequence[float], cutoff: float
) -> float:
    """First time the pack voltage reaches the cutoff, interpolated."""
    if len(t) == 0:
        raise NotReachedError("empty log", last_value=None)
    if voltage[0] <= cutoff:
        raise AnalysisError("log must start above the cutoff voltage")
    tt = np.asarray(t, dtype=float)
    vv = np.asarray(voltage, dtype=float)
    t_cut, _ = _first_crossing(tt, vv, cutoff, rising=False, start_idx=0)
    return t_cut


def torque_stats(samples: Sequence[float]) -> tuple[float, float]:
    """Arithmetic mean and population standard deviation."""
    if len(samples) == 0:
        raise AnalysisError("need at least one sample")
    arr = np.asarray(samples, dtype=float)
    return float(arr.mean()), float(arr.std())
