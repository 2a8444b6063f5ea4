"""Figure builders for the benchmark CSV outputs.

Each figure id names one result plot and the CSV schema it consumes:

    torque_regression   static-torque telemetry (commanded vs measured)
    bode_magnitude      bode table, gain vs log-frequency per amplitude
    bode_phase          bode table, phase vs log-frequency per amplitude
    thermal_rise        thermal curves, heating segments
    thermal_fall        thermal curves, cooling segments
    noise_bars          noise level table, grouped bars by speed

Rendering is deterministic for identical input: series are ordered by
sorted key, styling is fixed, and SVG output carries no timestamps.
Input files are never modified.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "plotkit"

import matplotlib.pyplot as plt
import numpy as np

AMPLITUDE_CYCLE = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"]
CONDITION_COLORS = {"motor1": "#1f77b4", "motor2": "#ff7f0e", "both": "#2ca02c"}
CONDITION_LABELS = {"motor1": "Motor 1", "motor2": "Motor 2", "both": "Both motors"}


class SchemaMismatch(ValueError):
    """Input CSV does not match the figure's documented schema."""


@dataclass(frozen=True)
class FigureSpec:
    figure_id: str
    input_csv: Path
    output_path: Path


def read_table(path) -> tuple[list[str], list[list[str]]]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaMismatch(f"{path}: file has no header row") from None
        return header, list(reader)


def _columns(header, rows, names, figure_id):
    missing = [n for n in names if n not in header]
    if missing:
        raise SchemaMismatch(
            f"{figure_id}: input is missing column(s) {missing}; "
            f"expected {list(names)}, found {header}"
        )
    idx = [header.index(n) for n in names]
    return [[row[i] for i in idx] for row in rows]


def _floats(cells: list[str]) -> np.ndarray:
    return np.asarray([float(c) for c in cells], dtype=float)


# -- builders ----------------------------------------------------------------


def _torque_regression(header, rows, fig):
    data = _columns(
        header, rows, ("motor_id", "commanded_nm", "measured_nm"), "torque_regression"
    )
    ax = fig.subplots()
    markers = {"1": "o", "2": "s"}
    for motor in sorted({r[0] for r in data}):
        sel = [r for r in data if r[0] == motor]
        x = _floats([r[1] for r in sel])
        y = _floats([r[2] for r in sel])
        ax.plot(
            x,
            y,
            markers.get(motor, "x"),
            ms=4,
            alpha=0.7,
            label=f"Motor {motor} measured",
        )
        if len(set(x.tolist())) >= 2:
            slope, intercept = np.polyfit(x, y, 1)
            xs = np.array([x.min(), x.max()])
            ax.plot(
                xs,
                slope * xs + intercept,
                "-",
                lw=1,
                label=f"Motor {motor} fit: {slope:.3f}x {intercept:+.3f}",
            )
    lim = ax.get_xlim()
    ax.plot(lim, lim, ":", color="gray", lw=1, label="1:1")
    ax.set_xlabel("Commanded torque (N·m)")
    ax.set_ylabel("Measured torque (N·m)")
    ax.set_title("Static torque: commanded vs measured")
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)


def _bode(header, rows, fig, value_col, ylabel, title):
    data = _columns(
        header, rows, ("amplitude_rad_s", "freq_hz", value_col), "bode"
    )
    ax = fig.subplots()
    amplitudes = sorted({float(r[0]) for r in data})
    for k, amp in enumerate(amplitudes):
        sel = sorted(
            (float(r[1]), float(r[2])) for r in data if float(r[0]) == amp
        )
        f = [p[0] for p in sel]
        v = [p[1] for p in sel]
        ax.semilogx(
            f,
            v,
            "o-",
            ms=3,
            lw=1,
            color=AMPLITUDE_CYCLE[k % len(AMPLITUDE_CYCLE)],
            label=f"{amp:g} rad/s",
        )
    ax.set_xlabel("Frequency (Hz)")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    if amplitudes:
        ax.legend(title="Amplitude", fontsize=8)
    ax.grid(True, which="both", alpha=0.3)


def _bode_magnitude(header, rows, fig):
    _bode(header, rows, fig, "gain_db", "Gain (dB)", "Velocity tracking: magnitude")


def _bode_phase(header, rows, fig):
    # lag plotted downward: negative phase values fall below zero
    _bode(header, rows, fig, "phase_deg", "Phase (deg)", "Velocity tracking: phase")


def _thermal(header, rows, fig, segment, title):
    data = _columns(
        header,
        rows,
        ("phase", "segment", "t_s", "motor1_temp_c", "motor2_temp_c"),
        "thermal",
    )
    ax = fig.subplots()
    styles = {"fans_on": "-", "fans_off": "--"}
    phases = sorted({r[0] for r in data})
    for phase in phases:
        sel = [r for r in data if r[0] == phase and r[1] == segment]
        if not sel:
            continue
        t = _floats([r[2] for r in sel])
        t = t - t[0]
        for col, name, color in ((3, "motor 1", "#d62728"), (4, "motor 2", "#1f77b4")):
            temps = _floats([r[col] for r in sel])
            ax.plot(
                t,
                temps,
                styles.get(phase, "-"),
                color=color,
                lw=1,
                label=f"{name}, {phase.replace('_', ' ')}",
            )
    ax.set_xlabel("Time (s)")
    ax.set_ylabel("Stator temperature (°C)")
    ax.set_title(title)
    if phases:
        ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)


def _thermal_rise(header, rows, fig):
    _thermal(header, rows, fig, "heat", "Temperature rise under load")


def _thermal_fall(header, rows, fig):
    _thermal(header, rows, fig, "cool", "Temperature fall after load release")


def _noise_bars(header, rows, fig):
    data = _columns(
        header, rows, ("condition", "speed_rad_s", "leq_db"), "noise_bars"
    )
    ax = fig.subplots()
    motor_rows = [r for r in data if r[0] in CONDITION_COLORS]
    speeds = sorted({float(r[1]) for r in motor_rows})
    conditions = [c for c in ("motor1", "motor2", "both") if any(r[0] == c for r in motor_rows)]
    width = 0.8 / max(len(conditions), 1)
    x = np.arange(len(speeds))
    for k, cond in enumerate(conditions):
        levels = []
        for speed in speeds:
            match = [float(r[2]) for r in motor_rows if r[0] == cond and float(r[1]) == speed]
            levels.append(match[0] if match else np.nan)
        ax.bar(
            x + (k - (len(conditions) - 1) / 2) * width,
            levels,
            width,
            color=CONDITION_COLORS[cond],
            label=CONDITION_LABELS[cond],
        )
    fans = [float(r[2]) for r in data if r[0] == "fans_only"]
    if fans:
        ax.axhline(fans[0], color="gray", ls=":", lw=1, label=f"Fans only ({fans[0]:.1f} dB)")
    ax.set_xticks(x)
    ax.set_xticklabels([f"{s:g}" for s in speeds])
    ax.set_xlabel("Motor speed (rad/s)")
    ax.set_ylabel("Sound level (dB)")
    ax.set_title("Noise by condition and speed (floor subtracted)")
    if speeds:
        ax.set_ylim(bottom=40.0)
    if conditions or fans:
        ax.legend(fontsize=8)
    ax.grid(True, axis="y", alpha=0.3)


BUILDERS = {
    "torque_regression": _torque_regression,
    "bode_magnitude": _bode_magnitude,
    "bode_phase": _bode_phase,
    "thermal_rise": _thermal_rise,
    "thermal_fall": _thermal_fall,
    "noise_bars": _noise_bars,
}
FIGURE_IDS = tuple(BUILDERS)


def build_figure(figure_id: str, header, rows):
    """Build the matplotlib Figure for parsed CSV content."""
    if figure_id not in BUILDERS:
        raise SchemaMismatch(
            f"unknown figure id '{figure_id}'; expected one of {list(FIGURE_IDS)}"
        )
    fig = plt.figure(figsize=(6.4, 4.0), dpi=100)
    BUILDERS[figure_id](header, rows, fig)
    fig.tight_layout()
    return fig


def render(spec: FigureSpec) -> Path:
    """Render one figure from CSV to the output path; returns the path."""
    header, rows = read_table(spec.input_csv)
    fig = build_figure(spec.figure_id, header, rows)
    out = Path(spec.output_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    try:
        # no timestamp metadata: re-rendering identical input is byte-stable
        fig.savefig(out, metadata={"Date": None})
    finally:
        plt.close(fig)
    return out
