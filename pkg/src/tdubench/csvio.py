"""CSV emission and parsing with fixed schemas.

All numeric cells are recorded at 9 significant digits.  Values are
quantized to that precision *when recorded*, so re-parsing a written file
recovers bit-identical numbers and every derived metric can be reproduced
exactly from the file.  Column names and order are part of the toolkit's
external interface and are documented in docs/csv_schemas.md.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Iterable, Sequence

# protocol CSV schemas (column name -> documented unit)
TELEMETRY_COLUMNS = (
    "t_s",
    "motor_id",
    "position_rad",
    "velocity_rad_s",
    "torque_nm",
    "current_a",
    "stator_temp_c",
    "pack_voltage_v",
)
STATIC_COLUMNS = ("motor_id", "commanded_nm", "repetition", "tension_n", "measured_nm")
SWEEP_RECORD_COLUMNS = (
    "amplitude_rad_s",
    "freq_hz",
    "motor_id",
    "t_s",
    "ref_rad_s",
    "meas_rad_s",
)
BODE_COLUMNS = ("amplitude_rad_s", "freq_hz", "gain_db", "phase_deg")
THERMAL_CURVE_COLUMNS = ("phase", "segment", "t_s", "motor1_temp_c", "motor2_temp_c")
NOISE_RECORD_COLUMNS = ("condition", "speed_rad_s", "t_s", "level_db")
NOISE_LEVEL_COLUMNS = ("condition", "speed_rad_s", "leq_db", "floor_subtracted")
DISCHARGE_COLUMNS = ("load_kg", "t_s", "pack_voltage_v")
BATTERY_TELEMETRY_COLUMNS = ("load_kg",) + TELEMETRY_COLUMNS
RUNTIME_COLUMNS = (
    "load_kg",
    "runtime_s",
    "runtime_hms",
    "mean_torque_nm",
    "sd_torque_nm",
    "mean_power_w",
    "energy_used_wh",
)


def q(x: float) -> float:
    """Quantize to 9 significant digits (the CSV recording precision)."""
    return float(format(x, ".9g"))


def fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".9g")
    return str(value)


def format_rows(rows: Iterable[Sequence]) -> list[list[str]]:
    return [[fmt(v) for v in row] for row in rows]


def render_csv(columns: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(columns)
    w.writerows(format_rows(rows))
    return buf.getvalue()


def write_csv(path, columns: Sequence[str], rows: Iterable[Sequence]) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(render_csv(columns, rows))


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    """Parse a toolkit CSV back into its header and string cells."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, [row for row in reader]


def column(
    header: Sequence[str], rows: Sequence[Sequence[str]], name: str
) -> list[str]:
    i = list(header).index(name)
    return [row[i] for row in rows]


def float_column(
    header: Sequence[str], rows: Sequence[Sequence[str]], name: str
) -> list[float]:
    return [float(v) for v in column(header, rows, name)]


def hms(seconds: float) -> str:
    """HH:MM:SS rendering of a duration."""
    total = int(round(seconds))
    h, rem = divmod(total, 3600)
    m, s = divmod(rem, 60)
    return f"{h:02d}:{m:02d}:{s:02d}"
