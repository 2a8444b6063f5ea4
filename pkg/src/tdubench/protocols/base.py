"""Shared protocol machinery: rigs, reports, seeding, telemetry recording.

Each protocol run owns one rig exclusively, consumes one child of the run's
seed sequence, and produces a :class:`TestReport` whose metrics are computed
from exactly the rows written to CSV, so re-running the analysis over the
stored files reproduces the report bit-for-bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .. import __version__
from ..config import ToolkitConfig, config_hash, _to_tree
from ..csvio import write_csv
from ..errors import BackendError
from ..framedrive import loopback_pair
from ..hal import Drive, Rig, SimDrive
from ..plant import Plant

BACKENDS = ("sim", "frame")
# protocol id -> (csv name -> columns) filled in by the protocol modules
PROTOCOLS = ("static-torque", "velocity-sweep", "thermal", "noise", "battery")


def build_rig(backend: str, cfg: ToolkitConfig) -> Rig:
    """Construct a rig for the requested backend string."""
    plant = Plant(cfg.plant)
    sim = SimDrive(
        plant,
        velocity_gains=cfg.control.velocity_gains,
        position_kp=cfg.control.position_kp,
    )
    if backend == "sim":
        drive: Drive = sim
    elif backend == "frame":
        drive, _ = loopback_pair(sim)
    else:
        raise BackendError(f"unknown backend '{backend}'; expected sim or frame")
    return Rig(backend=backend, drive=drive, plant=plant)


def protocol_rng(seed: int, protocol: str) -> np.random.Generator:
    """Deterministic child generator for one protocol of one run."""
    idx = PROTOCOLS.index(protocol)
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(idx,)))


@dataclass
class Table:
    columns: tuple[str, ...]
    rows: list[tuple] = field(default_factory=list)


@dataclass
class TestReport:
    """Configuration snapshot, raw-data tables and derived metrics of one run."""

    protocol: str
    backend: str
    seed: int
    config: ToolkitConfig
    metrics: dict = field(default_factory=dict)
    tables: dict[str, Table] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    def table(self, name: str, columns: Sequence[str]) -> Table:
        t = Table(columns=tuple(columns))
        self.tables[name] = t
        return t

    def to_json_dict(self) -> dict:
        return {
            "protocol": self.protocol,
            "provenance": {
                "toolkit_version": __version__,
                "backend": self.backend,
                "seed": self.seed,
                "config_hash": config_hash(self.config),
            },
            "config": _to_tree(self.config),
            "metrics": self.metrics,
            "notes": self.notes,
            "tables": {name: f"{name}.csv" for name in self.tables},
        }

    def write(self, out_dir) -> dict[str, str]:
        """Write report.json plus one CSV per table; returns written paths."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {}
        for name, table in self.tables.items():
            p = out / f"{name}.csv"
            write_csv(p, table.columns, table.rows)
            paths[name] = str(p)
        rp = out / "report.json"
        with open(rp, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)
            fh.write("\n")
        paths["report"] = str(rp)
        return paths


def run_protocol(
    protocol: str, cfg: ToolkitConfig, backend: str, seed: int
) -> TestReport:
    """Run one named protocol on a fresh rig."""
    from . import (
        run_battery,
        run_noise,
        run_static_torque,
        run_thermal,
        run_velocity_sweep,
    )

    runners = {
        "static-torque": run_static_torque,
        "velocity-sweep": run_velocity_sweep,
        "thermal": run_thermal,
        "noise": run_noise,
        "battery": run_battery,
    }
    if protocol not in runners:
        raise BackendError(f"unknown protocol '{protocol}'")
    rig = build_rig(backend, cfg)
    rng = protocol_rng(seed, protocol)
    report = runners[protocol](cfg, rig, rng)
    report.backend = backend
    report.seed = seed
    return report
