"""Command-line entry point.

Subcommands run individual protocols (or all five), dump the default
configuration, and run calibration fits.  Every run writes, per protocol,
the raw-data CSVs plus a JSON report under ``<out>/<protocol>/``, and a
``manifest.json`` binding the outputs to the exact config hash, seed and
backend.  Re-running into the same directory with a different config fails
loudly.

Exit codes: 0 success, 2 usage, 3 configuration, 4 protocol, 5 backend.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__, config
from .calibrate import PRESETS, calibrate
from .errors import ConfigError, EXIT_OK, TduBenchError
from .protocols import PROTOCOLS, run_protocol

SEED_ENV = "TDUBENCH_SEED"


def _resolve_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"{SEED_ENV}={env!r} is not an integer seed") from None
    return 0


def _load_config(args) -> config.ToolkitConfig:
    if args.config is None:
        return config.default_config()
    return config.load_file(args.config)


def _utcnow() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _load_manifest(out_dir: Path) -> dict | None:
    path = out_dir / "manifest.json"
    if not path.exists():
        return None
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _check_manifest(manifest: dict, cfg_hash: str, seed: int, backend: str) -> None:
    if manifest["config_hash"] != cfg_hash:
        raise ConfigError(
            "output directory holds results for a different config "
            f"(manifest {manifest['config_hash'][:12]}..., current {cfg_hash[:12]}...)"
        )
    if manifest["seed"] != seed or manifest["backend"] != backend:
        raise ConfigError(
            "output directory holds results for a different seed/backend "
            f"(manifest seed={manifest['seed']} backend={manifest['backend']})"
        )


def _run_protocols(protocols: list[str], args) -> int:
    cfg = _load_config(args)
    seed = _resolve_seed(args)
    out_dir = Path(args.out)
    cfg_hash = config.config_hash(cfg)
    manifest = _load_manifest(out_dir)
    if manifest is None:
        manifest = {
            "toolkit_version": __version__,
            "config_hash": cfg_hash,
            "seed": seed,
            "backend": args.backend,
            "accelerate": args.accelerate,
            "started_at": _utcnow(),
            "outputs": {},
        }
    else:
        _check_manifest(manifest, cfg_hash, seed, args.backend)

    for protocol in protocols:
        report = run_protocol(protocol, cfg, args.backend, seed)
        paths = report.write(out_dir / protocol)
        manifest["outputs"][protocol] = {
            name: str(Path(p).relative_to(out_dir)) for name, p in paths.items()
        }
        print(f"{protocol}: wrote {paths['report']}")

    manifest["finished_at"] = _utcnow()
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return EXIT_OK


def _cmd_dump_config(args) -> int:
    cfg = _load_config(args)
    sys.stdout.write(config.dumps(cfg))
    return EXIT_OK


def _cmd_calibrate(args) -> int:
    cfg = _load_config(args)
    free = None
    if args.free is not None:
        free = tuple(n for n in args.free.split(",") if n) if args.free else ()
    result = calibrate(cfg, args.fit, free)
    print(f"calibration preset '{result.preset}', free parameters: {list(result.free)}")
    for name, value in result.fitted.items():
        print(f"  {name} = {value:.6g}")
    print(f"{'target':<24}{'goal':>12}{'achieved':>14}{'rel err':>10}")
    for name, r in result.residuals.items():
        print(
            f"{name:<24}{r['target']:>12.4g}{r['achieved']:>14.6g}"
            f"{100 * r['rel_error']:>9.2f}%"
        )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg_path = out_dir / "calibrated.toml"
    with open(cfg_path, "w", encoding="utf-8") as fh:
        fh.write(config.dumps(result.config))
    with open(out_dir / "calibration.json", "w", encoding="utf-8") as fh:
        json.dump(
            {
                "preset": result.preset,
                "free": list(result.free),
                "fitted": result.fitted,
                "residuals": result.residuals,
                "max_rel_error": result.max_rel_error,
            },
            fh,
            indent=2,
        )
        fh.write("\n")
    print(f"wrote {cfg_path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tdubench",
        description="Benchmark toolkit for two-motor cable-driven tendon driver units.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="TOML config file")
    common.add_argument(
        "--backend", choices=("sim", "frame"), default="sim", help="drive backend"
    )
    common.add_argument(
        "--seed", type=int, default=None, help=f"RNG seed (fallback: ${SEED_ENV}, then 0)"
    )
    common.add_argument("--out", default="tdubench_out", help="output directory")
    common.add_argument(
        "--accelerate",
        action="store_true",
        help="force accelerated (virtual-time) execution; both shipped "
        "backends already run on the virtual clock",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for protocol in PROTOCOLS:
        sub.add_parser(protocol, parents=[common], help=f"run the {protocol} protocol")
    sub.add_parser("all", parents=[common], help="run all five protocols")
    sub.add_parser("dump-config", parents=[common], help="print the full config")
    cal = sub.add_parser("calibrate", parents=[common], help="fit plant parameters")
    cal.add_argument(
        "--fit", choices=sorted(PRESETS), required=True, help="calibration preset"
    )
    cal.add_argument(
        "--free",
        default=None,
        help="comma-separated free parameters (empty string: residuals only)",
    )
    return parser


def cli(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "dump-config":
            return _cmd_dump_config(args)
        if args.command == "calibrate":
            return _cmd_calibrate(args)
        if args.command == "all":
            return _run_protocols(list(PROTOCOLS), args)
        return _run_protocols([args.command], args)
    except TduBenchError as e:
        print(f"error[{e.code}]: {e}", file=sys.stderr)
        return e.exit_status


def main() -> None:
    sys.exit(cli())


if __name__ == "__main__":
    main()
