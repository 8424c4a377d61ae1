"""Command-line entry point: ``fas-kit <kind> --config file.toml [...]``."""

from __future__ import annotations

import argparse
import os
import sys
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .experiments import KINDS, ConfigError, ExperimentSpec, run_experiment, spec_from_mapping
from .output import csv_text, emit_csv, emit_plot

EXIT_OK = 0
EXIT_IO = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def bundled_config(kind: str) -> str:
    return resources.files("faskit").joinpath("configs", f"{kind}.toml").read_text("utf-8")


def load_config(path: Optional[str], kind: Optional[str]) -> dict:
    """Parse a TOML file, or the bundled example for ``kind`` when no path is given."""
    try:
        text = Path(path).read_text("utf-8") if path else bundled_config(kind)
    except OSError as exc:
        raise ConfigError(f"config: {exc}") from exc
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config: {exc}") from exc


def build_spec(args: argparse.Namespace, kind: Optional[str]) -> ExperimentSpec:
    cfg = load_config(args.config, kind)
    for key in ("seed", "trials", "out", "plot"):
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    return spec_from_mapping(cfg, kind)


def _common(p: argparse.ArgumentParser, run: bool = True) -> None:
    p.add_argument("--config", help="TOML experiment file (default: bundled example)")
    if run:
        p.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
        p.add_argument("--trials", type=int, help="Monte Carlo trials per sweep point")
        p.add_argument("--out", help="CSV output path (default: standard output)")
        p.add_argument("--plot", help="SVG plot output path")
        p.add_argument("--threads", type=int, help="worker threads (env FAS_KIT_THREADS)")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fas-kit", description="Fluid antenna system experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        _common(sub.add_parser(kind, help=f"run a {kind} sweep"))
    v = sub.add_parser("validate", help="check a config against its schema")
    _common(v, run=False)
    v.add_argument("--kind", choices=KINDS, help="expected experiment kind")
    f = sub.add_parser("fixtures", help="regenerate golden CSVs from the bundled configs")
    f.add_argument("--dir", default="fixtures", help="output directory")
    f.add_argument("--kinds", nargs="*", choices=KINDS, help="subset of kinds (default: all)")
    return parser


def _run(spec: ExperimentSpec) -> int:
    table = run_experiment(spec)
    try:
        if spec.out:
            emit_csv(table, spec.out)
        else:
            sys.stdout.write(csv_text(table))
        if spec.plot:
            report = emit_plot(table, spec.plot, spec.axes)
            for w in report.warnings:
                print(f"warning: {w}", file=sys.stderr)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    for row in table.rows:
        if row.error:
            print(f"error at {spec.sweep.name}={row.x}: {row.error}", file=sys.stderr)
    return EXIT_NUMERICAL if table.failed else EXIT_OK


def _fixtures(directory: str, kinds: Sequence[str]) -> int:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    status = EXIT_OK
    for kind in kinds:
        spec = spec_from_mapping(tomllib.loads(bundled_config(kind)), kind)
        table = run_experiment(spec)
        emit_csv(table, out / f"{kind}.csv")
        print(f"{kind}: {len(table.rows)} rows -> {out / f'{kind}.csv'}")
        if table.failed:
            status = EXIT_NUMERICAL
    return status


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = make_parser().parse_args(argv)
    try:
        if args.command == "validate":
            if not args.config and not args.kind:
                raise ConfigError("config: give --config or --kind")
            spec = spec_from_mapping(load_config(args.config, args.kind), args.kind)
            print(f"ok: {spec.kind}, {len(spec.sweep.values)} sweep points")
            return EXIT_OK
        if args.command == "fixtures":
            return _fixtures(args.dir, args.kinds or KINDS)
        if args.threads is not None:
            if args.threads < 1:
                raise ConfigError("threads: expected an integer >= 1")
            os.environ["FAS_KIT_THREADS"] = str(args.threads)
        return _run(build_spec(args, args.command))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
