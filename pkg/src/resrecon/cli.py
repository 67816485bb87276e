"""
Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 data or I/O error,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .config import load_config
from .errors import ConfigError, NumericalError, ReconError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4

log = logging.getLogger("resrecon")


def _out_dir(args, cfg) -> Path:
    return Path(args.out) if args.out else cfg.resolve(cfg.output_dir)


def _cmd_sweep(args) -> int:
    from .experiments import export, run_sweep

    cfg = load_config(args.config)
    report = run_sweep(cfg)
    export(report, _out_dir(args, cfg), config=cfg)
    log.info("sweep: %d records (%d skipped)", len(report.records), report.metadata["skipped_count"])
    return EXIT_OK


def _cmd_fixed(args) -> int:
    from .experiments import export, run_fixed_sensors

    cfg = load_config(args.config)
    report = run_fixed_sensors(cfg)
    export(report, _out_dir(args, cfg), config=cfg)
    for s in report.spread:
        if s["condition"] == "all":
            log.info("spread %s k=%d p=%d: %.1f%%", s["method"], s["k"], s["p"], s["spread_pct"])
    return EXIT_OK


def _cmd_gen_data(args) -> int:
    from .experiments import gen_data

    cfg = load_config(args.config)
    for path in gen_data(cfg, _out_dir(args, cfg)):
        log.info("wrote %s", path)
    return EXIT_OK


def _cmd_validate(args) -> int:
    from .experiments import ProblemData
    from .sensing import load_operator

    cfg = load_config(args.config)
    prob = ProblemData(cfg)
    if cfg.sensors is not None:
        load_operator(cfg.resolve(cfg.sensors), prob.grid)
    print(f"ok: n={prob.lib.n} cells, r={prob.lib.r} training snapshots, config {cfg.digest()[:12]}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="resrecon", description=__doc__.strip().splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, func, help_ in (
        ("sweep", _cmd_sweep, "error over basis counts and sensor counts"),
        ("fixed", _cmd_fixed, "surface vs dam-column sensor lines per intake condition"),
        ("gen-data", _cmd_gen_data, "write the synthetic library as grid.json + snapshots.csv"),
        ("validate", _cmd_validate, "check a config and the files it references"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("config", help="experiment config (JSON)")
        if name != "validate":
            p.add_argument("-o", "--out", help="output directory (default: config output_dir)")
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ReconError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
