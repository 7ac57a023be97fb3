"""Command-line entry point: ``processxai <stage> --config FILE``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .config import DEFAULT_CONFIG, ConfigError, load_config
from .gbdt import VARIANTS
from .pipeline import EXIT_CODES, STAGES, Pipeline, StageError


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="processxai",
        description="Defect prediction, Shapley feature selection and ICE control ranges for process data.",
    )
    sub = p.add_subparsers(dest="command", required=True)
    for name in (*STAGES, "run"):
        sp = sub.add_parser(name, help="run every stage in order" if name == "run" else f"run the {name} stage")
        sp.add_argument("--config", required=True, type=Path, help="INI configuration file")
        sp.add_argument("--out", type=Path, help="output directory (overrides output.dir)")
        sp.add_argument("--seed", type=int, help="set every stage seed to this value")
        # accepted by every verb so scripts can pass one flag set throughout
        sp.add_argument("--model", choices=VARIANTS, help="restrict to one model (default: all configured)")
        sp.add_argument("--plots", action="store_true", help="also write ICE/PDP plots as SVG (ranges stage)")
        sp.add_argument("-v", "--verbose", action="store_true")
    sub.add_parser("init-config", help="print a commented default configuration")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "init-config":
        sys.stdout.write(DEFAULT_CONFIG)
        return 0
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s"
    )
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        if args.model:
            cfg = replace(cfg, models=(args.model,))
        if args.plots:
            cfg = replace(cfg, plots=True)
    except ConfigError as exc:
        print(f"[config] {exc}", file=sys.stderr)
        return EXIT_CODES["config"]

    pipe = Pipeline(cfg, args.out)
    try:
        if args.command == "run":
            text = pipe.run_all()
        else:
            text = pipe.run_stage(args.command)
    except StageError as exc:
        print(str(exc), file=sys.stderr)
        return exc.exit_code
    if args.command in ("run", "report") and text:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
