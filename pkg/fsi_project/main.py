#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Command-line entry point of the diffuse-interface FSI simulator.

    python main.py run --config scenario.toml --out results/ --set time.t_end=0.5

Exit codes: 0 success, 1 runtime failure (or failed invariants), 2 usage or
configuration error.
"""

import argparse
import os
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from dotenv import load_dotenv

from config.settings import parse_config
from core.errors import ConfigError, ConfigurationError, FsiError
from handlers.commands import EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, CommandContext, commands_router
from utils.logging_conf import get_logger, init_logging

logger = get_logger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fsi", description="Diffuse-interface FSI simulator")
    parser.add_argument("command", choices=commands_router.names,
                        help="; ".join(f"{k}: {v}" for k, v in commands_router.descriptions.items()))
    parser.add_argument("--config", type=Path, default=None, help="TOML run configuration")
    parser.add_argument("--out", type=Path, default=None,
                        help="output directory (default: $FSI_OUTPUT_DIR or ./output)")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override section.key=value (TOML literal), repeatable")
    parser.add_argument("--case", default=None, help="mms: case name (default mms.case)")
    parser.add_argument("--mode", default=None, choices=("space", "time"), help="mms: refinement mode")
    parser.add_argument("--study", default="invariants", choices=("invariants", "dependence", "all"),
                        help="verify: which study to run")
    return parser


def _read_config_text(path: Optional[Path]) -> str:
    if path is None:
        return ""
    try:
        return path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError([f"cannot read config '{path}': {e}"]) from e


def cli(argv: Optional[Sequence[str]] = None) -> int:
    """Parse ``argv``, dispatch the subcommand and map failures to exit codes."""
    load_dotenv()
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv) if argv is not None else None)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE

    try:
        config = parse_config(_read_config_text(args.config), args.overrides)
    except ConfigError as e:
        for problem in e.errors:
            logger.error(f"❌ [Config] {problem}")
        sys.stderr.write("configuration rejected:\n" + "".join(f"  {p}\n" for p in e.errors))
        return EXIT_USAGE

    out_dir = args.out or Path(os.getenv("FSI_OUTPUT_DIR", "output"))
    options = {"case": args.case, "mode": args.mode, "study": args.study}
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        return commands_router.dispatch(args.command, CommandContext(config, out_dir, options))
    except ConfigurationError as e:
        logger.exception(f"❌ [CLI] {args.command}: invalid setup: {e}")
        return EXIT_USAGE
    except (FsiError, OSError, ValueError, ArithmeticError) as e:
        logger.exception(f"❌ [CLI] {args.command} failed: {e}")
        return EXIT_RUNTIME


def main(argv: Optional[List[str]] = None) -> None:
    init_logging()
    sys.exit(cli(argv))


if __name__ == "__main__":
    main()
