#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Subcommand handlers for the simulator CLI.

Commands:
- run       - integrate a configured scenario and write its outputs
- mms       - manufactured-solution refinement study with observed orders
- galerkin  - reduced-basis convergence study
- verify    - invariant suite (and optionally the continuous-dependence study)
- bench     - per-phase throughput table
- describe  - resolved configuration and initial-data diagnostics

Every handler takes a CommandContext and returns an exit code.
"""

import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, TextIO

import pandas as pd

from config.settings import RunConfig, serialize_config
from galerkin.reduced import convergence_study
from reports.excel_templates import write_summary_workbook
from reports.series import write_table
from simulation.diagnostics import diagnostics_row, existence_horizon
from simulation.presets import build_initial_state
from simulation.runner import run
from utils.logging_conf import get_logger, log_output_event
from verify.bench import bench
from verify.dependence import continuous_dependence
from verify.invariants import invariant_suite
from verify.mms import mms_study

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


@dataclass
class CommandContext:
    config: RunConfig
    out_dir: Path
    options: Dict[str, object] = field(default_factory=dict)
    stdout: TextIO = field(default_factory=lambda: sys.stdout)

    def echo(self, text: str) -> None:
        self.stdout.write(text if text.endswith("\n") else text + "\n")


Handler = Callable[[CommandContext], int]


class CommandRouter:
    """Name -> handler table filled by the ``command`` decorator."""

    def __init__(self, name: str):
        self.name = name
        self.handlers: Dict[str, Handler] = {}
        self.descriptions: Dict[str, str] = {}

    def command(self, name: str, description: str = "") -> Callable[[Handler], Handler]:
        def register(handler: Handler) -> Handler:
            self.handlers[name] = handler
            self.descriptions[name] = description or (handler.__doc__ or "").strip().splitlines()[0]
            return handler
        return register

    @property
    def names(self) -> List[str]:
        return list(self.handlers)

    def dispatch(self, name: str, ctx: CommandContext) -> int:
        handler = self.handlers.get(name)
        if handler is None:
            logger.error(f"❌ [CLI] unknown command '{name}'")
            return EXIT_USAGE
        logger.info(f"▶️ [CLI] {name} -> {ctx.out_dir}")
        return handler(ctx)


commands_router = CommandRouter(name="commands")


def _workbook(ctx: CommandContext, name: str, title: str, summary: Dict[str, object],
              tables: Dict[str, pd.DataFrame], chart: Optional[Dict[str, object]] = None) -> None:
    if not ctx.config["output"]["excel"]:
        return
    try:
        write_summary_workbook(ctx.out_dir / name, title, summary, tables, chart)
    except OSError as e:
        log_output_event("xlsx", str(ctx.out_dir / name), "failed", error=str(e))
        raise


@commands_router.command("run", "integrate the configured scenario")
def cmd_run(ctx: CommandContext) -> int:
    """Integrate the configured scenario."""
    result = run(ctx.config, ctx.out_dir)
    last = result.series.iloc[-1]
    ctx.echo(f"steps={result.state.n} t={result.state.t:.6e} E_total={last['E_total']:.6e} "
             f"Z={last['Z']:.6e}")
    return EXIT_OK


@commands_router.command("mms", "manufactured-solution refinement study")
def cmd_mms(ctx: CommandContext) -> int:
    """Manufactured-solution refinement study."""
    study = mms_study(ctx.config, ctx.options.get("case"), ctx.options.get("mode"))
    write_table(study.errors, ctx.out_dir / "mms_errors.csv", kind="mms errors")
    write_table(study.orders, ctx.out_dir / "mms_orders.csv", kind="mms orders")
    _workbook(ctx, "mms.xlsx", "Manufactured solutions",
              {f"forcing_gap_{k}": v for k, v in study.forcing_gaps.items()},
              {"errors": study.errors, "orders": study.orders})
    for row in study.orders.itertuples():
        ctx.echo(f"{row.case} {row.mode} {row.field}: order {row.order:.3f}")
    return EXIT_OK


@commands_router.command("galerkin", "reduced-basis convergence study")
def cmd_galerkin(ctx: CommandContext) -> int:
    """Reduced-basis convergence study."""
    table = convergence_study(ctx.config)
    write_table(table, ctx.out_dir / "galerkin_convergence.csv", kind="galerkin")
    _workbook(ctx, "galerkin.xlsx", "Galerkin convergence",
              {"cells": str(ctx.config["galerkin"]["cells"]), "t_end": ctx.config["galerkin"]["t_end"]},
              {"convergence": table})
    ctx.echo(table.to_string(index=False))
    return EXIT_OK


@commands_router.command("verify", "invariant suite, exit 1 on any failure")
def cmd_verify(ctx: CommandContext) -> int:
    """Invariant suite; exit 1 on any failure."""
    study = ctx.options.get("study") or "invariants"
    code = EXIT_OK
    if study in ("invariants", "all"):
        report = invariant_suite(ctx.config)
        frame = report.frame()
        write_table(frame, ctx.out_dir / "invariants.csv", kind="invariants")
        text = report.summary_text()
        (ctx.out_dir / "invariants.txt").write_text(text, encoding="utf-8")
        ctx.echo(text)
        if not report.passed:
            code = EXIT_RUNTIME
    if study in ("dependence", "all"):
        result = continuous_dependence(ctx.config)
        write_table(result.summary, ctx.out_dir / "dependence.csv", kind="dependence")
        write_table(result.series, ctx.out_dir / "dependence_series.csv", kind="dependence")
        _workbook(ctx, "dependence.xlsx", "Continuous dependence",
                  {"ratio_spread": result.ratio_spread},
                  {"summary": result.summary, "series": result.series})
        ctx.echo(result.summary.to_string(index=False))
        ctx.echo(f"ratio spread {result.ratio_spread:.4g}")
    return code


@commands_router.command("bench", "per-phase throughput")
def cmd_bench(ctx: CommandContext) -> int:
    """Per-phase throughput table."""
    table = bench(ctx.config)
    write_table(table, ctx.out_dir / "bench.csv", kind="bench")
    _workbook(ctx, "bench.xlsx", "Throughput", {"sizes": str(ctx.config["bench"]["sizes"])},
              {"bench": table})
    ctx.echo(table.to_string(index=False))
    return EXIT_OK


@commands_router.command("describe", "resolved configuration and existence horizon")
def cmd_describe(ctx: CommandContext) -> int:
    """Resolved configuration and initial-data diagnostics."""
    config = ctx.config
    params = config.model_params()
    grid = config.grid_spec()
    state = build_initial_state(config["initial"]["preset"], grid, params, config["initial"])
    row = diagnostics_row(state, None, params)
    horizon = existence_horizon(row["Z"], config["run"]["c1"])
    ctx.echo(serialize_config(config))
    ctx.echo(f"# grid: {grid.dim}-D {grid.cells} {grid.bc_mode.value}, h_min={grid.min_spacing:.6e}")
    ctx.echo(f"# model_h: {str(params.model_h).lower()}")
    ctx.echo(f"# initial E_total: {row['E_total']:.6e}")
    ctx.echo(f"# initial Z: {row['Z']:.6e}")
    ctx.echo(f"# existence horizon (c1={config['run']['c1']}): {horizon:.6e}")
    return EXIT_OK
