"""verify: weak-solution diagnostics for stored fields or the configured oracle."""

from __future__ import annotations

import logging

import numpy as np

from mfg_exit.analytic import oracle_for
from mfg_exit.commands.common import CommandOptions, admit, output_dir, resolve_grid, seed_of
from mfg_exit.config import ExitCode
from mfg_exit.functional import build_objective, coercivity_profile
from mfg_exit.grid import Grid
from mfg_exit.models import AssumptionReport, RunConfig
from mfg_exit.problem import assumption_constants
from mfg_exit.utils.io import read_cell_csv, read_field_csv, write_json
from mfg_exit.verify import check_weak_solution

logger = logging.getLogger(__name__)


def _assumption_report(config: RunConfig, grid: Grid, seed: int) -> AssumptionReport:
    """Sampled assumption constants and the objective along a seeded admissible ray."""
    obj = build_objective(config.problem, grid)
    direction = np.random.default_rng(seed).standard_normal(grid.n_nodes)
    report = AssumptionReport(
        constants=assumption_constants(config.problem, seed=seed),
        coercivity=coercivity_profile(obj, direction),
    )
    logger.info(
        f"verify: growth C = {report.constants.growth_constant:.3g}, "
        f"boundary C = {report.coercivity.boundary_constant:.3g}, "
        f"min I along the ray = {report.coercivity.lower_bound:.6g}"
    )
    return report


def cmd_verify(config: RunConfig, opts: CommandOptions) -> ExitCode:
    if not admit(config, opts):
        return ExitCode.CONFIG
    grid = resolve_grid(config, opts)
    if opts.fields is not None:
        u = read_field_csv(opts.fields / "u.csv", grid)
        m = read_cell_csv(opts.fields / "m.csv", grid)
        logger.info(f"verify: fields from {opts.fields}")
    else:
        sample = oracle_for(config.problem, grid, config.oracle)
        u, m = sample.u, sample.m
        logger.info(f"verify: fields from the {sample.family} oracle")

    out = output_dir(config, opts)
    report = check_weak_solution(config.problem, m, u, eps_m=config.eps_m, tol=config.verify_tol)
    write_json(report, out / "diagnostics.json")
    write_json(_assumption_report(config, grid, seed_of(config, opts)), out / "assumptions.json")
    if report.passed:
        return ExitCode.OK
    failed = [name for name, ok in report.checks.items() if not ok]
    logger.warning(f"verify: {len(failed)} check(s) failed at tol={config.verify_tol:g}: {failed}")
    return ExitCode.VERIFICATION_FAILED
