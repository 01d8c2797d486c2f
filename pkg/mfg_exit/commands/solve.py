"""solve: minimize the variational objective and write fields, report and diagnostics."""

from __future__ import annotations

import logging

from mfg_exit.commands.common import CommandOptions, admit, output_dir, resolve_grid
from mfg_exit.config import ExitCode
from mfg_exit.functional import build_objective
from mfg_exit.models import RunConfig
from mfg_exit.optimizer import solve
from mfg_exit.utils.io import write_field_csv, write_flux_csv, write_json
from mfg_exit.verify import check_weak_solution

logger = logging.getLogger(__name__)


def cmd_solve(config: RunConfig, opts: CommandOptions) -> ExitCode:
    if not admit(config, opts):
        return ExitCode.CONFIG
    grid = resolve_grid(config, opts)
    obj = build_objective(config.problem, grid)
    result = solve(obj, config.solver)

    out = output_dir(config, opts)
    write_field_csv(result.u, out / "u.csv")
    write_field_csv(result.density.m, out / "m.csv")
    write_field_csv(result.density.m_nodal, out / "m_nodal.csv")
    write_flux_csv(result.density.flux, out / "flux.csv")
    write_json(result.report, out / "report.json")

    diagnostics = check_weak_solution(
        config.problem, result.density.m, result.u, eps_m=config.eps_m, tol=config.verify_tol
    )
    write_json(diagnostics, out / "diagnostics.json")

    if not result.report.converged:
        return ExitCode.NOT_CONVERGED
    if opts.strict and not diagnostics.passed:
        failed = [name for name, ok in diagnostics.checks.items() if not ok]
        logger.warning(f"solve --strict: diagnostics failed {failed}")
        return ExitCode.VERIFICATION_FAILED
    return ExitCode.OK
