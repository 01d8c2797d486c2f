"""compare: solver output against the closed-form oracle on the same grid."""

from __future__ import annotations

import logging

import numpy as np

from mfg_exit.analytic import oracle_for
from mfg_exit.commands.common import CommandOptions, admit, output_dir, resolve_grid
from mfg_exit.config import ExitCode
from mfg_exit.functional import build_objective
from mfg_exit.models import CompareReport, RunConfig
from mfg_exit.optimizer import solve
from mfg_exit.utils.io import write_json
from mfg_exit.verify import default_eps_m

logger = logging.getLogger(__name__)


def _norms(diff: np.ndarray, volume: float) -> tuple[float, float]:
    """(L∞, L²) of a per-cell difference; diff is (n,) or (n, dim)."""
    pointwise = np.abs(diff) if diff.ndim == 1 else np.linalg.norm(diff, axis=1)
    return float(np.max(pointwise, initial=0.0)), float(np.sqrt(volume * np.sum(pointwise**2)))


def cmd_compare(config: RunConfig, opts: CommandOptions) -> ExitCode:
    if not admit(config, opts):
        return ExitCode.CONFIG
    grid = resolve_grid(config, opts)
    sample = oracle_for(config.problem, grid, config.oracle)
    obj = build_objective(config.problem, grid)
    result = solve(obj, config.solver)

    vol = grid.cell_volume
    m_linf, m_l2 = _norms(result.density.m.flat - sample.m.flat, vol)
    eps_m = default_eps_m(sample.m) if config.eps_m is None else config.eps_m
    # Du is unique only where both densities are positive
    support = np.minimum(sample.m.flat, result.density.m.flat) > eps_m
    du_diff = obj.momenta(result.u.flat) - sample.du.rows
    du_linf, du_l2 = _norms(du_diff[support], vol)

    objective_oracle = obj.value(sample.u.flat)
    objective_gap = abs(result.report.objective - objective_oracle) / max(1.0, abs(objective_oracle))
    tol = config.tolerances
    report = CompareReport(
        oracle=sample.family,
        n_cells=list(grid.n_cells),
        m_linf=m_linf,
        m_l2=m_l2,
        du_linf=du_linf,
        du_l2=du_l2,
        objective_solver=result.report.objective,
        objective_oracle=objective_oracle,
        objective_gap=objective_gap,
        converged=result.report.converged,
        tolerances=tol,
        passed=m_linf <= tol.m and du_linf <= tol.du and objective_gap <= tol.objective,
    )
    out = output_dir(config, opts)
    write_json(result.report, out / "report.json")
    write_json(report, out / "compare.json")

    logger.info(
        f"compare[{sample.family}]: m_linf={m_linf:.3g} du_linf={du_linf:.3g} "
        f"objective_gap={objective_gap:.3g} passed={report.passed}"
    )
    return ExitCode.OK if report.passed else ExitCode.VERIFICATION_FAILED
