"""oracle: sample a closed-form solution on the config grid."""

from __future__ import annotations

import logging

from mfg_exit.analytic import OracleSample, oracle_for
from mfg_exit.commands.common import CommandOptions, admit, output_dir, resolve_grid
from mfg_exit.config import ExitCode
from mfg_exit.functional import build_objective
from mfg_exit.grid import CellVectorField
from mfg_exit.models import RunConfig
from mfg_exit.problem import hamiltonian_gradient_kernel
from mfg_exit.utils.io import write_field_csv, write_flux_csv

logger = logging.getLogger(__name__)


def oracle_flux(config: RunConfig, sample: OracleSample) -> CellVectorField:
    """m D_pH(x, Du) from the exact gradient at centroids."""
    grid = sample.u.grid
    obj = build_objective(config.problem, grid)
    DpH = hamiltonian_gradient_kernel(config.problem.hamiltonian, sample.du.rows, obj.b)
    flux = sample.m.flat[:, None] * DpH
    return CellVectorField(grid, flux.reshape(grid.cell_shape + (grid.dim,)))


def cmd_oracle(config: RunConfig, opts: CommandOptions) -> ExitCode:
    if not admit(config, opts):
        return ExitCode.CONFIG
    grid = resolve_grid(config, opts)
    sample = oracle_for(config.problem, grid, config.oracle)
    logger.info(f"oracle: sampled {sample.family}")

    out = output_dir(config, opts)
    write_field_csv(sample.u, out / "u.csv")
    write_field_csv(sample.m, out / "m.csv")
    write_field_csv(sample.m_nodal, out / "m_nodal.csv")
    write_flux_csv(oracle_flux(config, sample), out / "flux.csv")
    return ExitCode.OK
