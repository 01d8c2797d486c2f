"""gradcheck: central finite differences against the analytic gradient."""

from __future__ import annotations

import logging

import numpy as np

from mfg_exit.commands.common import CommandOptions, admit, resolve_grid, seed_of
from mfg_exit.config import ExitCode, settings
from mfg_exit.functional import build_objective, finite_difference_error
from mfg_exit.models import RunConfig

logger = logging.getLogger(__name__)


def cmd_gradcheck(config: RunConfig, opts: CommandOptions) -> ExitCode:
    if not admit(config, opts):
        return ExitCode.CONFIG
    grid = resolve_grid(config, opts)
    obj = build_objective(config.problem, grid)
    rng = np.random.default_rng(seed_of(config, opts))
    # Nodal noise of size ~2h keeps |Dw| of order one
    amplitude = 2.0 * min(grid.h)

    errors = []
    for k in range(settings.gradcheck_fields):
        w = amplitude * rng.standard_normal(grid.n_nodes)
        errors.append(finite_difference_error(obj, w, settings.fd_step))
        logger.debug(f"gradcheck field {k}: relative error {errors[-1]:.3g}")

    worst = max(errors)
    print(f"max relative error: {worst:.3e}")
    if worst <= settings.gradcheck_tol:
        logger.info(f"gradcheck: passed ({worst:.3e} <= {settings.gradcheck_tol:g})")
        return ExitCode.OK
    logger.warning(f"gradcheck: failed ({worst:.3e} > {settings.gradcheck_tol:g})")
    return ExitCode.VERIFICATION_FAILED
