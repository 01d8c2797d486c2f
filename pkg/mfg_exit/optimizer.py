"""Projected descent over {w : w ≤ ψ on Γ_D}.

Default method: projected Barzilai–Borwein steps safeguarded by an Armijo
search along the projected path (monotone unless ``nonmonotone_window > 1``).
When those stop short of tol_pg with iterations left, scipy's L-BFGS-B picks
up from the last iterate. ``method = "lbfgsb"`` runs L-BFGS-B alone.
"""

from __future__ import annotations

import logging
from typing import NamedTuple, Optional, Protocol, Union

import numpy as np
from scipy.optimize import minimize

from mfg_exit.errors import ConfigurationError, SolverError
from mfg_exit.functional import DensityFields, Objective, recover_density
from mfg_exit.grid import BoundaryClass, Field
from mfg_exit.models import SolveOptions, SolveReport

logger = logging.getLogger(__name__)

# Relative resolution below which two objective values are indistinguishable
ROUNDOFF = 1e-12
# L-BFGS-B stops on relative change ≤ factr·eps; factr = 1 leaves the stop to gtol
LBFGSB_FTOL = float(np.finfo(float).eps)
LBFGSB_MEMORY = 20


class ProjectedProblem(Protocol):
    def value(self, w: np.ndarray) -> float: ...

    def grad(self, w: np.ndarray) -> np.ndarray: ...

    def project(self, w: np.ndarray) -> np.ndarray: ...


class LineSearchResult(NamedTuple):
    step: float
    w: np.ndarray
    value: float
    grad: Optional[np.ndarray]  # gradient at w when the search already computed it
    evaluations: int
    stalled: bool


class SolveResult(NamedTuple):
    u: Field
    density: DensityFields
    report: SolveReport


def project(w: Field, psi: Field, boundary: BoundaryClass) -> Field:
    """min(w, ψ) at Dirichlet nodes, everything else unchanged."""
    if w.grid != psi.grid or w.grid != boundary.grid:
        raise ConfigurationError("project needs w, ψ and the boundary on one grid")
    out = w.flat.copy()
    dn = boundary.dirichlet_nodes
    out[dn] = np.minimum(out[dn], psi.flat[dn])
    return Field(w.grid, out)


def projected_gradient_norm(problem: ProjectedProblem, w: np.ndarray, g: np.ndarray) -> float:
    """L∞ norm of w − P(w − g)."""
    return float(np.max(np.abs(w - problem.project(w - g)), initial=0.0))


def line_search(
    problem: ProjectedProblem,
    w: np.ndarray,
    direction: np.ndarray,
    step0: float,
    f0: Optional[float] = None,
    g0: Optional[np.ndarray] = None,
    opts: Optional[SolveOptions] = None,
    f_ref: Optional[float] = None,
) -> LineSearchResult:
    """Backtrack t from step0 until w_t = P(w + t d) passes the Armijo test.

    Accepts f(w_t) ≤ f_ref + c ⟨∇f(w), w_t − w⟩, where f_ref defaults to f(w);
    passing the max of recent objective values gives the nonmonotone variant.
    Near the optimum, where the decrease drops below the resolution of f, a
    trial within that resolution with ⟨∇f(w_t), w_t − w⟩ ≤ 0 is accepted
    instead; for convex f the directional derivative alone certifies
    f(w_t) ≤ f(w).
    """
    opts = opts or SolveOptions()
    evaluations = 0
    if f0 is None:
        f0 = problem.value(w)
        evaluations += 1
    if g0 is None:
        g0 = problem.grad(w)
    if f_ref is None or f_ref < f0:
        f_ref = f0

    if not np.any(direction):
        return LineSearchResult(step0, w, f0, g0, evaluations, stalled=False)

    tol = ROUNDOFF * max(1.0, abs(f0))
    t = step0
    while t >= opts.min_step:
        w_t = problem.project(w + t * direction)
        move = w_t - w
        slope = float(np.dot(g0, move))
        if not np.any(move) or slope >= 0:
            logger.debug(f"line_search: no descent along the projected path (slope {slope:.3g})")
            return LineSearchResult(t, w, f0, g0, evaluations, stalled=True)

        f_t = problem.value(w_t)
        evaluations += 1
        if np.isnan(f_t):
            raise SolverError(f"objective is NaN at step {t:.3g}", iterate=w_t, step=t)
        if f_t <= f_ref + opts.armijo_c * slope:
            return LineSearchResult(t, w_t, f_t, None, evaluations, stalled=False)
        if np.isfinite(f_t) and abs(f0 - f_t) <= tol:
            g_t = problem.grad(w_t)
            if float(np.dot(g_t, move)) <= 0:
                return LineSearchResult(t, w_t, f_t, g_t, evaluations, stalled=False)
        t *= opts.shrink

    logger.debug(f"line_search: step underflow below {opts.min_step:g}")
    return LineSearchResult(t, w, f0, g0, evaluations, stalled=True)


def _initial_iterate(obj: Objective, opts: SolveOptions, initial: Union[Field, np.ndarray, None]) -> np.ndarray:
    if opts.init == "psi":
        return obj.psi.copy()
    if opts.init == "zeros":
        return np.zeros(obj.grid.n_nodes)
    if initial is None:
        raise ConfigurationError("init = 'given' needs an initial field")
    w0 = initial.flat if isinstance(initial, Field) else np.asarray(initial, dtype=float).ravel()
    if w0.size != obj.grid.n_nodes:
        raise ConfigurationError(f"initial field needs {obj.grid.n_nodes} values, got {w0.size}")
    return w0.copy()


def active_set(obj: Objective, u: np.ndarray) -> list[int]:
    """Dirichlet nodes in contact with the exit cost."""
    dn = obj.boundary.dirichlet_nodes
    psi = obj.psi[dn]
    touching = u[dn] >= psi - ROUNDOFF * np.maximum(1.0, np.abs(psi))
    return [int(k) for k in dn[touching]]


def _finish(obj: Objective, w: np.ndarray, report: SolveReport) -> SolveResult:
    report.active_set = active_set(obj, w)
    report.dirichlet_nodes = int(obj.boundary.dirichlet_nodes.size)
    u = Field(obj.grid, w)
    if report.converged:
        logger.info(
            f"solve[{report.method}]: converged in {report.iterations} iterations, "
            f"I = {report.objective:.10g}, pg = {report.pg_norm:.3g}"
        )
    else:
        logger.warning(
            f"solve[{report.method}]: {report.status} after {report.iterations} iterations, "
            f"I = {report.objective:.10g}, pg = {report.pg_norm:.3g}"
        )
    return SolveResult(u=u, density=recover_density(obj, u), report=report)


def _solve_pbb(obj: Objective, opts: SolveOptions, w: np.ndarray, limit: int) -> tuple[SolveReport, np.ndarray]:
    f, g = obj.value_and_grad(w)
    if not np.isfinite(f):
        raise SolverError(f"objective is not finite at the initial iterate ({f})", iterate=w)

    history = [f]
    evaluations = 1
    step = opts.initial_step
    best_pg, best_at = np.inf, 0
    status = "max_iters"
    iterations = 0

    for it in range(1, limit + 1):
        pg = projected_gradient_norm(obj, w, g)
        if pg <= opts.tol_pg:
            status = "converged"
            break
        if pg < best_pg:
            best_pg, best_at = pg, it
        elif it - best_at >= opts.plateau_window:
            status = "plateau"
            break

        f_ref = max(history[-opts.nonmonotone_window :])
        ls = line_search(obj, w, -g, step, f0=f, g0=g, opts=opts, f_ref=f_ref)
        evaluations += ls.evaluations
        if ls.stalled:
            status = "line_search_stall"
            break

        g_new = ls.grad if ls.grad is not None else obj.grad(ls.w)
        s, y = ls.w - w, g_new - g
        sy = float(np.dot(s, y))
        if sy > 0:
            step = float(np.clip(np.dot(s, s) / sy, opts.bb_min_step, opts.max_step))
        else:
            # no curvature along s: widen the accepted step instead of jumping to max_step
            step = min(ls.step / opts.shrink, opts.max_step)

        w, f, g = ls.w, ls.value, g_new
        history.append(f)
        iterations = it

        if it % 100 == 0:
            logger.debug(f"pbb it={it} I={f:.12g} pg={pg:.3g} step={step:.3g}")
        # f flat and pg without a new best over the window
        if it >= opts.stall_window and it - best_at >= opts.stall_window:
            ref = history[-1 - opts.stall_window]
            if abs(ref - f) <= opts.tol_f * max(1.0, abs(f)):
                status = "objective_stall"
                break

    pg = projected_gradient_norm(obj, w, g)
    if pg <= opts.tol_pg:
        status = "converged"
    return SolveReport(
        method="pbb",
        iterations=iterations,
        evaluations=evaluations,
        objective=f,
        pg_norm=pg,
        converged=status == "converged",
        status=status,
        history=history,
    ), w


def _solve_lbfgsb(
    obj: Objective, opts: SolveOptions, w: np.ndarray, budget: Optional[int] = None
) -> tuple[SolveReport, np.ndarray]:
    """L-BFGS-B with the Dirichlet bounds, restarted from its last point while it keeps improving."""
    budget = opts.max_iters if budget is None else budget
    upper = np.full(obj.grid.n_nodes, np.inf)
    upper[obj.boundary.dirichlet_nodes] = obj.psi[obj.boundary.dirichlet_nodes]
    bounds = [(None, None if np.isinf(u) else float(u)) for u in upper]
    f, g = obj.value_and_grad(w)
    history = [f]
    iterations, evaluations = 0, 1

    def record(xk: np.ndarray) -> None:
        history.append(obj.value(xk))

    for attempt in range(opts.lbfgsb_restarts + 1):
        if iterations >= budget:
            break
        res = minimize(
            obj.value_and_grad,
            w,
            jac=True,
            method="L-BFGS-B",
            bounds=bounds,
            callback=record,
            options={
                "maxiter": budget - iterations,
                "gtol": opts.tol_pg,
                "ftol": LBFGSB_FTOL,
                "maxcor": LBFGSB_MEMORY,
            },
        )
        iterations += int(res.nit)
        evaluations += int(res.nfev)
        w_new = obj.project(res.x)
        f_new, g_new = obj.value_and_grad(w_new)
        if not np.isfinite(f_new):
            raise SolverError(f"L-BFGS-B ended on a non-finite objective ({res.message})", iterate=w_new)
        improved = f_new < f
        if f_new <= f:
            w, f, g = w_new, f_new, g_new
        pg = projected_gradient_norm(obj, w, g)
        logger.debug(f"lbfgsb[{attempt}]: {res.message}, I = {f:.12g}, pg = {pg:.3g}")
        if pg <= opts.tol_pg or not improved:
            break

    pg = projected_gradient_norm(obj, w, g)
    if pg <= opts.tol_pg:
        status = "converged"
    elif iterations >= budget:
        status = "max_iters"
    else:
        status = "objective_stall"
    return SolveReport(
        method="lbfgsb",
        iterations=iterations,
        evaluations=evaluations,
        objective=f,
        pg_norm=pg,
        converged=status == "converged",
        status=status,
        history=history,
    ), w


def _chain(first: SolveReport, second: SolveReport) -> SolveReport:
    """One report for a PBB run continued by L-BFGS-B; second starts where first ended."""
    return SolveReport(
        method=f"{first.method}+{second.method}",
        iterations=first.iterations + second.iterations,
        evaluations=first.evaluations + second.evaluations,
        objective=second.objective,
        pg_norm=second.pg_norm,
        converged=second.converged,
        status=second.status,
        handoff_status=first.status,
        history=first.history + second.history[1:],
    )


def solve(obj: Objective, opts: Optional[SolveOptions] = None, initial: Union[Field, np.ndarray, None] = None) -> SolveResult:
    """Minimize I over the admissible set; returns (u, density, report)."""
    opts = opts or SolveOptions()
    w0 = obj.project(_initial_iterate(obj, opts, initial))
    if opts.method == "lbfgsb":
        report, w = _solve_lbfgsb(obj, opts, w0)
        return _finish(obj, w, report)

    limit = min(opts.max_iters, opts.handoff_iters) if opts.fallback else opts.max_iters
    report, w = _solve_pbb(obj, opts, w0, limit)
    remaining = opts.max_iters - report.iterations
    if opts.fallback and not report.converged and remaining > 0:
        logger.info(
            f"solve[pbb]: {report.status} at pg = {report.pg_norm:.3g} after {report.iterations} "
            f"iterations, continuing with L-BFGS-B"
        )
        tail, w = _solve_lbfgsb(obj, opts, w, budget=remaining)
        report = _chain(report, tail)
    return _finish(obj, w, report)
