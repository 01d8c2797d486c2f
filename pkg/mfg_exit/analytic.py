"""Closed-form solutions used as oracles.

1D family on (lo, hi) with quadratic H, G(z) = ½(z⁺)², influx j0 at the left
end and the exit at the right end:

    j0 = 0:  m = max(0, V),  u_x = ∓√(−2 min(0, V))  (two branches)
    j0 > 0:  m³ − V m² − j0²/2 = 0,  u_x = −j0/m

2D family: the exponential-trigonometric square example, and the
complex-variable construction u + i m = f(z) for holomorphic f.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Callable, Optional

import numpy as np
from scipy.integrate import cumulative_trapezoid

from mfg_exit.errors import ConfigurationError, DomainError
from mfg_exit.grid import CellField, CellVectorField, Field, Grid, nodal_average
from mfg_exit.models import (
    BoundarySpec,
    CouplingSpec,
    DomainSpec,
    ExpressionSpec,
    HamiltonianSpec,
    ProblemSpec,
)
from mfg_exit.utils.expressions import build_expression, holomorphic_function

logger = logging.getLogger(__name__)

ScalarProfile = Callable[[np.ndarray], np.ndarray]

# Quadrature nodes for the value-function integrals (merged with the sample points)
QUADRATURE_NODES = 4097


# --- Cubic for the positive-flux density ---


def flux_threshold(j0: float) -> float:
    """Potential level −(3/2) j0^(2/3) where the cubic's discriminant vanishes."""
    return -1.5 * float(j0) ** (2.0 / 3.0)


def _cubic(m: np.ndarray, V: np.ndarray, j0: np.ndarray) -> np.ndarray:
    return m**3 - V * m**2 - 0.5 * j0**2


def cubic_positive_root(V: Any, j0: Any, max_iter: int = 200) -> Any:
    """Root of m³ − V m² − j0²/2 above max(0, V), by safeguarded Newton.

    The polynomial is increasing on that bracket, so the root is unique.
    """
    V_arr, j_arr = np.broadcast_arrays(np.asarray(V, dtype=float), np.asarray(j0, dtype=float))
    if np.any(~(j_arr > 0)):
        raise DomainError("cubic_positive_root needs j0 > 0")
    if not np.all(np.isfinite(V_arr)):
        raise DomainError("V must be finite")

    a = np.maximum(V_arr, 0.0)
    b = a + np.cbrt(0.5 * j_arr**2) + 1.0
    m = 0.5 * (a + b)
    for _ in range(max_iter):
        p = _cubic(m, V_arr, j_arr)
        a = np.where(p < 0, m, a)
        b = np.where(p > 0, m, b)
        dp = m * (3.0 * m - 2.0 * V_arr)
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = m - p / dp
        inside = np.isfinite(newton) & (newton > a) & (newton < b)
        m_next = np.where(p == 0, m, np.where(inside, newton, 0.5 * (a + b)))
        done = np.all(np.abs(m_next - m) <= 4 * np.finfo(float).eps * np.maximum(1.0, np.abs(m)))
        m = m_next
        if done:
            break
    return float(m) if np.ndim(V) == 0 and np.ndim(j0) == 0 else m


def cardano_positive_root(V: Any, j0: Any) -> Any:
    """Closed-form cross-check for cubic_positive_root.

    With m = t + V/3 the cubic becomes t³ + p t + q = 0. Above the flux
    threshold it has one real root (Cardano); at or below it three, and the
    largest one (trigonometric form) is the positive density.
    """
    V_arr, j_arr = np.broadcast_arrays(np.asarray(V, dtype=float), np.asarray(j0, dtype=float))
    if np.any(~(j_arr > 0)):
        raise DomainError("cardano_positive_root needs j0 > 0")
    p = -(V_arr**2) / 3.0
    q = -(2.0 * V_arr**3 / 27.0 + 0.5 * j_arr**2)
    disc = (0.5 * q) ** 2 + (p / 3.0) ** 3

    with np.errstate(invalid="ignore", divide="ignore"):
        root = np.sqrt(np.maximum(disc, 0.0))
        single = np.cbrt(-0.5 * q + root) + np.cbrt(-0.5 * q - root)
        r = np.sqrt(np.maximum(-p / 3.0, 0.0))
        cos_arg = np.clip(np.where(r > 0, (-0.5 * q) / r**3, 1.0), -1.0, 1.0)
        largest = 2.0 * r * np.cos(np.arccos(cos_arg) / 3.0)
    t = np.where(disc > 0, single, largest)
    m = t + V_arr / 3.0
    return float(m) if np.ndim(V) == 0 and np.ndim(j0) == 0 else m


# --- 1D oracles ---


@dataclass(frozen=True)
class Oracle1D:
    family: str  # zero_flux_1d | positive_flux_1d
    V: ScalarProfile
    j0: float = 0.0
    lo: float = 0.0
    hi: float = 1.0
    anchor: float = 0.0  # u(hi)
    branches: tuple[str, ...] = ("plus", "minus")

    def _branch(self, branch: Optional[str]) -> str:
        branch = branch or self.branches[0]
        if branch not in self.branches:
            raise ConfigurationError(f"{self.family} oracle has branches {self.branches}, not '{branch}'")
        return branch

    def m(self, x: Any) -> np.ndarray:
        V = self.V(np.asarray(x, dtype=float))
        if self.family == "zero_flux_1d":
            return np.maximum(V, 0.0)
        return cubic_positive_root(V, np.full_like(V, self.j0))

    def u_x(self, x: Any, branch: Optional[str] = None) -> np.ndarray:
        branch = self._branch(branch)
        if self.family == "zero_flux_1d":
            speed = np.sqrt(-2.0 * np.minimum(self.V(np.asarray(x, dtype=float)), 0.0))
            return -speed if branch == "plus" else speed
        return -self.j0 / self.m(x)

    def u_x_energy(self, x: Any) -> np.ndarray:
        """−√(2(m − V)), the Hamilton–Jacobi form of the positive-flux slope."""
        xs = np.asarray(x, dtype=float)
        return -np.sqrt(2.0 * np.maximum(self.m(xs) - self.V(xs), 0.0))

    def u(self, x: Any, branch: Optional[str] = None) -> np.ndarray:
        """u(x) = u(hi) − ∫_x^hi u_x, composite trapezoid on a merged node set."""
        branch = self._branch(branch)
        xs = np.asarray(x, dtype=float)
        nodes = np.union1d(np.linspace(self.lo, self.hi, QUADRATURE_NODES), np.clip(xs.ravel(), self.lo, self.hi))
        slope = self.u_x(nodes, branch)
        from_hi = cumulative_trapezoid(slope[::-1], nodes[::-1], initial=0.0)[::-1]
        return np.interp(xs, nodes, self.anchor + from_hi)

    def current(self, x: Any, branch: Optional[str] = None) -> np.ndarray:
        """m u_x; −j0 everywhere."""
        return self.m(x) * self.u_x(x, branch)


def oracle_1d_zero_flux(V: ScalarProfile, lo: float = 0.0, hi: float = 1.0, anchor: float = 0.0) -> Oracle1D:
    return Oracle1D(family="zero_flux_1d", V=V, j0=0.0, lo=lo, hi=hi, anchor=anchor, branches=("plus", "minus"))


def oracle_1d_positive_flux(
    V: ScalarProfile, j0: float, lo: float = 0.0, hi: float = 1.0, psi_right: float = 0.0
) -> Oracle1D:
    """Positive-flux oracle; contact at the exit forces u(hi) = ψ(hi)."""
    if not j0 > 0:
        raise DomainError(f"positive-flux oracle needs j0 > 0, got {j0}")
    return Oracle1D(family="positive_flux_1d", V=V, j0=float(j0), lo=lo, hi=hi, anchor=psi_right, branches=("minus",))


# --- 2D oracles ---


@dataclass(frozen=True, eq=False)
class ExponentialOracle:
    u: Field
    m: Field  # nodal samples
    m_cell: CellField  # centroid samples
    du: CellVectorField  # exact ∇u at centroids
    V: CellField
    j: Field  # influx density, zero off the left face
    psi: Field


def _exp_fields(points: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    x, y = points[..., 0], points[..., 1]
    decay = np.exp(-np.pi * x)
    u = decay * np.sin(np.pi * y)
    m = 3.0 * decay * np.maximum(np.cos(np.pi * y), 0.0)
    du = np.stack([-np.pi * u, np.pi * decay * np.cos(np.pi * y)], axis=-1)
    return u, m, du


def exponential_problem() -> ProblemSpec:
    """Unit square; influx on the left, reflecting top, exits right and bottom."""
    return ProblemSpec(
        domain=DomainSpec(extents=[(0.0, 1.0), (0.0, 1.0)]),
        coupling=CouplingSpec(variant="quadratic_positive_part"),
        hamiltonian=HamiltonianSpec(variant="quadratic", V=ExpressionSpec(kind="exp_trig_potential")),
        boundary=BoundarySpec(
            partition={"left": "neumann", "top": "neumann", "right": "dirichlet", "bottom": "dirichlet"},
            j=ExpressionSpec(kind="exp_trig_influx"),
            psi=ExpressionSpec(kind="exp_trig_exit_cost"),
        ),
    )


def oracle_2d_exponential(grid: Grid) -> ExponentialOracle:
    if grid.dim != 2 or not np.allclose(grid.lo, (0.0, 0.0)) or not np.allclose(grid.hi, (1.0, 1.0)):
        raise ConfigurationError(f"exponential oracle lives on the unit square, got {grid.lo}–{grid.hi}")
    nodes, centroids = grid.node_coordinates(), grid.cell_centroids()
    u, m, _ = _exp_fields(nodes)
    _, m_c, du_c = _exp_fields(centroids)
    V = build_expression(ExpressionSpec(kind="exp_trig_potential"))(centroids)
    on_left = np.isclose(nodes[..., 0], 0.0)
    j = np.where(on_left, build_expression(ExpressionSpec(kind="exp_trig_influx"))(nodes), 0.0)
    return ExponentialOracle(
        u=Field(grid, u),
        m=Field(grid, m),
        m_cell=CellField(grid, m_c),
        du=CellVectorField(grid, du_c),
        V=CellField(grid, V),
        j=Field(grid, j),
        psi=Field(grid, u),
    )


@dataclass(frozen=True, eq=False)
class HolomorphicExample:
    function: str
    q: float
    m_scale: float
    u: Field  # Re f at nodes, harmonic
    m_tilde: Field  # (m_scale Im f)⁺ at nodes
    m_cell: CellField  # same at centroids
    du: CellVectorField  # exact ∇u at centroids
    dm: CellVectorField  # exact ∇(m_scale Im f) at centroids
    V: CellField  # m̃^(1/q) − ½|∇u|² at centroids
    coupling: CouplingSpec
    hamiltonian: HamiltonianSpec
    coefficients: Optional[list[Any]] = None


def generate_holomorphic_example(
    f: str,
    q: float,
    grid: Grid,
    m_scale: float = 1.0,
    coefficients: Optional[list[Any]] = None,
) -> HolomorphicExample:
    """u + i m = f(x + iy); V chosen so that [|∇u|²/2 + V]⁺ = m̃^(1/q)."""
    if grid.dim != 2:
        raise ConfigurationError("the complex-variable construction is 2D")
    if not q > 0:
        raise DomainError(f"q must be positive, got {q}")
    fn, fprime = holomorphic_function(f, coefficients)

    def sample(points: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        z = points[..., 0] + 1j * points[..., 1]
        w, dw = fn(z), fprime(z)
        # f' = u_x − i u_y = m_y + i m_x by Cauchy–Riemann
        du = np.stack([np.real(dw), -np.imag(dw)], axis=-1)
        dm = m_scale * np.stack([np.imag(dw), np.real(dw)], axis=-1)
        return np.real(w), np.maximum(m_scale * np.imag(w), 0.0), du, dm

    u, m_nodes, _, _ = sample(grid.node_coordinates())
    _, m_c, du_c, dm_c = sample(grid.cell_centroids())
    params = {"function": f, "q": q, "m_scale": m_scale}
    if coefficients is not None:
        params["coefficients"] = coefficients
    V_spec = ExpressionSpec(kind="holomorphic_potential", params=params)
    V = build_expression(V_spec)(grid.cell_centroids())

    logger.debug(f"holomorphic example {f}: max m̃ = {float(np.max(m_nodes)):.4g}")
    return HolomorphicExample(
        function=f,
        q=float(q),
        m_scale=float(m_scale),
        u=Field(grid, u),
        m_tilde=Field(grid, m_nodes),
        m_cell=CellField(grid, m_c),
        du=CellVectorField(grid, du_c),
        dm=CellVectorField(grid, dm_c),
        V=CellField(grid, V),
        coupling=CouplingSpec(variant="positive_power", alpha=q + 1.0),
        hamiltonian=HamiltonianSpec(variant="quadratic", V=V_spec),
        coefficients=coefficients,
    )


# --- Problem builders and oracle selection ---


def interval_problem(
    V: Any, j0: float, psi_right: float = 0.0, lo: float = 0.0, hi: float = 1.0
) -> ProblemSpec:
    """1D example family: influx j0 at lo, exit cost psi_right at hi."""
    return ProblemSpec(
        domain=DomainSpec(extents=[(lo, hi)]),
        coupling=CouplingSpec(variant="quadratic_positive_part"),
        hamiltonian=HamiltonianSpec(variant="quadratic", V=V),
        boundary=BoundarySpec(partition={"left": "neumann", "right": "dirichlet"}, j=j0, psi=psi_right),
    )


@dataclass(frozen=True, eq=False)
class OracleSample:
    """An oracle sampled on a solver grid."""
    family: str
    u: Field
    m: CellField
    du: CellVectorField  # exact gradient at centroids
    m_nodal: Field


def _is_interval_family(problem: ProblemSpec) -> bool:
    c, h, bc = problem.coupling, problem.hamiltonian, problem.boundary
    quadratic_g = c.variant == "quadratic_positive_part" or (c.variant == "positive_power" and c.alpha == 2.0)
    return (
        problem.dim == 1
        and h.variant == "quadratic"
        and quadratic_g
        and bc.partition == {"left": "neumann", "right": "dirichlet"}
        and bc.j.kind == "constant"
    )


def detect_family(problem: ProblemSpec) -> Optional[str]:
    if _is_interval_family(problem):
        return "positive_flux_1d" if float(problem.boundary.j.params["value"]) > 0 else "zero_flux_1d"
    if problem == exponential_problem():
        return "exponential_2d"
    return None


def oracle_for(problem: ProblemSpec, grid: Grid, family: Optional[str] = None) -> OracleSample:
    """Sample the oracle of the problem's family on a grid."""
    detected = detect_family(problem)
    if detected is None:
        raise ConfigurationError("no closed-form oracle for this problem")
    if family is not None and family != detected:
        raise ConfigurationError(f"oracle family '{family}' does not match the problem ('{detected}')")

    if detected == "exponential_2d":
        ex = oracle_2d_exponential(grid)
        return OracleSample(family=detected, u=ex.u, m=ex.m_cell, du=ex.du, m_nodal=nodal_average(ex.m_cell))

    (lo, hi), = problem.domain.extents
    V_fn = build_expression(problem.hamiltonian.V)

    def V(x: np.ndarray) -> np.ndarray:
        return V_fn(np.asarray(x, dtype=float)[..., None])

    psi_right = float(build_expression(problem.boundary.psi)(np.array([[hi]]))[0])
    if detected == "positive_flux_1d":
        oracle = oracle_1d_positive_flux(V, float(problem.boundary.j.params["value"]), lo, hi, psi_right)
    else:
        oracle = oracle_1d_zero_flux(V, lo, hi, anchor=min(psi_right, 0.0))

    x_nodes = grid.node_coordinates()[..., 0]
    x_cells = grid.cell_centroids()[..., 0]
    m = CellField(grid, oracle.m(x_cells))
    return OracleSample(
        family=detected,
        u=Field(grid, oracle.u(x_nodes)),
        m=m,
        du=CellVectorField(grid, oracle.u_x(x_cells)[..., None]),
        m_nodal=nodal_average(m),
    )
