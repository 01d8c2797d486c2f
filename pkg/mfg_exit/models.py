"""Pydantic models: problem data, solver options, and the report contract.

Specs are frozen inputs (read from run configs or built in code).
Reports are what the commands serialize to JSON.
"""

from __future__ import annotations

from typing import Any, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from mfg_exit.config import settings

Face = Literal["left", "right", "bottom", "top"]
BoundaryKind = Literal["neumann", "dirichlet"]
OracleFamily = Literal["zero_flux_1d", "positive_flux_1d", "exponential_2d"]


def _snake(value: Any) -> Any:
    """Normalize 'quadratic-positive-part' / 'Quadratic Positive Part' to snake case."""
    if not isinstance(value, str):
        return value
    return value.strip().lower().replace("-", "_").replace(" ", "_")


def _as_expression(value: Any) -> Any:
    """Numbers become constant expressions, bare strings become parameterless kinds."""
    if isinstance(value, bool):
        return value
    if isinstance(value, (int, float)):
        return {"kind": "constant", "params": {"value": float(value)}}
    if isinstance(value, str):
        return {"kind": value}
    return value


# --- Problem data ---


class ExpressionSpec(BaseModel):
    """A named function of position from the expression catalog."""
    model_config = ConfigDict(frozen=True)

    kind: str
    params: dict[str, Any] = Field(default_factory=dict)

    @field_validator("kind", mode="before")
    @classmethod
    def normalize_kind(cls, v: Any) -> Any:
        return _snake(v)

    @classmethod
    def constant(cls, value: float) -> ExpressionSpec:
        return cls(kind="constant", params={"value": float(value)})


class CouplingSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    variant: Literal["power", "quadratic_positive_part", "positive_power", "tabulated"] = "quadratic_positive_part"
    a: float = 1.0  # power amplitude
    alpha: float = 2.0  # growth exponent (power / positive_power)
    table_z: list[float] = Field(default_factory=list)  # tabulated G' knots
    table_gprime: list[float] = Field(default_factory=list)  # G' at the knots

    @field_validator("variant", mode="before")
    @classmethod
    def normalize_variant(cls, v: Any) -> Any:
        return _snake(v)

    @property
    def growth_exponent(self) -> float:
        """α; the quadratic-positive-part and tabulated variants grow quadratically."""
        if self.variant in ("power", "positive_power"):
            return self.alpha
        return 2.0


class HamiltonianSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    variant: Literal["quadratic", "model"] = "quadratic"
    beta: float = 2.0
    b: ExpressionSpec = Field(default_factory=lambda: ExpressionSpec.constant(1.0))
    V: ExpressionSpec = Field(default_factory=lambda: ExpressionSpec.constant(0.0))
    delta: Optional[float] = Field(default=None, gt=0, le=1)  # declared bounds δ ≤ b ≤ 1/δ

    @model_validator(mode="before")
    @classmethod
    def default_model_potential(cls, data: Any) -> Any:
        """The model Hamiltonian carries sin(|x|^2) unless V is given explicitly."""
        if isinstance(data, dict) and _snake(data.get("variant")) == "model" and "V" not in data:
            data = {**data, "V": {"kind": "sin_norm_sq"}}
        return data

    @field_validator("variant", mode="before")
    @classmethod
    def normalize_variant(cls, v: Any) -> Any:
        v = _snake(v)
        return {"quadratic_plus_potential": "quadratic"}.get(v, v)

    @field_validator("b", "V", mode="before")
    @classmethod
    def coerce_expression(cls, v: Any) -> Any:
        return _as_expression(v)

    @property
    def growth_exponent(self) -> float:
        """β; the quadratic variant is fixed at 2."""
        return 2.0 if self.variant == "quadratic" else self.beta


class BoundarySpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    partition: dict[Face, BoundaryKind]
    j: ExpressionSpec = Field(default_factory=lambda: ExpressionSpec.constant(0.0))  # influx density on Γ_N
    psi: ExpressionSpec = Field(default_factory=lambda: ExpressionSpec.constant(0.0))  # exit cost

    @field_validator("partition", mode="before")
    @classmethod
    def normalize_partition(cls, v: Any) -> Any:
        if isinstance(v, dict):
            return {_snake(face): _snake(kind) for face, kind in v.items()}
        return v

    @field_validator("j", "psi", mode="before")
    @classmethod
    def coerce_expression(cls, v: Any) -> Any:
        return _as_expression(v)


class DomainSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    extents: list[tuple[float, float]]  # one (lo, hi) pair per axis

    @field_validator("extents", mode="before")
    @classmethod
    def accept_flat_interval(cls, v: Any) -> Any:
        """(0, 1) is shorthand for [(0, 1)]."""
        if isinstance(v, (list, tuple)) and len(v) == 2 and all(isinstance(e, (int, float)) for e in v):
            return [tuple(v)]
        return v

    @property
    def dim(self) -> int:
        return len(self.extents)

    def contains(self, points: Any, atol: float = 1e-12) -> bool:
        pts = np.asarray(points, dtype=float).reshape(-1, self.dim)
        lo = np.array([e[0] for e in self.extents])
        hi = np.array([e[1] for e in self.extents])
        return bool(np.all(pts >= lo - atol) and np.all(pts <= hi + atol))


class ProblemSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    domain: DomainSpec
    coupling: CouplingSpec = Field(default_factory=CouplingSpec)
    hamiltonian: HamiltonianSpec = Field(default_factory=HamiltonianSpec)
    boundary: BoundarySpec

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def gamma(self) -> float:
        """Sobolev exponent γ = αβ."""
        return self.coupling.growth_exponent * self.hamiltonian.growth_exponent


# --- Validation ---


class Finding(BaseModel):
    assumption: str
    message: str

    def __str__(self) -> str:
        return f"[{self.assumption}] {self.message}"


class AssumptionConstants(BaseModel):
    delta: Optional[float] = None  # δ ≤ b ≤ 1/δ (sampled)
    growth_constant: Optional[float] = None  # |p|^β/C − C ≤ H ≤ C(|p|^β + 1)
    lower_bound_constant: Optional[float] = None  # −H + D_pH·p ≥ |p|^β/C − C (fitted)
    coupling_constant: Optional[float] = None  # G'(z) z ≥ −C


# --- Solver ---


class SolveOptions(BaseModel):
    max_iters: int = Field(default=5000, ge=1)
    tol_pg: float = Field(default=1e-8, gt=0)
    tol_f: float = Field(default=1e-12, gt=0)
    stall_window: int = Field(default=20, ge=1)
    plateau_window: int = Field(default=200, ge=1)
    nonmonotone_window: int = Field(default=1, ge=1)  # 1 keeps the Armijo test monotone
    armijo_c: float = Field(default=1e-4, gt=0, lt=1)
    shrink: float = Field(default=0.5, gt=0, lt=1)
    initial_step: float = Field(default=1.0, gt=0)
    min_step: float = Field(default=1e-16, gt=0)
    max_step: float = Field(default=1e6, gt=0)
    bb_min_step: float = Field(default=1e-12, gt=0)
    init: Literal["psi", "zeros", "given"] = "psi"
    method: Literal["pbb", "lbfgsb"] = "pbb"
    fallback: bool = True  # continue an unconverged pbb run with L-BFGS-B
    handoff_iters: int = Field(default=2000, ge=1)
    lbfgsb_restarts: int = Field(default=5, ge=0)

    @field_validator("init", "method", mode="before")
    @classmethod
    def normalize_mode(cls, v: Any) -> Any:
        return _snake(v)


SolveStatus = Literal["converged", "objective_stall", "plateau", "line_search_stall", "max_iters"]


class SolveReport(BaseModel):
    method: str = "pbb"
    iterations: int = 0
    evaluations: int = 0
    objective: float = 0.0
    pg_norm: float = 0.0
    active_set: list[int] = Field(default_factory=list)  # flat node indices with u = ψ
    dirichlet_nodes: int = 0
    converged: bool = False
    status: SolveStatus = "max_iters"
    handoff_status: Optional[SolveStatus] = None  # pbb status when L-BFGS-B took over
    history: list[float] = Field(default_factory=list)


# --- Diagnostics ---


class DiagnosticsReport(BaseModel):
    hj_residual_pos: float = 0.0
    hj_inequality_violation: float = 0.0
    continuity_residual: float = 0.0
    neumann_error: float = 0.0
    dirichlet_sign_violation: float = 0.0
    complementarity_residual: float = 0.0
    mass_balance_gap: float = 0.0
    free_boundary_flux: float = 0.0
    density_negativity: float = 0.0
    apriori_energy: float = 0.0
    # Companion integrability values
    integral_m_alpha_conj: float = 0.0
    integral_g_alpha: float = 0.0
    integral_flux_gamma_conj: float = 0.0
    first_order_constant: float = 0.0
    # Thresholds used
    eps_m: float = 0.0
    tol: float = 0.0
    checks: dict[str, bool] = Field(default_factory=dict)
    passed: bool = True


class MonotonicityResult(BaseModel):
    I1: float  # boundary term
    I2: float  # convexity term
    I3: float  # coupling term
    total: float


class UniquenessReport(BaseModel):
    status: Literal["passed", "violated", "inconclusive"]
    m_gap: float = 0.0
    du_gap: float = 0.0
    support_cells: int = 0
    neumann_pairing_gap: float = 0.0
    cross_complementarity: float = 0.0
    findings: list[str] = Field(default_factory=list)


class Interface(BaseModel):
    positive_cell: int
    other_cell: int
    axis: int
    normal_flux: float


class FreeBoundaryResult(BaseModel):
    interfaces: list[Interface] = Field(default_factory=list)
    max_normal_flux: float = 0.0


class CoercivityProfile(BaseModel):
    scales: list[float]
    gradient_norms: list[float]  # ‖Dw‖_γ
    objective_values: list[float]
    boundary_terms: list[float]  # ∫_{Γ_N} j w
    boundary_constant: float  # fitted C in ∫ j w ≤ C + C‖Dw‖_γ
    lower_bound: float  # min observed I[w]
    upper_bound_witness: float  # I[ψ]


class AssumptionReport(BaseModel):
    constants: AssumptionConstants
    coercivity: CoercivityProfile


# --- Commands ---


class CompareTolerances(BaseModel):
    m: float = 2e-2
    du: float = 5e-2
    objective: float = 1e-2


class CompareReport(BaseModel):
    oracle: str
    n_cells: list[int]
    m_linf: float
    m_l2: float
    du_linf: float
    du_l2: float
    objective_solver: float
    objective_oracle: float
    objective_gap: float
    converged: bool
    tolerances: CompareTolerances
    passed: bool


class RunConfig(BaseModel):
    problem: ProblemSpec
    n_cells: list[int] = Field(default_factory=lambda: [64])
    solver: SolveOptions = Field(default_factory=SolveOptions)
    output_dir: str = settings.output_dir
    oracle: Optional[OracleFamily] = None
    tolerances: CompareTolerances = Field(default_factory=CompareTolerances)
    verify_tol: float = settings.verify_tol
    eps_m: Optional[float] = None
    seed: int = settings.seed

    @field_validator("n_cells", mode="before")
    @classmethod
    def accept_scalar_resolution(cls, v: Any) -> Any:
        if isinstance(v, int):
            return [v]
        return v

    @field_validator("oracle", mode="before")
    @classmethod
    def normalize_oracle(cls, v: Any) -> Any:
        return _snake(v)
