"""Problem data operations: coupling G/G'/g, Hamiltonian H/D_pH, assumption checks.

Everything is vectorized over numpy arrays; scalar input gives a float back.
Kernels that take pre-sampled V and b (hamiltonian_kernel,
hamiltonian_gradient_kernel) are what the functional uses on cell centroids.
"""

from __future__ import annotations

import logging
from functools import partial
from typing import Any, Callable, Optional

import numpy as np
from scipy.optimize import brentq

from mfg_exit.config import FACE_AXES, FACES_BY_DIM, settings
from mfg_exit.errors import ConfigurationError, DomainError
from mfg_exit.models import (
    AssumptionConstants,
    CouplingSpec,
    DomainSpec,
    Finding,
    HamiltonianSpec,
    ProblemSpec,
)
from mfg_exit.utils.expressions import evaluate_expression

logger = logging.getLogger(__name__)


def _as_output(values: np.ndarray, like: Any) -> Any:
    """Float for scalar input, array otherwise."""
    return float(values) if np.ndim(like) == 0 else values


# --- Tabulated coupling ---


def _table(spec: CouplingSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Knots, G' values, segment slopes and G at the knots (G(z_0) = 0)."""
    z = np.asarray(spec.table_z, dtype=float)
    s = np.asarray(spec.table_gprime, dtype=float)
    if z.size < 2 or z.size != s.size:
        raise ConfigurationError("tabulated coupling needs at least two (z, G') knots of equal length")
    if np.any(np.diff(z) <= 0):
        raise ConfigurationError("tabulated coupling knots must be strictly increasing")
    dz = np.diff(z)
    slopes = np.diff(s) / dz
    g_knots = np.concatenate([[0.0], np.cumsum(0.5 * (s[:-1] + s[1:]) * dz)])
    return z, s, slopes, g_knots


def _segment(z_knots: np.ndarray, z: np.ndarray) -> np.ndarray:
    # last segment doubles as the linear extension above the table
    return np.clip(np.searchsorted(z_knots, z, side="right") - 1, 0, z_knots.size - 2)


def _tabulated_G(spec: CouplingSpec, z: np.ndarray) -> np.ndarray:
    zk, s, slopes, gk = _table(spec)
    k = _segment(zk, z)
    dz = z - zk[k]
    inside = gk[k] + s[k] * dz + 0.5 * slopes[k] * dz**2
    return np.where(z < zk[0], s[0] * (z - zk[0]), inside)


def _tabulated_Gprime(spec: CouplingSpec, z: np.ndarray) -> np.ndarray:
    zk, s, slopes, _ = _table(spec)
    k = _segment(zk, z)
    return np.where(z < zk[0], s[0], s[k] + slopes[k] * (z - zk[k]))


def _tabulated_g(spec: CouplingSpec, mu: np.ndarray) -> np.ndarray:
    zk, s, slopes, _ = _table(spec)
    if slopes[-1] <= 0:
        raise DomainError("tabulated G' must end with a positive slope to be invertible")
    if np.any(mu < s[0]):
        raise DomainError(f"mu below the range of G' (min {s[0]})")
    # first knot with G' > mu; the segment before it holds the largest preimage
    k = np.clip(np.searchsorted(s, mu, side="right") - 1, 0, s.size - 2)
    return zk[k] + (mu - s[k]) / slopes[k]


# --- Coupling kernels: variant → f(spec, array) ---

_G: dict[str, Callable[[CouplingSpec, np.ndarray], np.ndarray]] = {
    "power": lambda c, z: c.a * np.maximum(z + 1.0, 0.0) ** c.alpha,
    "quadratic_positive_part": lambda c, z: 0.5 * np.maximum(z, 0.0) ** 2,
    "positive_power": lambda c, z: np.maximum(z, 0.0) ** c.alpha / c.alpha,
    "tabulated": _tabulated_G,
}

_G_PRIME: dict[str, Callable[[CouplingSpec, np.ndarray], np.ndarray]] = {
    "power": lambda c, z: c.a * c.alpha * np.maximum(z + 1.0, 0.0) ** (c.alpha - 1.0),
    "quadratic_positive_part": lambda c, z: np.maximum(z, 0.0),
    "positive_power": lambda c, z: np.maximum(z, 0.0) ** (c.alpha - 1.0),
    "tabulated": _tabulated_Gprime,
}

_G_INVERSE: dict[str, Callable[[CouplingSpec, np.ndarray], np.ndarray]] = {
    "power": lambda c, mu: (mu / (c.a * c.alpha)) ** (1.0 / (c.alpha - 1.0)) - 1.0,
    "quadratic_positive_part": lambda c, mu: mu.copy(),
    "positive_power": lambda c, mu: mu ** (1.0 / (c.alpha - 1.0)),
    "tabulated": _tabulated_g,
}


def coupling_G(spec: CouplingSpec, z: Any) -> Any:
    """G(z); total on the real line."""
    return _as_output(_G[spec.variant](spec, np.asarray(z, dtype=float)), z)


def coupling_Gprime(spec: CouplingSpec, z: Any) -> Any:
    """G'(z) ≥ 0, non-decreasing, zero on the flat region."""
    return _as_output(_G_PRIME[spec.variant](spec, np.asarray(z, dtype=float)), z)


def coupling_g(spec: CouplingSpec, mu: Any) -> Any:
    """Pseudo-inverse max{z : G'(z) = mu}.

    Raises DomainError for mu < 0, non-finite mu, or mu outside the range of G'.
    """
    m = np.asarray(mu, dtype=float)
    if not np.all(np.isfinite(m)):
        raise DomainError("mu must be finite")
    if np.any(m < 0):
        raise DomainError(f"mu must be non-negative (min {float(np.min(m))})")
    if spec.variant in ("power", "positive_power") and spec.alpha <= 1:
        raise DomainError("pseudo-inverse of G' requires alpha > 1")
    if spec.variant == "power" and spec.a <= 0:
        raise DomainError("pseudo-inverse of G' requires a > 0")
    return _as_output(_G_INVERSE[spec.variant](spec, m), mu)


# --- Hamiltonian ---


def hamiltonian_kernel(spec: HamiltonianSpec, p: np.ndarray, V: np.ndarray, b: np.ndarray) -> np.ndarray:
    """H from momenta p (..., d) and pre-sampled V, b (...)."""
    sq = np.sum(p**2, axis=-1)
    if spec.variant == "quadratic":
        return 0.5 * sq + V
    return b * ((sq + 1.0) ** (0.5 * spec.beta) - 1.0) + V


def hamiltonian_gradient_kernel(spec: HamiltonianSpec, p: np.ndarray, b: np.ndarray) -> np.ndarray:
    """D_pH from momenta p (..., d) and pre-sampled b (...)."""
    if spec.variant == "quadratic":
        return np.array(p, dtype=float, copy=True)
    sq = np.sum(p**2, axis=-1)
    scale = spec.beta * b * (sq + 1.0) ** (0.5 * spec.beta - 1.0)
    return scale[..., None] * p


def _point_and_momentum(x: Any, p: Any) -> tuple[np.ndarray, np.ndarray]:
    x_arr = np.asarray(x, dtype=float)
    p_arr = np.asarray(p, dtype=float)
    if x_arr.ndim == 0:
        x_arr = x_arr.reshape(1)
    if p_arr.ndim == 0:
        p_arr = p_arr.reshape(1)
    return x_arr, p_arr


def _coefficients(spec: HamiltonianSpec, x: np.ndarray, domain: Optional[DomainSpec]) -> tuple[np.ndarray, np.ndarray]:
    if domain is not None and not domain.contains(x):
        raise DomainError("x outside the closed domain")
    V = evaluate_expression(spec.V, x)
    b = evaluate_expression(spec.b, x) if spec.variant == "model" else np.ones_like(V)
    return V, b


def hamiltonian_H(spec: HamiltonianSpec, x: Any, p: Any, domain: Optional[DomainSpec] = None) -> Any:
    """H(x, p). Points broadcast against momenta along leading axes."""
    x_arr, p_arr = _point_and_momentum(x, p)
    V, b = _coefficients(spec, x_arr, domain)
    out = hamiltonian_kernel(spec, p_arr, V, b)
    return float(out) if out.ndim == 0 else out


def hamiltonian_DpH(spec: HamiltonianSpec, x: Any, p: Any, domain: Optional[DomainSpec] = None) -> np.ndarray:
    """D_pH(x, p), same trailing shape as p."""
    x_arr, p_arr = _point_and_momentum(x, p)
    _, b = _coefficients(spec, x_arr, domain)
    return hamiltonian_gradient_kernel(spec, p_arr, b)


# --- Assumption checks ---


def sample_domain(domain: DomainSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """n uniform points plus the domain corners, shape (n + 2^d, d)."""
    lo = np.array([e[0] for e in domain.extents])
    hi = np.array([e[1] for e in domain.extents])
    corners = np.array(np.meshgrid(*zip(lo, hi), indexing="ij")).reshape(domain.dim, -1).T
    return np.vstack([rng.uniform(lo, hi, size=(n, domain.dim)), corners])


def face_points(domain: DomainSpec, face: str, n: int = 257) -> np.ndarray:
    """Sample points along one boundary face (the endpoint itself in 1D)."""
    axis, side = FACE_AXES[face]
    lo = np.array([e[0] for e in domain.extents])
    hi = np.array([e[1] for e in domain.extents])
    fixed = hi[axis] if side else lo[axis]
    if domain.dim == 1:
        return np.array([[fixed]])
    other = 1 - axis
    pts = np.empty((n, 2))
    pts[:, axis] = fixed
    pts[:, other] = np.linspace(lo[other], hi[other], n)
    return pts


def _partition_findings(problem: ProblemSpec) -> list[Finding]:
    findings = []
    faces = FACES_BY_DIM.get(problem.dim)
    if faces is None:
        return [Finding(assumption="domain", message=f"domain must be 1D or 2D, got {problem.dim}D")]
    partition = problem.boundary.partition
    for face in partition:
        if face not in faces:
            findings.append(Finding(assumption="boundary", message=f"face {face} does not exist in {problem.dim}D"))
    for face in faces:
        if face not in partition:
            findings.append(Finding(assumption="boundary", message=f"face {face} unlabeled"))
    kinds = {partition[f] for f in faces if f in partition}
    if "neumann" not in kinds:
        findings.append(Finding(assumption="boundary", message="Γ_N is empty"))
    if "dirichlet" not in kinds:
        findings.append(Finding(assumption="boundary", message="Γ_D is empty"))
    return findings


def _midpoint_gap(f: Callable[[np.ndarray], np.ndarray], u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """f((u+v)/2) − (f(u)+f(v))/2, scaled slack subtracted."""
    fu, fv = f(u), f(v)
    mid = f(0.5 * (u + v))
    slack = 1e-12 * np.maximum(1.0, np.abs(fu) + np.abs(fv))
    return mid - 0.5 * (fu + fv) - slack


def validate_spec(problem: ProblemSpec, samples: Optional[int] = None, seed: Optional[int] = None) -> list[Finding]:
    """Sampling-based check of the standing assumptions; empty list when all pass."""
    n = samples or settings.validation_samples
    rng = np.random.default_rng(settings.seed if seed is None else seed)
    c, h = problem.coupling, problem.hamiltonian
    findings: list[Finding] = []

    # Coupling parameters
    if c.variant in ("power", "positive_power") and not c.alpha > 1:
        findings.append(Finding(assumption="coupling.growth", message="alpha must exceed 1"))
    if c.variant == "power" and not c.a > 0:
        findings.append(Finding(assumption="coupling.growth", message="a must be positive"))
    if c.variant == "tabulated":
        try:
            _, s, slopes, _ = _table(c)
            if s[0] != 0:
                findings.append(Finding(assumption="coupling.range", message="tabulated G' must start at 0"))
            if slopes[-1] <= 0:
                findings.append(Finding(assumption="coupling.growth", message="tabulated G' must end with a positive slope"))
        except ConfigurationError as e:
            findings.append(Finding(assumption="coupling.table", message=str(e)))
            return findings + _partition_findings(problem)

    if h.variant == "model" and not h.beta > 1:
        findings.append(Finding(assumption="hamiltonian.growth", message="beta must exceed 1"))

    findings.extend(_partition_findings(problem))

    # Coupling shape on random pairs
    with np.errstate(all="ignore"):
        z1, z2 = rng.uniform(-10.0, 10.0, size=(2, n))
        G = partial(_G[c.variant], c)
        if np.any(_midpoint_gap(G, z1, z2) > 0) or not np.all(np.isfinite(G(z1))):
            findings.append(Finding(assumption="coupling.convexity", message="G not convex"))
        lo, hi = np.minimum(z1, z2), np.maximum(z1, z2)
        gp_lo, gp_hi = _G_PRIME[c.variant](c, lo), _G_PRIME[c.variant](c, hi)
        if np.any(gp_lo > gp_hi + 1e-12 * np.maximum(1.0, np.abs(gp_hi))) or np.any(gp_lo < 0):
            findings.append(Finding(assumption="coupling.monotonicity", message="G' not non-decreasing"))

    try:
        pts = sample_domain(problem.domain, n, rng)
        V = evaluate_expression(h.V, pts)
        b = evaluate_expression(h.b, pts) if h.variant == "model" else np.ones_like(V)
    except ConfigurationError as e:
        findings.append(Finding(assumption="hamiltonian.data", message=str(e)))
        return findings

    if not np.all(np.isfinite(V)):
        findings.append(Finding(assumption="hamiltonian.potential", message="V not finite on the domain"))
    if h.variant == "model" and (not np.all(np.isfinite(b)) or np.any(b <= 0)):
        findings.append(Finding(assumption="hamiltonian.coefficient", message="b must be positive and bounded"))
    elif h.variant == "model" and h.delta is not None:
        b_min, b_max = float(np.min(b)), float(np.max(b))
        if b_min < h.delta or b_max > 1.0 / h.delta:
            findings.append(Finding(
                assumption="hamiltonian.coefficient",
                message=f"b outside [δ, 1/δ] = [{h.delta:g}, {1.0 / h.delta:g}] (sampled range [{b_min:.3g}, {b_max:.3g}])",
            ))

    # Convexity of p ↦ H(x, p)
    with np.errstate(all="ignore"):
        p1 = rng.normal(scale=3.0, size=pts.shape)
        p2 = rng.normal(scale=3.0, size=pts.shape)
        if np.any(_midpoint_gap(lambda p: hamiltonian_kernel(h, p, V, b), p1, p2) > 0):
            findings.append(Finding(assumption="hamiltonian.convexity", message="H not convex in p"))

    # Influx sign on Γ_N
    for face, kind in problem.boundary.partition.items():
        if kind != "neumann" or face not in FACES_BY_DIM.get(problem.dim, ()):
            continue
        try:
            j = evaluate_expression(problem.boundary.j, face_points(problem.domain, face))
        except ConfigurationError as e:
            findings.append(Finding(assumption="boundary.influx", message=str(e)))
            continue
        if np.any(j < 0):
            findings.append(Finding(assumption="boundary.influx", message=f"j negative on Γ_N (face {face}, min {float(np.min(j)):.3g})"))

    if findings:
        logger.warning(f"validate_spec: {len(findings)} finding(s): " + "; ".join(str(f) for f in findings))
    return findings


def _fit_lower_bound_constant(margin: np.ndarray, power: np.ndarray) -> Optional[float]:
    """Smallest C ≥ 1 with margin ≥ power/C − C on every sample."""
    def worst(C: float) -> float:
        return float(np.min(margin - power / C + C))

    if worst(1.0) >= 0:
        return 1.0
    upper = 2.0
    for _ in range(60):
        if worst(upper) >= 0:
            return float(brentq(worst, upper / 2, upper, xtol=1e-10))
        upper *= 2
    return None


def assumption_constants(problem: ProblemSpec, samples: Optional[int] = None, seed: Optional[int] = None) -> AssumptionConstants:
    """Sampled constants behind the growth, lower-bound and coupling assumptions."""
    n = samples or settings.validation_samples
    rng = np.random.default_rng(settings.seed if seed is None else seed)
    c, h = problem.coupling, problem.hamiltonian
    beta = h.growth_exponent

    pts = sample_domain(problem.domain, n, rng)
    V = evaluate_expression(h.V, pts)
    v_inf = float(np.max(np.abs(V)))

    delta = None
    if h.variant == "model":
        b = evaluate_expression(h.b, pts)
        delta = float(min(np.min(b), 1.0 / np.max(b)))
        growth = 2 ** (beta / 2) / delta + v_inf + 1.0
    else:
        b = np.ones_like(V)
        growth = 2.0 + v_inf

    # −H + D_pH·p against |p|^β over |p| log-uniform in [1e-3, 1e3]
    radius = 10 ** rng.uniform(-3, 3, size=pts.shape[0])
    direction = rng.normal(size=pts.shape)
    direction /= np.linalg.norm(direction, axis=-1, keepdims=True)
    p = radius[:, None] * direction
    margin = -hamiltonian_kernel(h, p, V, b) + np.sum(hamiltonian_gradient_kernel(h, p, b) * p, axis=-1)
    lower = _fit_lower_bound_constant(margin, radius**beta)

    z = np.linspace(-10.0, 10.0, 4001)
    coupling_constant = max(0.0, -float(np.min(_G_PRIME[c.variant](c, z) * z)))

    return AssumptionConstants(
        delta=delta,
        growth_constant=float(growth),
        lower_bound_constant=lower,
        coupling_constant=coupling_constant,
    )
