import numpy as np
import pytest
from pydantic import ValidationError

from mfg_exit.analytic import interval_problem
from mfg_exit.errors import DomainError
from mfg_exit.functional import build_objective
from mfg_exit.grid import build_grid
from mfg_exit.models import (
    BoundarySpec,
    CouplingSpec,
    DomainSpec,
    ExpressionSpec,
    HamiltonianSpec,
    ProblemSpec,
    SolveOptions,
)
from mfg_exit.optimizer import solve
from mfg_exit.problem import (
    assumption_constants,
    coupling_G,
    coupling_g,
    coupling_Gprime,
    hamiltonian_DpH,
    hamiltonian_H,
    sample_domain,
    validate_spec,
)
from mfg_exit.verify import check_weak_solution

from tests.conftest import SINE_V

COUPLINGS = [
    CouplingSpec(variant="quadratic_positive_part"),
    CouplingSpec(variant="power", a=1.0, alpha=3.0),
    CouplingSpec(variant="positive_power", alpha=2.5),
    CouplingSpec(variant="tabulated", table_z=[0.0, 0.5, 1.0, 2.0], table_gprime=[0.0, 0.0, 0.5, 2.0]),
]


def test_quadratic_positive_part_values():
    c = CouplingSpec()
    assert coupling_G(c, 2.0) == pytest.approx(2.0)
    assert coupling_G(c, -1.0) == 0.0
    assert coupling_Gprime(c, 3.0) == pytest.approx(3.0)
    assert coupling_Gprime(c, -3.0) == 0.0


def test_scalar_in_scalar_out():
    assert isinstance(coupling_G(CouplingSpec(), 1.5), float)
    assert isinstance(coupling_g(CouplingSpec(), 1.5), float)


@pytest.mark.parametrize("spec", COUPLINGS, ids=lambda c: c.variant)
def test_pseudo_inverse_is_a_right_inverse(spec):
    mu = np.linspace(0.0, 1.8, 37)
    np.testing.assert_allclose(coupling_Gprime(spec, coupling_g(spec, mu)), mu, atol=1e-10)


@pytest.mark.parametrize("spec", COUPLINGS, ids=lambda c: c.variant)
def test_pseudo_inverse_picks_the_largest_preimage(spec):
    """On a flat stretch of G', g(mu) is its right end."""
    z0 = coupling_g(spec, 0.0)
    assert coupling_Gprime(spec, z0) == pytest.approx(0.0, abs=1e-12)
    assert coupling_Gprime(spec, z0 + 1e-3) > 0


def test_pseudo_inverse_known_points():
    assert coupling_g(CouplingSpec(variant="power", a=1.0, alpha=2.0), 0.0) == pytest.approx(-1.0)
    tab = COUPLINGS[3]
    assert coupling_g(tab, 0.0) == pytest.approx(0.5)
    assert coupling_g(tab, 0.5) == pytest.approx(1.0)


@pytest.mark.parametrize("spec", COUPLINGS, ids=lambda c: c.variant)
def test_G_is_an_antiderivative_of_Gprime(spec):
    z = np.linspace(-2.0, 3.0, 201)
    step = 1e-6
    fd = (coupling_G(spec, z + step) - coupling_G(spec, z - step)) / (2 * step)
    np.testing.assert_allclose(fd, coupling_Gprime(spec, z), atol=1e-5)


def test_pseudo_inverse_rejects_negative_density():
    with pytest.raises(DomainError):
        coupling_g(CouplingSpec(), -0.1)
    with pytest.raises(DomainError):
        coupling_g(CouplingSpec(), np.array([0.0, np.nan]))


def test_quadratic_hamiltonian():
    spec = HamiltonianSpec(variant="quadratic", V=0.5)
    assert hamiltonian_H(spec, [0.2, 0.3], [3.0, 4.0]) == pytest.approx(13.0)
    np.testing.assert_allclose(hamiltonian_DpH(spec, [0.2, 0.3], [3.0, 4.0]), [3.0, 4.0])


def test_model_hamiltonian_defaults_to_sin_norm_sq():
    spec = HamiltonianSpec(variant="model", beta=2.0)
    assert spec.V.kind == "sin_norm_sq"
    x = [0.6, 0.8]  # |x|^2 = 1
    assert hamiltonian_H(spec, x, [0.0, 0.0]) == pytest.approx(np.sin(1.0))
    # b = 1, β = 2: (1 + |p|^2) − 1 = |p|^2
    assert hamiltonian_H(spec, x, [1.0, 1.0]) == pytest.approx(2.0 + np.sin(1.0))
    np.testing.assert_allclose(hamiltonian_DpH(spec, x, [1.0, 1.0]), [2.0, 2.0])


def test_hamiltonian_outside_domain():
    spec = HamiltonianSpec()
    with pytest.raises(DomainError):
        hamiltonian_H(spec, 1.5, 0.0, domain=DomainSpec(extents=(0.0, 1.0)))


def test_example_problems_are_valid(zero_flux_problem, positive_flux_problem, square_problem):
    for problem in (zero_flux_problem, positive_flux_problem, square_problem):
        assert validate_spec(problem) == []


def test_sub_linear_coupling_is_reported():
    problem = interval_problem(0.0, 1.0).model_copy(
        update={"coupling": CouplingSpec(variant="power", alpha=0.9)}
    )
    messages = [f.message for f in validate_spec(problem)]
    assert "alpha must exceed 1" in messages


def test_partition_findings():
    problem = ProblemSpec(
        domain=DomainSpec(extents=[(0.0, 1.0), (0.0, 1.0)]),
        boundary=BoundarySpec(partition={"left": "neumann", "right": "neumann", "bottom": "neumann"}),
    )
    messages = [f.message for f in validate_spec(problem)]
    assert "face top unlabeled" in messages
    assert "Γ_D is empty" in messages


def test_negative_influx_is_reported():
    messages = [f.message for f in validate_spec(interval_problem(0.0, -1.0))]
    assert any(m.startswith("j negative on Γ_N") for m in messages)


def test_tabulated_table_must_start_at_zero():
    problem = interval_problem(0.0, 1.0).model_copy(
        update={"coupling": CouplingSpec(variant="tabulated", table_z=[0.0, 1.0], table_gprime=[0.5, 1.5])}
    )
    messages = [f.message for f in validate_spec(problem)]
    assert "tabulated G' must start at 0" in messages


def test_assumption_constants_quadratic(zero_flux_problem):
    constants = assumption_constants(zero_flux_problem)
    assert constants.delta is None
    # 2 + ‖V‖∞ with |V| ≤ 1
    assert 2.99 < constants.growth_constant <= 3.0
    assert constants.coupling_constant == 0.0
    assert constants.lower_bound_constant is not None


def test_assumption_constants_power_coupling():
    problem = interval_problem(0.0, 1.0).model_copy(
        update={"coupling": CouplingSpec(variant="power", a=2.0, alpha=2.0)}
    )
    # min over z of G'(z) z = 2a(z + 1) z at z = −1/2
    assert assumption_constants(problem).coupling_constant == pytest.approx(1.0, abs=1e-3)


MODEL_H = HamiltonianSpec(
    variant="model",
    beta=2.5,
    b=ExpressionSpec(kind="gaussian_bump", params={"amplitude": 0.5, "center": [0.5, 0.5], "width": 0.2, "offset": 1.0}),
)


def _growth_problem(name, square_problem):
    if name == "quadratic":
        return interval_problem(SINE_V, 1.0)
    return square_problem.model_copy(update={"hamiltonian": MODEL_H})


def _momenta(rng, n, dim, largest=1e3):
    radius = 10 ** rng.uniform(-3, 3, size=n)
    radius[-1] = largest
    direction = rng.normal(size=(n, dim))
    direction /= np.linalg.norm(direction, axis=-1, keepdims=True)
    return radius, radius[:, None] * direction


@pytest.mark.parametrize("name", ["quadratic", "model"])
def test_growth_bounds_hold_up_to_large_momenta(name, square_problem):
    problem = _growth_problem(name, square_problem)
    C = assumption_constants(problem, seed=5).growth_constant
    rng = np.random.default_rng(11)
    x = np.vstack([sample_domain(problem.domain, 500, rng), np.full((1, problem.dim), 0.5)])
    radius, p = _momenta(rng, x.shape[0], problem.dim)
    H = hamiltonian_H(problem.hamiltonian, x, p)
    power = radius ** problem.hamiltonian.growth_exponent
    assert np.all(H <= C * (power + 1.0))
    assert np.all(H >= power / C - C)


@pytest.mark.parametrize("spec", [HamiltonianSpec(V=SINE_V), MODEL_H], ids=["quadratic", "model"])
def test_DpH_matches_central_differences(spec):
    rng = np.random.default_rng(13)
    x = rng.uniform(0.0, 1.0, size=(50, 2))
    p = rng.normal(scale=2.0, size=(50, 2))
    step = 1e-6
    fd = np.empty_like(p)
    for k in range(2):
        e = np.zeros(2)
        e[k] = step
        fd[:, k] = (hamiltonian_H(spec, x, p + e) - hamiltonian_H(spec, x, p - e)) / (2 * step)
    np.testing.assert_allclose(fd, hamiltonian_DpH(spec, x, p), rtol=1e-6, atol=1e-6)


@pytest.mark.parametrize("spec", COUPLINGS, ids=lambda c: c.variant)
def test_pseudo_inverse_is_strictly_increasing(spec):
    g = coupling_g(spec, np.linspace(0.0, 1.8, 181))
    assert np.all(np.diff(g) > 0)


@pytest.mark.parametrize("delta, flagged", [(0.8, True), (0.5, False)])
def test_declared_coefficient_bounds_are_checked(square_problem, delta, flagged):
    # b ranges over [1, 1.5] on the unit square
    hamiltonian = MODEL_H.model_copy(update={"delta": delta})
    problem = square_problem.model_copy(update={"hamiltonian": hamiltonian})
    messages = [f.message for f in validate_spec(problem)]
    assert any(m.startswith("b outside [δ, 1/δ]") for m in messages) == flagged


def test_coefficient_bounds_need_a_valid_delta():
    with pytest.raises(ValidationError):
        HamiltonianSpec(variant="model", delta=1.5)
    with pytest.raises(ValidationError):
        HamiltonianSpec(variant="model", delta=0.0)


@pytest.mark.parametrize("name", ["quadratic", "model"])
def test_mass_balance_at_convergence(name, square_problem):
    problem = _growth_problem(name, square_problem)
    grid = build_grid(problem.domain.extents, 64 if problem.dim == 1 else 12)
    obj = build_objective(problem, grid)
    result = solve(obj, SolveOptions(max_iters=20000, tol_pg=1e-10))
    assert result.report.converged, result.report.status
    report = check_weak_solution(problem, result.density.m, result.u)
    assert report.mass_balance_gap <= 1e-6
