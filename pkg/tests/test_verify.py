import numpy as np
import pytest

from mfg_exit.analytic import exponential_problem, interval_problem, oracle_for
from mfg_exit.errors import ConfigurationError
from mfg_exit.functional import build_objective
from mfg_exit.grid import CellField, Field, build_grid
from mfg_exit.models import SolveOptions
from mfg_exit.optimizer import solve
from mfg_exit.verify import (
    RESIDUAL_CHECKS,
    apriori_energy,
    check_weak_solution,
    default_eps_m,
    free_boundary_flux,
    minimality_gap,
    monotonicity_gap,
    uniqueness_check,
)

from tests.conftest import HALF_SINE_V, SINE_V

SEED = 3


@pytest.fixture
def flux_oracle():
    problem = interval_problem(HALF_SINE_V, 1.0)
    grid = build_grid((0.0, 1.0), 200)
    return problem, oracle_for(problem, grid)


def test_positive_flux_oracle_is_a_weak_solution(flux_oracle):
    problem, sample = flux_oracle
    report = check_weak_solution(problem, sample.m, sample.u, tol=1e-3)
    assert report.passed, report.checks
    assert set(report.checks) == set(RESIDUAL_CHECKS)
    assert report.neumann_error <= 1e-3
    assert report.complementarity_residual == pytest.approx(0.0, abs=1e-12)
    assert report.dirichlet_sign_violation == 0.0
    assert report.density_negativity == 0.0
    assert report.apriori_energy > 0


def test_both_zero_flux_branches_are_weak_solutions():
    # V < 0 everywhere: m ≡ 0 and u is not unique
    problem = interval_problem(-1.0, 0.0)
    grid = build_grid((0.0, 1.0), 64)
    x = grid.node_coordinates()[..., 0]
    m = CellField(grid, np.zeros(64))
    speed = np.sqrt(2.0)
    for u in (speed * (1.0 - x), -speed * (1.0 - x)):
        report = check_weak_solution(problem, m, Field(grid, u), eps_m=1e-9)
        assert report.passed, report.checks


def test_doubled_density_breaks_the_hamilton_jacobi_equation(flux_oracle):
    problem, sample = flux_oracle
    doubled = CellField(sample.m.grid, 2.0 * sample.m.values)
    report = check_weak_solution(problem, doubled, sample.u, tol=1e-3)
    assert not report.passed
    assert not report.checks["hj_residual_pos"]
    assert not report.checks["neumann_error"]


def test_positive_hamiltonian_is_flagged():
    problem = interval_problem(1.0, 0.0)
    grid = build_grid((0.0, 1.0), 16)
    report = check_weak_solution(problem, CellField(grid, np.zeros(16)), Field(grid, np.zeros(17)), eps_m=1e-9)
    # H = V = 1 > g(0) = 0 on the empty set
    assert report.hj_inequality_violation == pytest.approx(1.0)
    assert not report.passed


def test_negative_density_is_reported():
    problem = interval_problem(0.0, 1.0)
    grid = build_grid((0.0, 1.0), 8)
    m = np.full(8, 0.5)
    m[2] = -0.25
    report = check_weak_solution(problem, CellField(grid, m), Field(grid, np.zeros(9)), eps_m=1e-3)
    assert report.density_negativity == pytest.approx(0.25)
    assert not report.checks["density_negativity"]


def test_check_rejects_mismatched_grids(flux_oracle):
    problem, sample = flux_oracle
    with pytest.raises(ConfigurationError):
        check_weak_solution(problem, sample.m, Field(build_grid((0.0, 1.0), 8), np.zeros(9)))
    with pytest.raises(ConfigurationError):
        check_weak_solution(problem, sample.m, sample.u, eps_m=0.0)


def test_default_eps_m():
    grid = build_grid((0.0, 1.0), 4)
    assert default_eps_m(CellField(grid, np.full(4, 0.5))) == pytest.approx(1e-6)
    assert default_eps_m(CellField(grid, np.full(4, 50.0))) == pytest.approx(5e-5)


def test_apriori_energy_of_a_flat_pair():
    problem = interval_problem(0.0, 1.0)
    grid = build_grid((0.0, 1.0), 8)
    # m g(m) = m² for the quadratic coupling, Du = 0
    assert apriori_energy(problem, CellField(grid, np.full(8, 2.0)), Field(grid, np.zeros(9))) == pytest.approx(4.0)


def test_monotonicity_of_perturbed_oracle_pairs(flux_oracle):
    problem, sample = flux_oracle
    rng = np.random.default_rng(SEED)
    grid = sample.u.grid
    for _ in range(20):
        m2 = CellField(grid, np.maximum(sample.m.values + 0.05 * rng.standard_normal(grid.n_cells_total), 0.0))
        u2 = Field(grid, sample.u.values + 0.05 * rng.standard_normal(grid.n_nodes))
        result = monotonicity_gap(problem, (sample.m, sample.u), (m2, u2))
        assert result.I3 >= 0
        assert result.I2 >= 0
        assert result.total >= -1e-9
        assert result.total == pytest.approx(result.I1 + result.I2 + result.I3)


def test_monotonicity_of_a_pair_with_itself(flux_oracle):
    problem, sample = flux_oracle
    result = monotonicity_gap(problem, (sample.m, sample.u), (sample.m, sample.u))
    assert result.total == 0.0


def test_uniqueness_flags_a_doubled_density(flux_oracle):
    problem, sample = flux_oracle
    doubled = CellField(sample.m.grid, 2.0 * sample.m.values)
    report = uniqueness_check(problem, (sample.m, sample.u), (doubled, sample.u), check_preconditions=False)
    assert report.status == "violated"
    assert report.m_gap == pytest.approx(float(np.max(sample.m.values)))
    assert any(f.startswith("m_gap") for f in report.findings)


def test_uniqueness_is_inconclusive_without_weak_solutions(flux_oracle):
    problem, sample = flux_oracle
    doubled = CellField(sample.m.grid, 2.0 * sample.m.values)
    report = uniqueness_check(problem, (sample.m, sample.u), (doubled, sample.u), residual_tol=1e-3)
    assert report.status == "inconclusive"
    assert any(f.startswith("second pair") for f in report.findings)


def test_uniqueness_of_the_zero_flux_branches():
    problem = interval_problem(-1.0, 0.0)
    grid = build_grid((0.0, 1.0), 32)
    x = grid.node_coordinates()[..., 0]
    m = CellField(grid, np.zeros(32))
    plus = Field(grid, np.sqrt(2.0) * (1.0 - x))
    minus = Field(grid, -np.sqrt(2.0) * (1.0 - x))
    report = uniqueness_check(problem, (m, plus), (m, minus), eps_m=1e-9)
    # Du differs, but only where m vanishes
    assert report.status == "passed"
    assert report.support_cells == 0


def test_solver_pairs_pass_the_uniqueness_check():
    problem = interval_problem(HALF_SINE_V, 1.0, psi_right=0.5)
    grid = build_grid((0.0, 1.0), 64)
    obj = build_objective(problem, grid)
    opts = SolveOptions(max_iters=20000, tol_pg=1e-10)
    a = solve(obj, opts.model_copy(update={"init": "psi"}))
    b = solve(obj, opts.model_copy(update={"init": "zeros"}))
    report = uniqueness_check(
        problem, (a.density.m, a.u), (b.density.m, b.u), tol=1e-5, check_preconditions=False
    )
    assert report.status == "passed", report.findings
    assert report.support_cells == 64


def test_free_boundary_along_the_square_example():
    problem = exponential_problem()
    orders = []
    fluxes = []
    for n in (16, 32, 64):
        grid = build_grid([(0.0, 1.0), (0.0, 1.0)], n)
        sample = oracle_for(problem, grid)
        result = free_boundary_flux(problem, sample.m, sample.u)
        assert len(result.interfaces) == n
        assert all(i.axis == 1 for i in result.interfaces)
        fluxes.append(result.max_normal_flux)
    for coarse, fine in zip(fluxes, fluxes[1:]):
        orders.append(np.log2(coarse / fine))
    assert min(orders) >= 0.9


def test_square_example_residuals_shrink_with_h():
    problem = exponential_problem()
    names = ("hj_residual_pos", "continuity_residual", "neumann_error")
    reports = []
    for n in (32, 64, 128):
        grid = build_grid([(0.0, 1.0), (0.0, 1.0)], n)
        sample = oracle_for(problem, grid)
        reports.append(check_weak_solution(problem, sample.m, sample.u))
    # first order at the kink of m along y = 1/2; n = 16 is still pre-asymptotic
    for coarse, fine in zip(reports, reports[1:]):
        for name in names:
            order = np.log2(getattr(coarse, name) / getattr(fine, name))
            assert order >= 0.9, (name, order)
    assert reports[-1].complementarity_residual == pytest.approx(0.0, abs=1e-12)


def test_free_boundary_in_1d():
    problem = interval_problem(SINE_V, 0.0)
    grid = build_grid((0.0, 1.0), 20)
    sample = oracle_for(problem, grid)
    result = free_boundary_flux(problem, sample.m, sample.u)
    # the density vanishes past x = 1/2: one interface, with zero current
    assert len(result.interfaces) == 1
    assert result.interfaces[0].positive_cell == 9
    assert result.max_normal_flux == pytest.approx(0.0, abs=1e-12)


def test_minimality_gap_of_a_solver_output(positive_flux_problem):
    grid = build_grid((0.0, 1.0), 32)
    obj = build_objective(positive_flux_problem, grid)
    result = solve(obj, SolveOptions(max_iters=20000, tol_pg=1e-9))
    assert minimality_gap(obj, result.u, seed=SEED) >= -1e-9
