import math

import numpy as np
import pytest

from solmap.exceptions import ConfigError, GridError, StagnationError
from solmap.expr import TRANSPORT_VARIABLES, parse
from solmap.function_core import CylFn, CylGrid, GridFn1D
from solmap.harness import trig_polynomial
from solmap.transport import (PicardConfig, TransportProblem, apriori_bound, apriori_check, bar_y0, char_integral,
                              constants, cutoff_chi, linearized_solve, lipschitz_check, picard_step, residual, solve,
                              uniqueness_probe)

V = TRANSPORT_VARIABLES


def problem(y0: str, phi: str, T: float, n: int) -> TransportProblem:
    return TransportProblem(GridFn1D.from_expression(parse(y0, ('s',)), 0.0, 1.0, n), parse(phi, V), T)


@pytest.fixture(scope='module')
def riccati():
    """y0 = 1/2, phi = xi^2: y = 1 / (2 - t)."""
    p = problem('0.5', 'xi^2', 1.5, 256)
    return p, solve(p)


@pytest.mark.parametrize('s, expected', [(3.0, 0.0), (-3.0, 0.0), (0.0, 1.0), (1.0, 1.0), (-2.0, 0.0)])
def test_cutoff_values(s, expected):
    assert cutoff_chi(s) == pytest.approx(expected, abs=1e-12)


def test_cutoff_is_even_and_monotone():
    s = np.linspace(1.0, 2.0, 101)
    values = cutoff_chi(s)
    assert np.all(np.diff(values) <= 1e-15)
    assert np.allclose(cutoff_chi(-s), values)
    assert np.allclose(np.gradient(values, s), cutoff_chi(s, 1), atol=1e-2)


def test_bar_y0_constant():
    grid = CylGrid.aligned(1.0, 16)
    assert np.array_equal(bar_y0(GridFn1D.constant(0.7, 0.0, 1.0, 16), grid).values, np.full(grid.shape, 0.7))


def test_bar_y0_shifts_along_characteristics():
    grid = CylGrid.aligned(0.5, 8)
    y0 = GridFn1D.from_function(lambda s: np.sin(2 * np.pi * s), 0.0, 1.0, 8)
    y = bar_y0(y0, grid)
    assert abs(y.values[grid.node_index(0.25), 2]) <= 1e-15
    assert y.values[grid.node_index(0.25), 4] == y0.values[2]


def test_bar_y0_rejects_other_grids():
    with pytest.raises(GridError):
        bar_y0(GridFn1D.constant(0.0, 0.0, 1.0, 8), CylGrid.aligned(1.0, 16))


def test_char_integral_of_constant_and_time():
    grid = CylGrid.aligned(1.0, 32)
    t, _ = grid.mesh()
    assert np.allclose(char_integral(0.0, CylFn.constant(grid, 3.0)).values, 3.0 * t, rtol=0, atol=1e-14)
    assert np.allclose(char_integral(0.0, CylFn(grid, t)).values, t ** 2 / 2, rtol=0, atol=1e-14)
    assert char_integral(0.0, CylFn.zeros(grid)).sup_norm() == 0.0


def test_char_integral_from_interior_time_is_signed():
    grid = CylGrid.aligned(1.0, 16)
    t, _ = grid.mesh()
    assert np.allclose(char_integral(0.5, CylFn.constant(grid, 1.0)).values, t - 0.5, atol=1e-14)


@pytest.mark.parametrize('phi, M', [('xi', 1.25), ('xi^2', 5.0)])
def test_constants_of_simple_nonlinearities(phi, M):
    c = constants(parse(phi, V), (0.0, 0.1), 0.0, 2.0)
    assert c.M == pytest.approx(M)
    assert c.R == pytest.approx(4.0)
    assert c.L == pytest.approx(min(0.1, 1 / (3 * M * 4.0)))
    assert c.alpha == pytest.approx(c.L * c.M * (2 + c.R))


def test_constants_of_zero_nonlinearity():
    c = constants(parse('0', V), (0.25, 0.75), 1.0, 3.0)
    assert (c.M0, c.M1, c.M, c.alpha) == (0.0, 0.0, 0.0, 0.0)
    assert c.L == 0.5


def test_picard_step_with_zero_nonlinearity():
    z0 = CylFn.constant(CylGrid.aligned(0.25, 16), 0.5)
    result = picard_step(z0, parse('0', V))
    assert result.iterations == 1
    assert np.array_equal(result.z.values, z0.values)


def test_picard_step_contracts():
    z0 = CylFn.constant(CylGrid.aligned(0.125, 64), 0.5)
    result = picard_step(z0, parse('xi^2', V))
    assert result.ratios and max(result.ratios) <= 0.55
    assert np.allclose(result.z.values[-1], 1 / (2 - 0.125), atol=1e-4)


def test_picard_step_from_fixed_point():
    grid = CylGrid.aligned(0.25, 16)
    z0 = CylFn.constant(grid, 0.5)
    fixed = picard_step(z0, parse('xi^2', V)).z
    again = picard_step(z0, parse('xi^2', V), PicardConfig(initial=fixed))
    assert again.iterations == 1


def test_riccati_solution(riccati):
    _, report = riccati
    t, _ = report.solution.grid.mesh()
    assert np.max(np.abs(report.solution.values - 1 / (2 - t))) <= 5e-4
    assert report.regular
    assert report.max_ratio <= 0.55
    assert len(report.steps) == 384


@pytest.mark.slow
def test_riccati_converges_at_second_order(riccati):
    _, coarse = riccati
    fine = solve(problem('0.5', 'xi^2', 1.5, 512))
    errors = []
    for report in (coarse, fine):
        t, _ = report.solution.grid.mesh()
        errors.append(np.max(np.abs(report.solution.values - 1 / (2 - t))))
    assert errors[0] / errors[1] >= 3.6


def test_zero_nonlinearity_transports_data():
    p = problem('sin(2*pi*s)', '0', 1.0, 64)
    assert np.array_equal(solve(p).solution.values, bar_y0(p.y0, p.grid).values)


def test_linear_nonlinearity():
    p = problem('sin(2*pi*s)', 'xi', 1.0, 256)
    y = solve(p).solution
    t, eta = y.grid.mesh()
    assert np.max(np.abs(y.values - np.exp(t) * np.sin(2 * np.pi * (eta - t)))) <= 1e-4


def test_contraction_policy_keeps_alpha_below_half():
    p = problem('0.5', '0.2*sin(xi)', 1.0, 64)
    report = solve(p, PicardConfig(step_policy='lemma-c'))
    assert report.max_alpha <= 0.5 + 1e-12
    assert report.steps[-1].t2 == pytest.approx(1.0)
    assert all(step.t0 < step.t2 for step in report.steps)


def test_contraction_policy_stagnates_on_riccati():
    with pytest.raises(StagnationError) as info:
        solve(problem('0.5', 'xi^2', 1.5, 64), PicardConfig(step_policy='lemma-c'))
    assert info.value.exit_code == 3


def test_fixed_step_count():
    report = solve(problem('0.5', 'xi^2', 1.0, 32), PicardConfig(steps=4))
    assert [(s.t0, s.t2) for s in report.steps] == [(0.0, 0.25), (0.25, 0.5), (0.5, 0.75), (0.75, 1.0)]


def test_invalid_config():
    with pytest.raises(ConfigError):
        PicardConfig(step_policy='adaptive')
    with pytest.raises(ConfigError):
        PicardConfig(tolerance=0.0)


def test_linearized_solve_with_zero_coefficient():
    grid = CylGrid.aligned(1.0, 32)
    v = trig_polynomial(grid, np.random.default_rng(1))
    assert np.array_equal(linearized_solve(CylFn.zeros(grid), v).values, v.values)


def test_linearized_solve_exponential():
    grid = CylGrid.aligned(0.25, 256)
    u = linearized_solve(CylFn.constant(grid, 1.0), CylFn.constant(grid, 1.0), PicardConfig(quadrature='trapezoid'))
    t, _ = grid.mesh()
    assert np.max(np.abs(u.values - np.exp(t))) <= 1e-6


def test_linearized_solve_of_zero_is_zero():
    grid = CylGrid.aligned(1.0, 32)
    a = trig_polynomial(grid, np.random.default_rng(2))
    assert linearized_solve(a, CylFn.zeros(grid)).sup_norm() == 0.0


def test_linearized_solve_is_linear():
    grid = CylGrid.aligned(1.0, 32)
    rng = np.random.default_rng(3)
    a, v1, v2 = (trig_polynomial(grid, rng) for _ in range(3))
    combined = linearized_solve(a, 0.7 * v1 + (-1.3) * v2)
    separate = 0.7 * linearized_solve(a, v1) + (-1.3) * linearized_solve(a, v2)
    assert (combined - separate).sup_norm() <= 1e-10 * max(1.0, combined.sup_norm())


def test_residual_of_transported_data():
    p = problem('sin(2*pi*s)', '0', 1.0, 256)
    assert residual(bar_y0(p.y0, p.grid), p) <= 1e-6


def test_residual_of_zero_against_time():
    p = problem('0', 't', 1.0, 32)
    assert residual(CylFn.zeros(p.grid), p) == pytest.approx(1.0)


def test_riccati_residual_is_small(riccati):
    p, report = riccati
    assert report.residual == pytest.approx(residual(report.solution, p))
    assert report.residual <= 1e-2


def test_apriori_bound_without_nonlinearity():
    v = trig_polynomial(CylGrid.aligned(1.0, 32), np.random.default_rng(4))
    assert apriori_bound(v, parse('0', V), v) == pytest.approx(v.sup_norm(), rel=1e-15)
    assert apriori_check(v, parse('0', V), v) == pytest.approx(0.0, abs=1e-14)


def test_apriori_check_on_riccati():
    p = problem('0.5', 'xi^2', 1.0, 64)
    y = solve(p).solution
    assert apriori_check(bar_y0(p.y0, p.grid), p.phi, y) >= 0.0
    assert apriori_check(bar_y0(p.y0, p.grid), p.phi, y, i=1) >= 0.0


def test_zero_solution_bound():
    p = problem('0', 'xi^2', 1.0, 32)
    y = solve(p).solution
    assert y.sup_norm() == 0.0
    bound = apriori_bound(bar_y0(p.y0, p.grid), p.phi, y)
    assert bound >= 0.0
    assert apriori_check(bar_y0(p.y0, p.grid), p.phi, y) == bound


def test_lipschitz_estimate_holds():
    grid = CylGrid.aligned(0.5, 64)
    t, eta = grid.mesh()
    u = CylFn(grid, 0.5 + 0.1 * np.sin(2 * np.pi * eta))
    v = CylFn(grid, u.values + 0.01 * np.cos(2 * np.pi * (eta - t)))
    assert lipschitz_check(parse('xi^2', V), u, v).holds


def random_pair(rng: np.random.Generator) -> tuple[str, str]:
    """Trig-polynomial data and a trig-polynomial nonlinearity with a quadratic term."""
    b = rng.uniform(-0.5, 0.5, 3)
    a = rng.uniform(-0.5, 0.5, 4)
    y0 = f'({b[0]:.6f}) + ({b[1]:.6f})*cos(2*pi*s) + ({b[2]:.6f})*sin(4*pi*s)'
    phi = (f'({a[0]:.6f})*cos(2*pi*eta) + ({a[1]:.6f})*sin(2*pi*(eta - t))*xi'
           f' + ({a[2]:.6f})*cos(2*pi*eta)*xi^2 + ({a[3]:.6f})*t*sin(2*pi*eta)')
    return y0, phi


@pytest.mark.parametrize('seed', range(20))
def test_apriori_and_lipschitz_on_random_pairs(seed):
    rng = np.random.default_rng(seed)
    y0, phi = random_pair(rng)
    p = problem(y0, phi, 0.5, 64)
    y = solve(p, PicardConfig(cutoff=True)).solution
    v = bar_y0(p.y0, p.grid)
    for i in (0, 1):
        assert apriori_check(v, p.phi, y, i=i) >= -1e-6 * (1 + v.sup_norm())
    u = CylFn(p.grid, 0.5 * trig_polynomial(p.grid, rng).values)
    w = CylFn(p.grid, 0.5 * trig_polynomial(p.grid, rng).values)
    assert lipschitz_check(p.phi, u, w).holds


def test_uniqueness_from_different_starts():
    p = problem('0.5', 'xi^2', 1.5, 64)
    assert uniqueness_probe(p, None, 0.5, 0.0) <= 1e-10
    assert uniqueness_probe(p, None, 0.5, 0.5) == 0.0


def test_uniqueness_without_nonlinearity():
    assert uniqueness_probe(problem('cos(2*pi*s)', '0', 1.0, 32), None, 1.0, -1.0) == 0.0


def test_problem_validation():
    with pytest.raises(ConfigError):
        problem('0.5', 'xi', 0.0, 16)
    with pytest.raises(GridError):
        TransportProblem(GridFn1D.constant(0.0, 0.0, 2.0, 16), parse('xi', V), 1.0)
    with pytest.raises(ConfigError):
        TransportProblem(GridFn1D.constant(0.0, 0.0, 1.0, 16), parse('s', ('s',)), 1.0)


def test_blowup_horizon_is_not_reached_by_contraction():
    # y = 1 / (2 - t) blows up at t = 2; T = 1.5 stays finite
    p = problem('0.5', 'xi^2', 1.5, 32)
    assert math.isfinite(solve(p).solution.sup_norm())
