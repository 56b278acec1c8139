import numpy as np
import pytest
from scipy.optimize import brentq

from solmap.bvp import (BVProblem, assemble_linearized, eta_bar, green_ell, linearized_bvp_solve,
                        linearized_variation, newton_solve, range_orthogonality_check, resonance_dips,
                        resonance_scan)
from solmap.exceptions import ConfigError, ConvergenceError, SingularSystemError
from solmap.expr import IMPLICIT_VARIABLES, parse
from solmap.function_core import GridFn1D

V = IMPLICIT_VARIABLES
PI2 = np.pi ** 2


def line(f, n: int = 201) -> GridFn1D:
    return GridFn1D.from_function(f, 0.0, 1.0, n)


def bratu(s: np.ndarray) -> np.ndarray:
    """Lower solution of y'' = -exp(y), y(0) = y(1) = 0."""
    theta = brentq(lambda q: q - np.sqrt(2.0) * np.cosh(q / 4), 0.0, 2.0, xtol=1e-15)
    return -2.0 * np.log(np.cosh((s - 0.5) * theta / 2) / np.cosh(theta / 4))


def test_green_ell_of_zero():
    assert green_ell(line(lambda s: 0 * s)).sup_norm() == 0.0


def test_green_ell_of_constant():
    y = green_ell(line(lambda s: 2 + 0 * s))
    assert np.max(np.abs(y.values - y.nodes * (y.nodes - 1))) <= 1e-13


def test_green_ell_inverts_second_derivative():
    z = line(lambda s: np.cos(3 * s))
    y = green_ell(z)
    assert y.values[0] == 0.0 and y.values[-1] == 0.0
    second = (y.values[:-2] - 2 * y.values[1:-1] + y.values[2:]) / y.h ** 2
    assert np.max(np.abs(second - z.values[1:-1])) <= 1e-3


@pytest.mark.parametrize('eta0, eta1', [(0.0, 0.0), (1.0, 1.0), (0.0, 1.0)])
def test_eta_bar(eta0, eta1):
    y = eta_bar(eta0, eta1, 199)
    assert y.n == 200
    assert np.allclose(y.values, eta0 + (eta1 - eta0) * y.nodes, rtol=0, atol=1e-15)
    assert y.values[100] == pytest.approx((eta0 + eta1) / 2, abs=1e-15)


def test_newton_without_nonlinearity():
    y, report = newton_solve(BVProblem(0.0, 1.0, parse('0', V)))
    assert report['steps'] == 0
    assert np.allclose(y.values, y.nodes, rtol=0, atol=1e-15)


def test_newton_constant_forcing():
    y, report = newton_solve(BVProblem(0.0, 0.0, parse('2', V)))
    assert np.max(np.abs(y.values - y.nodes * (y.nodes - 1))) <= 1e-8
    assert report['regular']
    assert report['steps'] <= 1


def test_newton_bratu():
    y, report = newton_solve(BVProblem(0.0, 0.0, parse('-exp(xi1)', V), n=199))
    assert np.max(np.abs(y.values - bratu(y.nodes))) <= 1e-4
    assert report['residuals'][-1] <= 1e-10
    assert report['steps'] <= 8
    assert report['regular']


def test_newton_flags_resonance():
    y, report = newton_solve(BVProblem(0.0, 0.0, parse('-pi^2*xi1', V)))
    assert y.sup_norm() == 0.0
    assert not report['regular']
    assert report['condition'] > 1e8


@pytest.mark.parametrize('n', [16, 50, 100])
def test_newton_flags_resonance_on_coarse_grids(n):
    _, report = newton_solve(BVProblem(0.0, 0.0, parse('-pi^2*xi1', V), n=n))
    assert not report['regular']
    assert report['sigma_min'] < 0.1


def test_newton_step_limit():
    with pytest.raises(ConvergenceError):
        newton_solve(BVProblem(0.0, 0.0, parse('-exp(xi1)', V)), max_steps=1, tolerance=1e-14)


def test_problem_validation():
    with pytest.raises(ConfigError):
        BVProblem(0.0, 0.0, parse('2', V), n=8)
    with pytest.raises(ConfigError):
        BVProblem(0.0, 0.0, parse('s', ('s',)))


def test_linearized_solve_pure_second_derivative():
    zero = line(lambda s: 0 * s)
    u = linearized_bvp_solve(zero, zero, line(lambda s: 2 + 0 * s))
    assert np.max(np.abs(u.values - u.nodes * (u.nodes - 1))) <= 1e-10


def test_linearized_solve_of_zero():
    p2 = line(lambda s: 1 + s)
    p3 = line(np.sin)
    assert linearized_bvp_solve(p2, p3, line(lambda s: 0 * s)).sup_norm() == 0.0


@pytest.mark.parametrize('n', [50, 100, 200])
def test_linearized_solve_at_resonance(n):
    zero = line(lambda s: 0 * s, n)
    with pytest.raises(SingularSystemError) as info:
        linearized_bvp_solve(line(lambda s: -PI2 + 0 * s, n), zero, line(lambda s: 1 + 0 * s, n))
    assert info.value.exit_code == 2
    assert info.value.sigma_min < 1e-2


@pytest.mark.parametrize('n', [50, 100, 200])
def test_resonant_operator_is_not_regular(n):
    zero = line(lambda s: 0 * s, n)
    operator = assemble_linearized(line(lambda s: -PI2 + 0 * s, n), zero)
    assert not operator.regular
    assert operator.sigma_next > 100 * operator.sigma_min


def test_near_resonance_is_regular():
    zero = line(lambda s: 0 * s, 50)
    assert assemble_linearized(line(lambda s: -PI2 + 2 + 0 * s, 50), zero).regular


def test_operator_conditioning():
    zero = line(lambda s: 0 * s)
    operator = assemble_linearized(zero, zero)
    assert operator.regular
    assert operator.sigma_min == pytest.approx(PI2, rel=1e-3)


@pytest.mark.parametrize('d_eta0, d_eta1, psi', [(1.0, 0.0, None), (0.3, -0.2, 's'), (0.0, 0.0, 'xi1*xi2')])
def test_variation_matches_finite_differences(d_eta0, d_eta1, psi):
    problem = BVProblem(0.0, 0.0, parse('-exp(xi1)', V), n=100)
    psi_expr = parse(psi, V) if psi else None
    y, _ = newton_solve(problem)
    u = linearized_variation(problem, y, d_eta0, d_eta1, psi_expr)
    eps = 1e-4
    plus, _ = newton_solve(problem.perturbed(d_eta0, d_eta1, psi_expr, eps), tolerance=1e-13)
    minus, _ = newton_solve(problem.perturbed(d_eta0, d_eta1, psi_expr, -eps), tolerance=1e-13)
    fd = (plus.values - minus.values) / (2 * eps)
    assert np.max(np.abs(fd - u.values)) <= 1e-3 * max(1.0, u.sup_norm())


def test_resonance_scan_finds_dips():
    scan = resonance_scan(-45.0, 0.0, 226, n=50)
    assert len(scan) == 226
    dips = [p['r'] for p in resonance_dips(scan)]
    assert len(dips) == 2
    assert dips[0] == pytest.approx(-4 * PI2, abs=0.5)
    assert dips[1] == pytest.approx(-PI2, abs=0.5)


@pytest.mark.slow
def test_resonance_scan_full_range():
    dips = [p['r'] for p in resonance_dips(resonance_scan(-100.0, 0.0, 2000))]
    assert len(dips) == 3
    for r, n in zip(dips, (3, 2, 1)):
        assert r == pytest.approx(-(n ** 2) * PI2, abs=0.5)


def test_resonance_scan_positive_range():
    assert resonance_dips(resonance_scan(1.0, 10.0, 50, n=50)) == []


def test_empty_resonance_scan():
    assert resonance_scan(0.0, -1.0, 10) == []
    assert resonance_scan(-1.0, 0.0, 0) == []
    assert resonance_dips([]) == []


def test_sigma_min_vanishes_under_refinement():
    coarse = resonance_scan(-PI2, -PI2, 1, n=50)[0]['sigma_min']
    fine = resonance_scan(-PI2, -PI2, 1, n=101)[0]['sigma_min']
    assert fine < coarse / 3.5


@pytest.mark.parametrize('n', [50, 100, 200])
def test_orthogonal_mode_is_solvable(n):
    check = range_orthogonality_check(1, line(lambda s: np.sin(2 * np.pi * s), n))
    assert check['solvable']
    assert abs(check['integral']) <= 1e-6


@pytest.mark.parametrize('n', [50, 100, 200])
def test_kernel_mode_is_not_solvable(n):
    check = range_orthogonality_check(1, line(lambda s: np.sin(np.pi * s), n))
    assert not check['solvable']
    assert check['residual'] > 1e-3
    assert check['integral'] == pytest.approx(0.5, abs=1e-6)


def test_zero_is_solvable():
    check = range_orthogonality_check(1, line(lambda s: 0 * s))
    assert check['solvable'] and check['residual'] == 0.0
