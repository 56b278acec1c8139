import math

import numpy as np
import pytest

from solmap.exceptions import ConfigError, ConvergenceError, SeriesOverflowError
from solmap.expr import HOLO_VARIABLES, parse
from solmap.holo import (BiSeries, PowerSeries, blowup_family, counterexample_run, empty_interior_demo,
                         linearized_holo_solve, radius_estimate, series_residual, taylor_solve)

FACTORIALS = np.array([math.factorial(n) for n in range(31)], dtype=float)


def test_cauchy_product_of_geometric_series():
    geometric = PowerSeries(np.ones(31))
    product = (PowerSeries.constant(1.0, 30) - PowerSeries.identity(30)) * geometric
    assert np.allclose(product.coefficients, PowerSeries.constant(1.0, 30).coefficients, atol=1e-15)


def test_exp_of_log_is_identity():
    s = PowerSeries(np.array([2.0, 0.5, -0.25, 0.1] + [0.0] * 37))
    again = s.log().exp()
    assert np.allclose(again.coefficients[:20], s.coefficients[:20], rtol=0, atol=1e-12)


def test_exp_of_identity():
    assert np.allclose(PowerSeries.identity(30).exp().coefficients, 1 / FACTORIALS, rtol=1e-12, atol=0)


def test_log_needs_constant_term():
    with pytest.raises(ConfigError):
        PowerSeries.identity(5).log()


def test_derivative_and_integral():
    c = PowerSeries(np.array([1.0, 2.0, 3.0, 4.0]))
    assert np.array_equal(c.derivative().coefficients, [2.0, 6.0, 12.0, 0.0])
    assert np.array_equal(c.integral().coefficients, [0.0, 1.0, 1.0, 1.0])


def test_evaluation_and_circle_sup():
    c = PowerSeries(np.array([1.0, 1.0, 0.0]))
    assert c(2.0) == 3.0
    assert c.sup_on_circle(0.5) == pytest.approx(1.5)


def test_bi_series_from_expression():
    phi = BiSeries.from_expression(parse('exp(eta) * xi^2', HOLO_VARIABLES), 6, 3)
    expected = np.zeros((7, 4))
    expected[:, 2] = 1 / FACTORIALS[:7]
    assert np.allclose(phi.coefficients, expected, rtol=1e-14, atol=0)


def test_bi_series_compose():
    phi = BiSeries.from_terms({(1, 0): 1.0, (0, 2): 1.0})
    y = PowerSeries(np.array([1.0, 1.0, 0.0, 0.0]))
    # eta + (1 + eta)^2
    assert np.allclose(phi.compose(y).coefficients, [1.0, 3.0, 1.0, 0.0])


def test_taylor_solve_with_zero_nonlinearity():
    y = taylor_solve(0.3 + 0.1j, BiSeries.from_terms({}), 10)
    assert y.coefficients[0] == 0.3 + 0.1j
    assert not np.any(y.coefficients[1:])


def test_taylor_solve_exponential():
    y = taylor_solve(1.0, BiSeries.from_terms({(0, 1): 1.0}), 30)
    assert np.allclose(y.coefficients, 1 / FACTORIALS, rtol=1e-12, atol=0)


def test_taylor_solve_blowup_family():
    epsilon, n = 0.5, 3
    y = taylor_solve(*blowup_family(epsilon, n), 40)
    for k in range(41):
        expected = epsilon * (n * epsilon) ** (k / (n + 1)) if k % (n + 1) == 0 else 0.0
        assert y.coefficients[k] == pytest.approx(expected, rel=1e-12, abs=1e-300)


def test_series_identity_holds():
    y0, phi = blowup_family(0.5, 1)
    y = taylor_solve(y0, phi, 60)
    residual = series_residual(y, phi)
    assert np.max(np.abs(residual.coefficients[:59])) <= 1e-12


def test_taylor_solve_overflow():
    with pytest.raises(SeriesOverflowError) as info:
        taylor_solve(*blowup_family(1e10, 1), 200)
    assert info.value.exit_code == 3
    assert info.value.index > 1


def test_radius_of_geometric_series():
    series = PowerSeries(0.8 ** -np.arange(201))
    assert radius_estimate(series) == pytest.approx(0.8, rel=1e-2)


def test_radius_of_entire_function():
    assert radius_estimate(PowerSeries(1 / np.array([math.factorial(n) for n in range(101)], dtype=float))) == math.inf


def test_radius_needs_enough_coefficients():
    with pytest.raises(ConvergenceError):
        radius_estimate(PowerSeries(np.ones(10)))


def test_radius_of_constant_is_infinite():
    assert radius_estimate(PowerSeries.constant(2.0, 50)) == math.inf


def test_blowup_radius():
    verdict = empty_interior_demo(0.5, 3)
    assert verdict['analytic_radius'] == pytest.approx(1.5 ** -0.25)
    assert verdict['estimated_radius'] == pytest.approx(1.5 ** -0.25, rel=2e-2)
    assert verdict['blows_up_inside']


def test_no_blowup_when_family_is_mild():
    verdict = empty_interior_demo(0.5, 1)
    assert verdict['estimated_radius'] >= 1.0
    assert not verdict['blows_up_inside']


def test_zero_data_is_entire():
    verdict = empty_interior_demo(0.0, 3)
    assert verdict['estimated_radius'] == math.inf
    assert verdict['verdict'] == 'no blow-up inside unit disc'


def test_counterexample_distances():
    report = counterexample_run(0.5, 0.8, 40)
    assert report['distances'][0]['distance'] == pytest.approx(0.8 / (0.8 - 0.5), rel=1e-12)
    assert 0.4 <= report['ratio'] <= 0.6
    assert 0.78 <= report['radius_y1'] <= 0.82
    assert report['extension_fails']
    distances = [row['distance'] for row in report['distances']]
    assert all(b < a for a, b in zip(distances[1:], distances[2:]))


@pytest.mark.parametrize('r, s', [(0.8, 0.5), (0.0, 0.5), (0.5, 1.0)])
def test_counterexample_validation(r, s):
    with pytest.raises(ConfigError):
        counterexample_run(r, s, 10)


def test_linearized_solve_without_coefficient():
    v = PowerSeries(np.array([5.0, 1.0, -2.0, 0.5, 0.0, 0.0]))
    u = linearized_holo_solve(PowerSeries.zeros(5), 1.5, v)
    expected = v.coefficients.copy()
    expected[0] = 1.5
    assert np.allclose(u.coefficients[:5], expected[:5])


def test_linearized_solve_exponential():
    u = linearized_holo_solve(PowerSeries.constant(1.0, 30), 1.0, PowerSeries.zeros(30))
    assert np.allclose(u.coefficients, 1 / FACTORIALS, rtol=1e-12, atol=0)


def test_linearized_solve_of_zero():
    assert not np.any(linearized_holo_solve(PowerSeries.identity(10), 0.0, PowerSeries.zeros(10)).coefficients)


def test_linearized_solve_satisfies_equation():
    a = PowerSeries(np.array([0.5, -1.0, 0.25] + [0.0] * 28))
    v = PowerSeries(np.array([0.0, 1.0, 0.0, 2.0] + [0.0] * 27))
    u = linearized_holo_solve(a, 0.2, v)
    # u' - a u = v'
    defect = u.derivative() - a * u - v.derivative()
    assert np.max(np.abs(defect.coefficients[:25])) <= 1e-12
