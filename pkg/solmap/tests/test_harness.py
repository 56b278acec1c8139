import math

import numpy as np
import pytest

from solmap.exceptions import ConfigError, GridError
from solmap.expr import TRANSPORT_VARIABLES, parse
from solmap.function_core import CylFn, CylGrid, GridFn1D, compose
from solmap.harness import (LevelLadder, bijectivity_probe, bootstrap_check, consistency_check, convergence_study,
                            exp_counterexample, transport_family, trig_polynomial)
from solmap.transport import solve

V = TRANSPORT_VARIABLES


def family(y0: str, phi: str, T: float):
    return transport_family(parse(y0, ('s',)), parse(phi, V), T)


def test_ladder_validation():
    assert LevelLadder.uniform(0.5, 3, 16).horizons == (0.5, 1.0, 1.5)
    with pytest.raises(ConfigError):
        LevelLadder((), 16)
    with pytest.raises(ConfigError):
        LevelLadder((1.0, 0.5), 16)


def test_consistency_without_nonlinearity():
    report = consistency_check(family('sin(2*pi*s)', '0', 1.0)(32), LevelLadder.uniform(0.5, 2, 32))
    assert [(p['i'], p['j']) for p in report.pairs] == [(1, 2)]
    assert report.max_error == 0.0


def test_consistency_on_riccati_ladder():
    report = consistency_check(family('0.5', 'xi^2', 1.5)(64), LevelLadder.uniform(0.5, 3, 64))
    assert len(report.pairs) == 3
    assert report.max_error <= 1e-10
    assert all(row['solved'] for row in report.levels)
    assert [len(row['norms']) for row in report.levels] == [2, 3, 4]


def test_single_level_has_no_pairs():
    report = consistency_check(family('0.5', 'xi^2', 0.5)(32), LevelLadder((0.5,), 32))
    assert report.pairs == [] and report.max_error == 0.0


def test_ladder_must_match_data():
    with pytest.raises(GridError):
        consistency_check(family('0.5', 'xi', 1.0)(32), LevelLadder((1.0,), 64))


def test_trig_polynomial_is_reproducible():
    grid = CylGrid.aligned(1.0, 16)
    a = trig_polynomial(grid, np.random.default_rng(7))
    b = trig_polynomial(grid, np.random.default_rng(7))
    assert np.array_equal(a.values, b.values)


def test_bijectivity_with_zero_coefficient():
    report = bijectivity_probe(CylFn.zeros(CylGrid.aligned(1.0, 32)), trials=3)
    assert report.max_residual <= 1e-14
    assert report.max_kernel <= 1e-12


def test_bijectivity_along_riccati_solution():
    problem = family('0.5', 'xi^2', 1.0)(64)
    y = solve(problem).solution
    a = compose(problem.phi.differentiate('xi'), y)
    report = bijectivity_probe(a, trials=4, seed=1)
    assert report.trials == 4
    assert report.max_residual <= 1e-9
    assert report.max_kernel <= 1e-9


def test_bijectivity_without_trials():
    report = bijectivity_probe(CylFn.zeros(CylGrid.aligned(1.0, 16)), trials=0)
    assert (report.trials, report.max_residual, report.max_kernel) == (0, 0.0, 0.0)


def test_bootstrap_norms_converge():
    rows = bootstrap_check(family('sin(2*pi*s)', 'xi', 0.5), [32, 64, 128], max_order=2)
    assert len(rows) == 9
    assert math.isnan(rows[0]['difference'])
    # y = e^t sin(2 pi (eta - t)) has c0^1 norm 2 pi e^T
    first = [row for row in rows if row['order'] == 1]
    assert first[-1]['norm'] == pytest.approx(2 * math.pi * math.exp(0.5), rel=1e-3)
    assert first[2]['difference'] < first[1]['difference']


def test_bootstrap_order_range():
    with pytest.raises(ConfigError):
        bootstrap_check(family('0.5', 'xi', 0.5), [16], max_order=5)


def test_exp_counterexample_levels():
    x = GridFn1D.from_function(lambda s: s + 1.5, -2.0, 2.0, 400)
    rows = exp_counterexample(x, 2)
    assert rows[0]['success'] and rows[0]['min_x'] == pytest.approx(0.5)
    assert rows[0]['multiplier'] == pytest.approx(2.5)
    assert not rows[1]['success'] and math.isnan(rows[1]['multiplier'])
    assert rows[1]['min_x'] == pytest.approx(-0.5)


@pytest.mark.parametrize('c, success', [(1.0, True), (-1.0, False)])
def test_exp_counterexample_constants(c, success):
    rows = exp_counterexample(GridFn1D.constant(c, -3.0, 3.0, 60), 3)
    assert [row['success'] for row in rows] == [success] * 3
    if success:
        assert all(row['multiplier'] == 1.0 for row in rows)


def test_exp_counterexample_needs_coverage():
    with pytest.raises(GridError):
        exp_counterexample(GridFn1D.constant(1.0, -1.0, 1.0, 20), 2)
    with pytest.raises(ConfigError):
        exp_counterexample(GridFn1D.constant(1.0, -1.0, 1.0, 20), 0)


def test_convergence_study_on_riccati():
    rows = convergence_study(family('0.5', 'xi^2', 1.0), parse('1/(2 - t)', V), [32, 64])
    assert math.isnan(rows[0]['order'])
    assert rows[1]['error'] < rows[0]['error']
    assert rows[1]['order'] >= 1.85


def test_parallel_levels_match_serial():
    problem = family('0.5', 'xi^2', 1.0)(32)
    ladder = LevelLadder.uniform(0.5, 2, 32)
    serial = consistency_check(problem, ladder)
    parallel = consistency_check(problem, ladder, jobs=2)
    assert serial.pairs == parallel.pairs
    for a, b in zip(serial.solutions, parallel.solutions):
        assert np.array_equal(a.values, b.values)
