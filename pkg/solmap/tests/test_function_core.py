import numpy as np
import pytest

from solmap.exceptions import DomainError, GridError
from solmap.expr import IMPLICIT_VARIABLES, TRANSPORT_VARIABLES, parse
from solmap.function_core import (CylFn, CylGrid, GridFn1D, axpy, c0i_norm, compose, compose_jet, compose_variation,
                                  d_theta, d_time, read_cyl_csv, read_grid_csv, restrict, scale, sub)


def sine(n_theta: int = 128, T: float = 0.5) -> CylFn:
    return CylFn.from_function(CylGrid.aligned(T, n_theta), lambda t, eta: np.sin(2 * np.pi * eta))


def test_aligned_grid():
    grid = CylGrid.aligned(1.5, 256)
    assert grid.shape == (385, 256)
    assert grid.T == pytest.approx(1.5)
    assert grid.is_aligned
    assert grid.thetas[-1] < 1.0


def test_aligned_grid_rejects_fractional_horizon():
    with pytest.raises(GridError):
        CylGrid.aligned(0.3, 8)


def test_d_theta_first_derivative():
    y = sine()
    _, eta = y.grid.mesh()
    assert np.max(np.abs(d_theta(y).values - 2 * np.pi * np.cos(2 * np.pi * eta))) <= 1e-5


def test_d_theta_second_derivative():
    y = sine()
    _, eta = y.grid.mesh()
    assert np.max(np.abs(d_theta(y, 2).values + 4 * np.pi ** 2 * np.sin(2 * np.pi * eta))) <= 1e-3


@pytest.mark.parametrize('l', [1, 2, 3])
def test_d_theta_of_constant_is_zero(l):
    y = CylFn.constant(CylGrid.aligned(1.0, 32), 2.5)
    assert np.array_equal(d_theta(y, l).values, np.zeros(y.grid.shape))


def test_d_theta_converges_at_stencil_order():
    errors = []
    for n in (32, 64):
        y = sine(n)
        _, eta = y.grid.mesh()
        errors.append(np.max(np.abs(d_theta(y).values - 2 * np.pi * np.cos(2 * np.pi * eta))))
    assert errors[0] / errors[1] >= 2 ** 3.8


def test_d_theta_needs_enough_nodes():
    with pytest.raises(GridError):
        d_theta(CylFn.zeros(CylGrid(6, 1, 0.1)), 1)


def test_d_time_of_linear_function():
    y = CylFn.from_function(CylGrid.aligned(1.0, 16), lambda t, eta: 3 * t + eta)
    assert np.allclose(d_time(y).values, 3.0, atol=1e-12)


@pytest.mark.parametrize('c, i, expected', [(-2.0, 0, 2.0), (0.0, 3, 0.0), (1.5, 2, 1.5)])
def test_c0i_norm_of_constants(c, i, expected):
    assert c0i_norm(CylFn.constant(CylGrid.aligned(1.0, 32), c), i) == pytest.approx(expected, abs=1e-12)


def test_c0i_norm_of_sine():
    assert c0i_norm(sine(), 1) == pytest.approx(2 * np.pi, abs=1e-4)
    assert c0i_norm(sine(), 0) == pytest.approx(1.0, abs=1e-12)


def test_restrict_is_identity_at_horizon():
    y = sine(T=1.0)
    same = restrict(y, 1.0)
    assert np.array_equal(same.values, y.values)
    assert same.grid == y.grid


def test_restrict_composes():
    y = sine(32, T=1.0)
    assert np.array_equal(restrict(restrict(y, 0.75), 0.5).values, restrict(y, 0.5).values)


@pytest.mark.parametrize('T', [0.51, 2.0, 0.0])
def test_restrict_rejects_non_nodes(T):
    with pytest.raises(GridError):
        restrict(sine(32, T=1.0), T)


def test_compose_identity_and_time():
    y = sine(32)
    assert np.array_equal(compose(parse('xi', TRANSPORT_VARIABLES), y).values, y.values)
    t, _ = y.grid.mesh()
    assert np.array_equal(compose(parse('t', TRANSPORT_VARIABLES), y).values, t)


def test_compose_square_of_constant():
    y = CylFn.constant(CylGrid.aligned(1.0, 16), 3.0)
    assert np.array_equal(compose(parse('xi^2', TRANSPORT_VARIABLES), y).values, np.full(y.grid.shape, 9.0))


def test_compose_reports_coordinates_of_domain_error():
    grid = CylGrid.aligned(1.0, 8)
    y = CylFn.from_function(grid, lambda t, eta: eta - 0.5)
    with pytest.raises(DomainError) as info:
        compose(parse('1/xi', TRANSPORT_VARIABLES), y)
    assert info.value.coordinates['eta'] == 0.5
    assert info.value.coordinates['xi'] == 0.0


def test_compose_jet_binds_slope():
    y = GridFn1D.from_function(lambda s: s ** 2, 0.0, 1.0, 50)
    z = compose_jet(parse('xi2 - 2*s', IMPLICIT_VARIABLES), y)
    assert z.sup_norm() <= 1e-12


def test_compose_variation_second_order():
    grid = CylGrid.aligned(0.5, 16)
    y = CylFn.constant(grid, 2.0)
    v = CylFn.constant(grid, 3.0)
    phi = parse('xi^3', TRANSPORT_VARIABLES)
    # 6 y v^2 with no phi direction
    assert np.allclose(compose_variation(phi, y, [None, None], [v, v]).values, 6 * 2.0 * 9.0)
    psi = parse('xi^2', TRANSPORT_VARIABLES)
    # adds 2 * (d_xi psi)(y) * v = 2 * 4 * 3
    assert np.allclose(compose_variation(phi, y, [psi, psi], [v, v]).values, 108.0 + 24.0)


def test_arithmetic_identities():
    y = sine(32)
    assert np.array_equal((y + 0.0).values, y.values)
    assert np.array_equal((2 * y - y).values, y.values)
    assert np.array_equal(axpy(2.0, y, CylFn.zeros(y.grid)).values, scale(2.0, y).values)
    assert sub(y, y).sup_norm() == 0.0


def test_arithmetic_rejects_mismatched_grids():
    with pytest.raises(GridError):
        sine(32) + sine(64)


def test_values_are_immutable_and_finite():
    y = sine(16)
    with pytest.raises(ValueError):
        y.values[0, 0] = 1.0
    with pytest.raises(GridError):
        CylFn(y.grid, np.full(y.grid.shape, np.nan))


def test_grid_fn_restrict_is_node_aligned():
    x = GridFn1D.from_function(lambda s: s, -2.0, 2.0, 40)
    piece = x.restrict(-1.0, 1.0)
    assert piece.n == 20
    assert piece.values[0] == pytest.approx(-1.0)
    with pytest.raises(GridError):
        x.restrict(-1.05, 1.0)


def test_csv_readers_round_trip(tmp_path):
    y = sine(16)
    path = tmp_path / 'y.csv'
    path.write_text('t,eta,y\n' + ''.join(f'{t!r},{eta!r},{v!r}\n' for t, eta, v in y.csv_rows()))
    again = read_cyl_csv(path)
    assert np.array_equal(again.values, y.values)
    assert again.grid.shape == y.grid.shape

    line = GridFn1D.from_function(np.cos, 0.0, 1.0, 10)
    path = tmp_path / 'x.csv'
    path.write_text(''.join(f'{s!r},{v!r}\n' for s, v in line.csv_rows()))
    assert np.array_equal(read_grid_csv(path).values, line.values)


def test_grid_csv_rejects_irregular_nodes(tmp_path):
    path = tmp_path / 'x.csv'
    path.write_text('0,1\n0.1,1\n0.3,1\n')
    with pytest.raises(GridError):
        read_grid_csv(path)
