"""
Grid functions on intervals and on the cylinder [t0, T] x S^1.

The angular grid has `n_theta` nodes at eta = m / n_theta (period 1, never
duplicating eta = 1); all angular index arithmetic is modulo `n_theta`.
"""
import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterator, Mapping, Optional, Sequence, Union

import numpy as np

from .conf import lab_settings
from .exceptions import DomainError, GridError
from .expr import Expression

logger = logging.getLogger(__name__)

_ALIGN = 1e-9

# periodic central first-derivative stencils, offsets -2..2
_FIRST_DERIVATIVE = {
    2: np.array([0.0, -0.5, 0.0, 0.5, 0.0]),
    4: np.array([1 / 12, -2 / 3, 0.0, 2 / 3, -1 / 12]),
}


def _frozen(values: Any) -> np.ndarray:
    array = np.array(values, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class GridFn1D:
    """Values at the N + 1 uniform nodes of [a, b], both endpoints included."""
    a: float
    b: float
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'values', _frozen(self.values))
        if self.values.ndim != 1 or self.values.size < 3:
            raise GridError('A GridFn1D needs at least 3 nodes.')
        if not self.a < self.b:
            raise GridError(f'Empty interval [{self.a}, {self.b}].')
        if not np.all(np.isfinite(self.values)):
            raise GridError('GridFn1D values must be finite.')

    @classmethod
    def from_function(cls, f: Callable[[np.ndarray], Any], a: float, b: float, n: int) -> 'GridFn1D':
        nodes = np.linspace(a, b, n + 1)
        return cls(a, b, np.broadcast_to(np.asarray(f(nodes), dtype=float), nodes.shape))

    @classmethod
    def from_expression(cls, e: Expression, a: float, b: float, n: int, variable: str = 's',
                        params: Optional[Mapping[str, float]] = None) -> 'GridFn1D':
        return cls.from_function(lambda nodes: e.eval({**(params or {}), variable: nodes}), a, b, n)

    @classmethod
    def constant(cls, c: float, a: float, b: float, n: int) -> 'GridFn1D':
        return cls(a, b, np.full(n + 1, float(c)))

    @property
    def n(self) -> int:
        return self.values.size - 1

    @property
    def h(self) -> float:
        return (self.b - self.a) / self.n

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(self.a, self.b, self.n + 1)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def derivative(self) -> 'GridFn1D':
        """Order-2 differences, one-sided at the endpoints."""
        return GridFn1D(self.a, self.b, np.gradient(self.values, self.h, edge_order=2))

    def periodic_values(self) -> np.ndarray:
        """Drop the duplicated endpoint of a period-1 function on [0, 1]."""
        return np.array(self.values[:-1])

    def restrict(self, a: float, b: float) -> 'GridFn1D':
        i = (a - self.a) / self.h
        j = (b - self.a) / self.h
        if (abs(i - round(i)) > _ALIGN * max(1.0, abs(i)) or abs(j - round(j)) > _ALIGN * max(1.0, abs(j))
                or round(i) < 0 or round(j) > self.n or round(j) - round(i) < 2):
            raise GridError(f'[{a}, {b}] is not node-aligned inside [{self.a}, {self.b}].')
        return GridFn1D(self.a + round(i) * self.h, self.a + round(j) * self.h, self.values[round(i):round(j) + 1])

    def check_same_grid(self, other: 'GridFn1D'):
        if self.n != other.n or abs(self.a - other.a) > _ALIGN or abs(self.b - other.b) > _ALIGN:
            raise GridError('GridFn1D grids do not match.')

    def _combine(self, other: Union['GridFn1D', float], op: Callable[[Any, Any], Any]) -> 'GridFn1D':
        if isinstance(other, GridFn1D):
            self.check_same_grid(other)
            return GridFn1D(self.a, self.b, op(self.values, other.values))
        return GridFn1D(self.a, self.b, op(self.values, float(other)))

    def __add__(self, other: Union['GridFn1D', float]) -> 'GridFn1D':
        return self._combine(other, np.add)

    def __sub__(self, other: Union['GridFn1D', float]) -> 'GridFn1D':
        return self._combine(other, np.subtract)

    def __mul__(self, other: Union['GridFn1D', float]) -> 'GridFn1D':
        return self._combine(other, np.multiply)

    def __rmul__(self, other: float) -> 'GridFn1D':
        return self._combine(other, np.multiply)

    def __neg__(self) -> 'GridFn1D':
        return GridFn1D(self.a, self.b, -self.values)

    def csv_rows(self) -> Iterator[tuple[float, float]]:
        yield from zip(self.nodes.tolist(), self.values.tolist())


@dataclass(frozen=True)
class CylGrid:
    """Time nodes t0 + k dt (k = 0..n_t) by angular nodes m / n_theta."""
    n_theta: int
    n_t: int
    dt: float
    t0: float = 0.0

    def __post_init__(self):
        if self.n_theta < 1 or self.n_t < 0 or not self.dt > 0:
            raise GridError('Invalid cylinder grid.')

    @classmethod
    def aligned(cls, T: float, n_theta: int, t0: float = 0.0) -> 'CylGrid':
        """Grid on [t0, T] with dt equal to the angular spacing 1 / n_theta."""
        cells = (T - t0) * n_theta
        if cells <= 0 or abs(cells - round(cells)) > _ALIGN * max(1.0, cells):
            raise GridError(f'T - t0 = {T - t0} is not a whole number of angular cells 1/{n_theta}.')
        return cls(n_theta, int(round(cells)), 1.0 / n_theta, t0)

    @property
    def T(self) -> float:
        return self.t0 + self.n_t * self.dt

    @property
    def dtheta(self) -> float:
        return 1.0 / self.n_theta

    @property
    def is_aligned(self) -> bool:
        return abs(self.dt - self.dtheta) <= _ALIGN * self.dtheta

    @property
    def shape(self) -> tuple[int, int]:
        return self.n_t + 1, self.n_theta

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n_t + 1)

    @property
    def thetas(self) -> np.ndarray:
        return np.arange(self.n_theta) / self.n_theta

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.broadcast_to(self.times[:, None], self.shape), np.broadcast_to(self.thetas[None, :], self.shape)

    def node_index(self, t: float) -> int:
        """Index of the time node at `t`; no interpolation."""
        k = (t - self.t0) / self.dt
        if abs(k - round(k)) > _ALIGN * max(1.0, abs(k)) or not 0 <= round(k) <= self.n_t:
            raise GridError(f't = {t} is not a node of the time grid on [{self.t0}, {self.T}].')
        return int(round(k))

    def window(self, k0: int, k1: int) -> 'CylGrid':
        return CylGrid(self.n_theta, k1 - k0, self.dt, self.t0 + k0 * self.dt)

    def require_aligned(self):
        if not self.is_aligned:
            raise GridError(f'Characteristics need dt = dtheta; got dt = {self.dt}, dtheta = {self.dtheta}.')


@dataclass(frozen=True, eq=False)
class CylFn:
    """Grid function on the cylinder, values[k, m] = y(t0 + k dt, m / n_theta)."""
    grid: CylGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, 'values', _frozen(self.values))
        if self.values.shape != self.grid.shape:
            raise GridError(f'Values of shape {self.values.shape} do not fit grid shape {self.grid.shape}.')
        if not np.all(np.isfinite(self.values)):
            raise GridError('CylFn values must be finite.')

    @classmethod
    def zeros(cls, grid: CylGrid) -> 'CylFn':
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def constant(cls, grid: CylGrid, c: float) -> 'CylFn':
        return cls(grid, np.full(grid.shape, float(c)))

    @classmethod
    def from_function(cls, grid: CylGrid, f: Callable[[np.ndarray, np.ndarray], Any]) -> 'CylFn':
        t, eta = grid.mesh()
        return cls(grid, np.broadcast_to(np.asarray(f(t, eta), dtype=float), grid.shape))

    @classmethod
    def from_expression(cls, grid: CylGrid, e: Expression, params: Optional[Mapping[str, float]] = None) -> 'CylFn':
        """Sample an expression in (t, eta); `xi` is bound to 0 when declared."""
        t, eta = grid.mesh()
        return cls(grid, np.broadcast_to(np.asarray(e.eval({**(params or {}), 't': t, 'eta': eta, 'xi': 0.0}),
                                                    dtype=float), grid.shape))

    @property
    def T(self) -> float:
        return self.grid.T

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def slice(self, k: int) -> np.ndarray:
        return np.array(self.values[k])

    def check_same_grid(self, other: 'CylFn'):
        g, o = self.grid, other.grid
        if g.shape != o.shape or abs(g.dt - o.dt) > _ALIGN * g.dt or abs(g.t0 - o.t0) > _ALIGN:
            raise GridError('CylFn grids do not match.')

    def _combine(self, other: Union['CylFn', float], op: Callable[[Any, Any], Any]) -> 'CylFn':
        if isinstance(other, CylFn):
            self.check_same_grid(other)
            return CylFn(self.grid, op(self.values, other.values))
        return CylFn(self.grid, op(self.values, float(other)))

    def __add__(self, other: Union['CylFn', float]) -> 'CylFn':
        return self._combine(other, np.add)

    def __sub__(self, other: Union['CylFn', float]) -> 'CylFn':
        return self._combine(other, np.subtract)

    def __mul__(self, other: Union['CylFn', float]) -> 'CylFn':
        return self._combine(other, np.multiply)

    def __rmul__(self, other: float) -> 'CylFn':
        return self._combine(other, np.multiply)

    def __neg__(self) -> 'CylFn':
        return CylFn(self.grid, -self.values)

    def csv_rows(self) -> Iterator[tuple[float, float, float]]:
        times, thetas = self.grid.times.tolist(), self.grid.thetas.tolist()
        for k, t in enumerate(times):
            for m, eta in enumerate(thetas):
                yield t, eta, float(self.values[k, m])


GridFn = Union[GridFn1D, CylFn]


# linear algebra

def axpy(alpha: float, x: GridFn, y: GridFn) -> GridFn:
    """alpha * x + y on matching grids."""
    return alpha * x + y  # type: ignore


def scale(alpha: float, x: GridFn) -> GridFn:
    return alpha * x


def sub(x: GridFn, y: GridFn) -> GridFn:
    return x - y  # type: ignore


# angular derivatives and norms

def periodic_derivative(values: np.ndarray, l: int = 1, order: Optional[int] = None) -> np.ndarray:
    """Apply the periodic central stencil `l` times along the last axis (period 1)."""
    order = order or lab_settings.STENCIL_ORDER
    if order not in _FIRST_DERIVATIVE:
        raise GridError(f'Unsupported stencil order {order}.')
    n = values.shape[-1]
    if n < 2 * l + 5:
        raise GridError(f'{n} angular nodes are too few for {l} derivative(s); need at least {2 * l + 5}.')
    h = 1.0 / n
    result = np.asarray(values, dtype=float)
    for _ in range(l):
        plus1, minus1 = np.roll(result, -1, axis=-1), np.roll(result, 1, axis=-1)
        if order == 4:
            plus2, minus2 = np.roll(result, -2, axis=-1), np.roll(result, 2, axis=-1)
            result = ((minus2 - plus2) + 8.0 * (plus1 - minus1)) / (12.0 * h)
        else:
            result = (plus1 - minus1) / (2.0 * h)
    return result


def d_theta(y: CylFn, l: int = 1, order: Optional[int] = None) -> CylFn:
    if l < 1:
        raise GridError('Derivative order must be at least 1.')
    return CylFn(y.grid, periodic_derivative(y.values, l, order))


def periodic_c0i_norm(values: np.ndarray, i: int, order: Optional[int] = None) -> float:
    norm = float(np.max(np.abs(values)))
    for l in range(1, i + 1):
        norm = max(norm, float(np.max(np.abs(periodic_derivative(values, l, order)))))
    return norm


def c0i_norm(y: CylFn, i: int, order: Optional[int] = None) -> float:
    """max over l <= i of sup |d_theta^l y|."""
    if i < 0:
        raise GridError('Level must be non-negative.')
    return periodic_c0i_norm(y.values, i, order)


_ONE_SIDED = {
    4: (np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0, np.array([-3.0, -10.0, 18.0, -6.0, 1.0]) / 12.0),
    2: (np.array([-3.0, 4.0, -1.0]) / 2.0, None),
}


def d_time(y: CylFn, order: Optional[int] = None) -> CylFn:
    """Time derivative: central in the interior, one-sided at both ends."""
    order = order or lab_settings.STENCIL_ORDER
    v, dt, n = y.values, y.grid.dt, y.grid.n_t
    if n < order:
        raise GridError(f'{n + 1} time nodes are too few for an order-{order} time derivative.')
    out = np.empty_like(v)
    if order == 4:
        out[2:n - 1] = ((v[0:n - 3] - v[4:n + 1]) + 8.0 * (v[3:n] - v[1:n - 2])) / (12.0 * dt)
        first, second = _ONE_SIDED[4]
        out[0] = np.tensordot(first, v[0:5], axes=1) / dt
        out[1] = np.tensordot(second, v[0:5], axes=1) / dt
        out[n] = -np.tensordot(first, v[n::-1][:5], axes=1) / dt
        out[n - 1] = -np.tensordot(second, v[n::-1][:5], axes=1) / dt
    else:
        out[1:n] = (v[2:n + 1] - v[0:n - 1]) / (2.0 * dt)
        first, _ = _ONE_SIDED[2]
        out[0] = np.tensordot(first, v[0:3], axes=1) / dt
        out[n] = -np.tensordot(first, v[n::-1][:3], axes=1) / dt
    return CylFn(y.grid, out)


def restrict(y: CylFn, T: float) -> CylFn:
    """Restriction to [t0, T]; T must be a time node."""
    k = y.grid.node_index(T)
    if k == 0:
        raise GridError('Restriction to a single time node is not a cylinder function.')
    return CylFn(y.grid.window(0, k), y.values[:k + 1])


def restrict_window(y: CylFn, k0: int, k1: int) -> CylFn:
    return CylFn(y.grid.window(k0, k1), y.values[k0:k1 + 1])


# composition x o [id, y]

def _domain_at(error: DomainError, shape: tuple[int, ...], coordinates: Callable[[int], dict[str, float]]) -> DomainError:
    mask = np.broadcast_to(np.asarray(error.mask if error.mask is not None else True), shape)
    return error.at(**coordinates(int(np.argmax(mask))))


def compose(x: Expression, y: CylFn, params: Optional[Mapping[str, float]] = None) -> CylFn:
    """z(t, eta) = x(t, eta, y(t, eta)) nodewise."""
    t, eta = y.grid.mesh()
    try:
        z = x.eval({**(params or {}), 't': t, 'eta': eta, 'xi': y.values})
    except DomainError as e:
        def where(flat: int) -> dict[str, float]:
            k, m = np.unravel_index(flat, y.grid.shape)
            return {'t': float(t[k, m]), 'eta': float(eta[k, m]), 'xi': float(y.values[k, m])}
        raise _domain_at(e, y.grid.shape, where) from e
    return CylFn(y.grid, np.broadcast_to(np.asarray(z, dtype=float), y.grid.shape))


def compose_jet(x: Expression, y: GridFn1D, dy: Optional[GridFn1D] = None,
                params: Optional[Mapping[str, float]] = None) -> GridFn1D:
    """z(s) = x(s, y(s), y'(s)); `t` is bound to `s` as well."""
    dy = dy or y.derivative()
    s = y.nodes
    try:
        z = x.eval({**(params or {}), 's': s, 't': s, 'xi1': y.values, 'xi2': dy.values})
    except DomainError as e:
        def where(flat: int) -> dict[str, float]:
            return {'s': float(s[flat]), 'xi1': float(y.values[flat]), 'xi2': float(dy.values[flat])}
        raise _domain_at(e, s.shape, where) from e
    return GridFn1D(y.a, y.b, np.broadcast_to(np.asarray(z, dtype=float), s.shape))


def compose_variation(x: Expression, y: CylFn, us: Sequence[Optional[Expression]], vs: Sequence[CylFn],
                      params: Optional[Mapping[str, float]] = None) -> CylFn:
    """k-th variation of the composition map at (x, y) in the directions (u_j, v_j).

    delta^k = d_xi^k x o [id, y] * prod(v) + sum_j d_xi^(k-1) u_j o [id, y] * prod(v_i, i != j)
    """
    k = len(vs)
    if k < 1 or len(us) != k:
        raise GridError('compose_variation needs matching, non-empty direction lists.')
    for v in vs:
        y.check_same_grid(v)
    dx = x
    for _ in range(k):
        dx = dx.differentiate('xi')
    total = compose(dx, y, params).values * np.prod([v.values for v in vs], axis=0)
    for j, u in enumerate(us):
        if u is None or u.is_zero:
            continue
        du = u
        for _ in range(k - 1):
            du = du.differentiate('xi')
        others = [v.values for i, v in enumerate(vs) if i != j]
        total = total + compose(du, y, params).values * (np.prod(others, axis=0) if others else 1.0)
    return CylFn(y.grid, total)


# CSV

def read_grid_csv(path: Union[str, Path]) -> GridFn1D:
    """Read a (node, value) CSV written by the laboratory, header optional."""
    nodes: list[float] = []
    values: list[float] = []
    with open(path, newline='') as f:
        for row in csv.reader(f):
            if not row:
                continue
            try:
                node, value = float(row[0]), float(row[1])
            except ValueError:
                continue
            nodes.append(node)
            values.append(value)
    if len(values) < 3:
        raise GridError(f'{path}: fewer than 3 data rows.')
    spacing = np.diff(nodes)
    if np.any(spacing <= 0) or np.ptp(spacing) > 1e-9 * max(1.0, abs(nodes[-1] - nodes[0])):
        raise GridError(f'{path}: nodes are not uniform.')
    return GridFn1D(nodes[0], nodes[-1], np.asarray(values))


def read_cyl_csv(path: Union[str, Path]) -> CylFn:
    """Read a (t, eta, value) CSV, row-major in t then eta."""
    rows: list[tuple[float, float, float]] = []
    with open(path, newline='') as f:
        for row in csv.reader(f):
            try:
                rows.append((float(row[0]), float(row[1]), float(row[2])))
            except (ValueError, IndexError):
                continue
    if not rows:
        raise GridError(f'{path}: no data rows.')
    data = np.asarray(rows)
    n_theta = int(np.sum(data[:, 0] == data[0, 0]))
    if data.shape[0] % n_theta:
        raise GridError(f'{path}: ragged cylinder grid.')
    n_t = data.shape[0] // n_theta - 1
    times = data[::n_theta, 0]
    dt = (times[-1] - times[0]) / n_t if n_t else 1.0 / n_theta
    return CylFn(CylGrid(n_theta, n_t, dt, float(times[0])), data[:, 2].reshape(n_t + 1, n_theta))
