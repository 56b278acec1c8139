"""
Complex ODE y' = phi(eta, y), y(0) = y0 on the unit disc, by truncated power series.

The series layer supplies Cauchy products, integration, exp and log so that
closed-form solutions of the linearized equation can be built coefficient-wise.
"""
import logging
import math
from dataclasses import dataclass
from typing import Mapping, Optional, TypedDict, Union

import numpy as np

from .conf import lab_settings
from .exceptions import ConfigError, ConvergenceError, SeriesOverflowError
from .expr import Expression

logger = logging.getLogger(__name__)

Scalar = Union[complex, float]


def _guard(coefficients: np.ndarray) -> np.ndarray:
    bound = lab_settings.OVERFLOW_BOUND
    bad = ~np.isfinite(coefficients) | (np.abs(coefficients) > bound)
    if np.any(bad):
        raise SeriesOverflowError(int(np.argmax(bad)))
    return coefficients


@dataclass(frozen=True, eq=False)
class PowerSeries:
    """c_0 + c_1 eta + ... + c_N eta^N."""
    coefficients: np.ndarray

    def __post_init__(self):
        c = np.array(self.coefficients, dtype=complex)
        if c.ndim != 1 or c.size < 2:
            raise ConfigError('A power series needs at least the coefficients c_0 and c_1.')
        _guard(c)
        c.setflags(write=False)
        object.__setattr__(self, 'coefficients', c)

    @classmethod
    def zeros(cls, order: int) -> 'PowerSeries':
        return cls(np.zeros(order + 1, dtype=complex))

    @classmethod
    def constant(cls, c: Scalar, order: int) -> 'PowerSeries':
        values = np.zeros(order + 1, dtype=complex)
        values[0] = c
        return cls(values)

    @classmethod
    def identity(cls, order: int) -> 'PowerSeries':
        values = np.zeros(order + 1, dtype=complex)
        values[1] = 1.0
        return cls(values)

    @property
    def order(self) -> int:
        return self.coefficients.size - 1

    def truncate(self, order: int) -> 'PowerSeries':
        return PowerSeries(self.coefficients[:order + 1])

    def _align(self, other: 'PowerSeries') -> tuple[np.ndarray, np.ndarray, int]:
        order = min(self.order, other.order)
        return self.coefficients[:order + 1], other.coefficients[:order + 1], order

    def __add__(self, other: Union['PowerSeries', Scalar]) -> 'PowerSeries':
        if isinstance(other, PowerSeries):
            a, b, _ = self._align(other)
            return PowerSeries(a + b)
        return self + PowerSeries.constant(other, self.order)

    __radd__ = __add__

    def __sub__(self, other: Union['PowerSeries', Scalar]) -> 'PowerSeries':
        return self + (-other)

    def __neg__(self) -> 'PowerSeries':
        return PowerSeries(-self.coefficients)

    def __mul__(self, other: Union['PowerSeries', Scalar]) -> 'PowerSeries':
        if isinstance(other, PowerSeries):
            a, b, order = self._align(other)
            return PowerSeries(np.convolve(a, b)[:order + 1])
        return PowerSeries(self.coefficients * other)

    __rmul__ = __mul__

    def derivative(self) -> 'PowerSeries':
        """Term-wise derivative, zero-padded to keep the order."""
        c = self.coefficients
        return PowerSeries(np.append(c[1:] * np.arange(1, c.size), 0.0))

    def integral(self) -> 'PowerSeries':
        """Antiderivative vanishing at 0, truncated to the same order."""
        c = self.coefficients
        return PowerSeries(np.concatenate([[0.0], c[:-1] / np.arange(1, c.size)]))

    def exp(self) -> 'PowerSeries':
        c = self.coefficients
        e = np.zeros_like(c)
        e[0] = np.exp(c[0])
        k = np.arange(1, c.size)
        for n in range(1, c.size):
            e[n] = np.dot(k[:n] * c[1:n + 1], e[n - 1::-1]) / n
        return PowerSeries(_guard(e))

    def log(self) -> 'PowerSeries':
        c = self.coefficients
        if c[0] == 0:
            raise ConfigError('The series logarithm needs a nonzero constant term.')
        out = np.zeros_like(c)
        out[0] = np.log(c[0])
        k = np.arange(1, c.size)
        for n in range(1, c.size):
            out[n] = (c[n] - np.dot(k[:n - 1] * out[1:n], c[n - 1:0:-1]) / n) / c[0]
        return PowerSeries(_guard(out))

    def __call__(self, eta: Union[Scalar, np.ndarray]) -> Union[complex, np.ndarray]:
        """Horner evaluation of the truncated series."""
        return np.polynomial.polynomial.polyval(eta, self.coefficients)

    def sup_on_circle(self, r: float, points: int = 2048) -> float:
        return float(np.max(np.abs(self(r * np.exp(2j * np.pi * np.arange(points) / points)))))

    def csv_rows(self):
        for n, c in enumerate(self.coefficients):
            yield n, c.real, c.imag


@dataclass(frozen=True, eq=False)
class BiSeries:
    """Coefficients c[m, k] of eta^m xi^k."""
    coefficients: np.ndarray

    def __post_init__(self):
        c = np.array(self.coefficients, dtype=complex)
        if c.ndim != 2:
            raise ConfigError('BiSeries coefficients form an (M+1) x (K+1) array.')
        _guard(c.ravel())
        c.setflags(write=False)
        object.__setattr__(self, 'coefficients', c)

    @classmethod
    def from_terms(cls, terms: Mapping[tuple[int, int], Scalar]) -> 'BiSeries':
        if not terms:
            return cls(np.zeros((1, 1), dtype=complex))
        m_max = max(m for m, _ in terms)
        k_max = max(k for _, k in terms)
        c = np.zeros((m_max + 1, k_max + 1), dtype=complex)
        for (m, k), value in terms.items():
            c[m, k] = value
        return cls(c)

    @classmethod
    def from_expression(cls, e: Expression, m_max: int, k_max: int,
                        params: Optional[Mapping[str, float]] = None) -> 'BiSeries':
        """Taylor coefficients at (0, 0) by repeated differentiation."""
        env = {**(params or {}), 'eta': 0.0, 'xi': 0.0}
        c = np.zeros((m_max + 1, k_max + 1), dtype=complex)
        row = e
        for m in range(m_max + 1):
            column = row
            for k in range(k_max + 1):
                c[m, k] = float(column.eval(env)) / (math.factorial(m) * math.factorial(k))
                column = column.differentiate('xi')
            row = row.differentiate('eta')
        return cls(c)

    @property
    def shape(self) -> tuple[int, int]:
        return self.coefficients.shape

    def d_xi(self) -> 'BiSeries':
        c = self.coefficients
        if c.shape[1] == 1:
            return BiSeries(np.zeros_like(c))
        return BiSeries(c[:, 1:] * np.arange(1, c.shape[1]))

    def compose(self, y: PowerSeries) -> PowerSeries:
        """phi o [id, y] truncated to the order of y."""
        order = y.order
        out = np.zeros(order + 1, dtype=complex)
        power = PowerSeries.constant(1.0, order)
        for k in range(self.shape[1]):
            for m in range(min(self.shape[0], order + 1)):
                if self.coefficients[m, k] != 0:
                    out[m:] += self.coefficients[m, k] * power.coefficients[:order + 1 - m]
            power = power * y
        return PowerSeries(_guard(out))

    def __add__(self, other: 'BiSeries') -> 'BiSeries':
        shape = tuple(max(a, b) for a, b in zip(self.shape, other.shape))
        c = np.zeros(shape, dtype=complex)
        c[:self.shape[0], :self.shape[1]] += self.coefficients
        c[:other.shape[0], :other.shape[1]] += other.coefficients
        return BiSeries(c)

    def __mul__(self, scalar: Scalar) -> 'BiSeries':
        return BiSeries(self.coefficients * scalar)

    __rmul__ = __mul__


def taylor_solve(y0: Scalar, phi: BiSeries, order: int) -> PowerSeries:
    """Coefficients of y by (n + 1) y_{n+1} = [eta^n] phi(eta, y(eta))."""
    if order < 1:
        raise ConfigError('Taylor order must be at least 1.')
    c = phi.coefficients
    m_max, k_max = c.shape[0] - 1, c.shape[1] - 1
    y = np.zeros(order + 1, dtype=complex)
    y[0] = y0
    # powers[k][j] is the eta^j coefficient of y^k
    powers = np.zeros((k_max + 1, order + 1), dtype=complex)
    powers[0, 0] = 1.0
    bound = lab_settings.OVERFLOW_BOUND
    for n in range(order):
        for k in range(1, k_max + 1):
            powers[k, n] = np.dot(y[:n + 1], powers[k - 1, n::-1])
        ms = np.arange(min(m_max, n) + 1)
        rhs = np.sum(c[ms, :] * powers[:, n - ms].T)
        y[n + 1] = rhs / (n + 1)
        if not np.isfinite(y[n + 1]) or abs(y[n + 1]) > bound:
            raise SeriesOverflowError(n + 1)
    return PowerSeries(y)


def series_residual(y: PowerSeries, phi: BiSeries) -> PowerSeries:
    """y' - phi(eta, y) coefficient-wise."""
    return y.derivative() - phi.compose(y)


def radius_estimate(series: PowerSeries, tail: float = 0.5, bound: Optional[float] = None) -> float:
    """Radius of convergence from a least-squares line through log|c_n| over the tail.

    Returns inf when the estimate exceeds `bound`.
    """
    bound = lab_settings.RADIUS_BOUND if bound is None else bound
    c = np.abs(series.coefficients)
    index = np.flatnonzero(c[1:] > 0) + 1
    if index.size == 0:
        return math.inf
    tail_index = index[int(math.floor(index.size * (1.0 - tail))):]
    if tail_index.size < 20:
        raise ConvergenceError(f'Radius estimate needs 20 nonzero tail coefficients, got {tail_index.size}.')
    slope, _ = np.polyfit(tail_index.astype(float), np.log(c[tail_index]), 1)
    radius = math.exp(-slope)
    logger.debug('Radius regression over %d coefficients: slope %.6g', tail_index.size, slope)
    return math.inf if radius > bound else radius


def blowup_family(epsilon: float, n: int) -> tuple[complex, BiSeries]:
    """y0 = epsilon and phi = n(n+1) eta^n xi^2, solved by epsilon / (1 - n epsilon eta^(n+1))."""
    return complex(epsilon), BiSeries.from_terms({(n, 2): n * (n + 1)})


class DistanceRow(TypedDict):
    n: int
    distance: float


class CounterexampleReport(TypedDict):
    r: float
    s: float
    distances: list[DistanceRow]
    ratio: float
    radius_y1: float
    extension_fails: bool


def counterexample_run(r: float, s: float, n_max: int, points: int = 2048, order: int = 200) -> CounterexampleReport:
    """y_n = a_n s / (s - a_n^2 eta) with a_n = 1 - 1/n against y1 = s / (s - eta) on |eta| <= r."""
    if not 0 < r < s < 1:
        raise ConfigError('The counterexample needs 0 < r < s < 1.')
    if n_max < 1:
        raise ConfigError('n_max must be at least 1.')
    circle = r * np.exp(2j * np.pi * np.arange(points) / points)
    y1 = s / (s - circle)
    distances: list[DistanceRow] = []
    for n in range(1, n_max + 1):
        a = 1.0 - 1.0 / n
        y_n = a * s / (s - a ** 2 * circle)
        distances.append(DistanceRow(n=n, distance=float(np.max(np.abs(y_n - y1)))))
    half = n_max // 2
    ratio = distances[n_max - 1]['distance'] / distances[half - 1]['distance'] if half >= 1 else math.nan
    # y1 solves y' = y^2 / s with y(0) = 1
    series = taylor_solve(1.0, BiSeries.from_terms({(0, 2): 1.0 / s}), order)
    radius = radius_estimate(series)
    return CounterexampleReport(r=r, s=s, distances=distances, ratio=ratio, radius_y1=radius,
                                extension_fails=radius < 1.0 - 1e-3)


def linearized_holo_solve(a: PowerSeries, u0: Scalar, v: PowerSeries) -> PowerSeries:
    """u = e^A (u0 + int e^-A v') with A = int a."""
    A = a.integral()
    order = min(a.order, v.order)
    A = A.truncate(order)
    inner = ((-A).exp() * v.truncate(order).derivative()).integral()
    return A.exp() * (inner + u0)


class BlowupVerdict(TypedDict):
    epsilon: float
    n: int
    estimated_radius: float
    analytic_radius: float
    blows_up_inside: bool
    verdict: str


def empty_interior_demo(epsilon: float, n: int, order: int = 200) -> BlowupVerdict:
    y0, phi = blowup_family(epsilon, n)
    series = taylor_solve(y0, phi, order)
    estimated = radius_estimate(series)
    analytic = (n * epsilon) ** (-1.0 / (n + 1)) if epsilon > 0 else math.inf
    inside = estimated < 1.0 - 1e-3
    if not (n * epsilon > 1):
        logger.warning('n * epsilon = %.3g does not exceed 1; no blow-up inside the disc expected', n * epsilon)
    return BlowupVerdict(epsilon=epsilon, n=n, estimated_radius=estimated, analytic_radius=analytic,
                         blows_up_inside=inside,
                         verdict='blows up inside unit disc' if inside else 'no blow-up inside unit disc')
