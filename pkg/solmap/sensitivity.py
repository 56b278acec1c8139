"""
Derivative checks for the solution maps.

Each map evaluates the solution at data perturbed by weighted directions and
solves the variational equation for a direction. Finite differences of the
former are compared against the latter.
"""
import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Any, Optional, Sequence, Union

import numpy as np

from drfutils.pool import fan_out

from .bvp import BVProblem, linearized_variation, newton_solve
from .conf import lab_settings
from .exceptions import ConfigError, GridError
from .expr import Expression
from .function_core import CylFn, GridFn1D, compose, compose_variation
from .holo import BiSeries, PowerSeries, linearized_holo_solve, taylor_solve
from .implicit_ode import ImplicitIVP, direction_source, integrate, variational_solve
from .transport import (PicardConfig, SolveReport, TransportProblem, bar_y0, char_integral, linearized_solve,
                        solve)

logger = logging.getLogger(__name__)

Data = Union[None, float, complex, GridFn1D, tuple[float, ...], np.ndarray]
Terms = Sequence[tuple[float, 'Direction']]


@dataclass(frozen=True, eq=False)
class Direction:
    """A direction (d_data, d_phi) with its magnitude carried in `scale`.

    `d_data` is a GridFn1D for transport, a float for the IVP, a pair
    (d_eta0, d_eta1) for the BVP and a complex number for the holomorphic map.
    """
    d_data: Data = None
    d_phi: Optional[Expression] = None
    scale: float = 1.0

    @property
    def is_zero(self) -> bool:
        if self.scale == 0:
            return True
        data_zero = self.d_data is None or (
            not np.any(self.d_data.values) if isinstance(self.d_data, GridFn1D) else not np.any(np.asarray(self.d_data)))
        return data_zero and (self.d_phi is None or self.d_phi.is_zero)

    @property
    def key(self) -> tuple[bytes, str, str]:
        """Deterministic ordering key."""
        if isinstance(self.d_data, GridFn1D):
            data = self.d_data.values.tobytes()
        elif self.d_data is None:
            data = b''
        else:
            data = np.asarray(self.d_data, dtype=complex).tobytes()
        return data, str(self.d_phi) if self.d_phi is not None else '', repr(self.scale)

    def combined(self, alpha: float, other: 'Direction', beta: float) -> 'Direction':
        """alpha * self + beta * other with unit scale."""
        a, b = alpha * self.scale, beta * other.scale
        return Direction(d_data=_combine_data(self.d_data, a, other.d_data, b),
                         d_phi=_combine_phi(self.d_phi, a, other.d_phi, b))


def _combine_data(x: Data, a: float, y: Data, b: float) -> Data:
    if x is None and y is None:
        return None
    if isinstance(x, GridFn1D) or isinstance(y, GridFn1D):
        if x is None:
            return b * y  # type: ignore
        if y is None:
            return a * x
        return a * x + b * y  # type: ignore
    combined = a * np.asarray(0.0 if x is None else x) + b * np.asarray(0.0 if y is None else y)
    return combined.item() if combined.ndim == 0 else tuple(combined)


def _combine_phi(x: Optional[Expression], a: float, y: Optional[Expression], b: float) -> Optional[Expression]:
    terms = [c * e for c, e in ((a, x), (b, y)) if e is not None and c != 0]
    if not terms:
        return None
    return terms[0] if len(terms) == 1 else terms[0] + terms[1]


def _canonical(terms: Terms) -> list[tuple[float, 'Direction']]:
    return sorted(terms, key=lambda term: term[1].key)


class SolutionMap(ABC):
    """Data -> solution, flattened to an array of nodal values or coefficients."""

    @abstractmethod
    def evaluate(self, terms: Terms) -> np.ndarray:
        """Solution at x + sum(w * h) over the (w, h) terms."""

    @abstractmethod
    def variation(self, h: Direction) -> np.ndarray:
        """First variation of the map at x in the direction h."""

    def second_variation(self, h1: Direction, h2: Direction) -> Optional[np.ndarray]:
        return None

    def evaluate_many(self, points: Sequence[Terms], jobs: int = 1) -> list[np.ndarray]:
        return fan_out([lambda terms=terms: self.evaluate(_canonical(terms)) for terms in points], jobs)

    @cached_property
    def base(self) -> np.ndarray:
        return self.evaluate([])


class TransportMap(SolutionMap):
    """(y0, phi) -> y for y_t + y_eta = phi(t, eta, y)."""

    def __init__(self, problem: TransportProblem, config: Optional[PicardConfig] = None):
        self.problem = problem
        self.config = config or PicardConfig()

    def _problem(self, terms: Terms) -> TransportProblem:
        y0, phi = self.problem.y0, self.problem.phi
        for w, h in terms:
            c = w * h.scale
            if isinstance(h.d_data, GridFn1D):
                y0 = y0 + c * h.d_data
            elif h.d_data is not None:
                y0 = y0 + c * float(h.d_data)  # type: ignore
            if h.d_phi is not None and not h.d_phi.is_zero:
                phi = phi + c * h.d_phi
        return replace(self.problem, y0=y0, phi=phi)

    def evaluate(self, terms: Terms) -> np.ndarray:
        return solve(self._problem(terms), self.config).solution.values

    @cached_property
    def report(self) -> SolveReport:
        return solve(self.problem, self.config)

    @property
    def base(self) -> np.ndarray:  # type: ignore[override]
        return self.report.solution.values

    def variation(self, h: Direction) -> np.ndarray:
        return variational_transport(self.problem, self.report.solution, h, self.config).values

    def second_variation(self, h1: Direction, h2: Direction) -> np.ndarray:
        y = self.report.solution
        u1 = variational_transport(self.problem, y, h1, self.config)
        u2 = variational_transport(self.problem, y, h2, self.config)
        psi = [None if h.d_phi is None else h.scale * h.d_phi for h in (h1, h2)]
        g = compose_variation(self.problem.phi, y, psi, [u1, u2], self.problem.params)
        a = compose(self.problem.phi.differentiate('xi'), y, self.problem.params)
        return linearized_solve(a, char_integral(y.grid.t0, g, self.config.quadrature), self.config).values


def variational_transport(problem: TransportProblem, y: CylFn, h: Direction,
                          config: Optional[PicardConfig] = None) -> CylFn:
    """u = bar(d_y0) + I(0, psi o [id, y] + a u) with a = d_xi phi o [id, y]."""
    config = config or PicardConfig()
    grid = y.grid
    if isinstance(h.d_data, GridFn1D):
        v = h.scale * bar_y0(h.d_data, grid)
    else:
        v = CylFn.constant(grid, h.scale * float(h.d_data or 0.0))  # type: ignore
    if h.d_phi is not None and not h.d_phi.is_zero:
        v = v + char_integral(grid.t0, compose(h.scale * h.d_phi, y, problem.params), config.quadrature)
    a = compose(problem.phi.differentiate('xi'), y, problem.params)
    return linearized_solve(a, v, config)


class ImplicitMap(SolutionMap):
    """(eta, phi) -> y for phi(s, y, y') = 0."""

    def __init__(self, problem: ImplicitIVP):
        self.problem = problem

    def _problem(self, terms: Terms) -> ImplicitIVP:
        eta, phi = self.problem.eta, self.problem.phi
        for w, h in terms:
            c = w * h.scale
            eta += c * float(h.d_data or 0.0)  # type: ignore
            if h.d_phi is not None and not h.d_phi.is_zero:
                phi = phi + c * h.d_phi
        return replace(self.problem, eta=eta, phi=phi)

    def evaluate(self, terms: Terms) -> np.ndarray:
        return integrate(self._problem(terms))[0].values

    @cached_property
    def solution(self):
        return integrate(self.problem)

    @property
    def base(self) -> np.ndarray:  # type: ignore[override]
        return self.solution[0].values

    def variation(self, h: Direction) -> np.ndarray:
        y, trace = self.solution
        psi = None if h.d_phi is None else h.scale * h.d_phi
        g = direction_source(self.problem, trace, y, psi)
        return variational_solve(trace, h.scale * float(h.d_data or 0.0), g).values  # type: ignore


class BoundaryMap(SolutionMap):
    """(eta0, eta1, phi) -> y for y'' = phi(s, y, y')."""

    def __init__(self, problem: BVProblem):
        self.problem = problem

    def _problem(self, terms: Terms) -> BVProblem:
        eta0, eta1, phi = self.problem.eta0, self.problem.eta1, self.problem.phi
        for w, h in terms:
            c = w * h.scale
            if h.d_data is not None:
                d0, d1 = h.d_data  # type: ignore
                eta0 += c * d0
                eta1 += c * d1
            if h.d_phi is not None and not h.d_phi.is_zero:
                phi = phi + c * h.d_phi
        return replace(self.problem, eta0=eta0, eta1=eta1, phi=phi)

    def evaluate(self, terms: Terms) -> np.ndarray:
        return newton_solve(self._problem(terms))[0].values

    @cached_property
    def solution(self) -> GridFn1D:
        return newton_solve(self.problem)[0]

    @property
    def base(self) -> np.ndarray:  # type: ignore[override]
        return self.solution.values

    def variation(self, h: Direction) -> np.ndarray:
        d0, d1 = h.d_data if h.d_data is not None else (0.0, 0.0)  # type: ignore
        psi = None if h.d_phi is None else h.scale * h.d_phi
        return linearized_variation(self.problem, self.solution, h.scale * d0, h.scale * d1, psi).values


class HoloMap(SolutionMap):
    """(y0, phi) -> Taylor coefficients of y for y' = phi(eta, y)."""

    def __init__(self, y0: complex, phi: Expression, order: int = 60, m_max: int = 8, k_max: int = 4,
                 params: Optional[dict[str, float]] = None):
        self.y0 = complex(y0)
        self.order = order
        self.degrees = (m_max, k_max)
        self.params = params or {}
        self.phi = BiSeries.from_expression(phi, m_max, k_max, self.params)
        self._psi: dict[str, BiSeries] = {}

    def _series(self, psi: Expression) -> BiSeries:
        if (cached := self._psi.get(text := str(psi))) is None:
            cached = self._psi[text] = BiSeries.from_expression(psi, *self.degrees, self.params)
        return cached

    def evaluate(self, terms: Terms) -> np.ndarray:
        y0, phi = self.y0, self.phi
        for w, h in terms:
            c = w * h.scale
            y0 += c * complex(h.d_data or 0.0)  # type: ignore
            if h.d_phi is not None and not h.d_phi.is_zero:
                phi = phi + c * self._series(h.d_phi)
        return taylor_solve(y0, phi, self.order).coefficients

    @cached_property
    def solution(self) -> PowerSeries:
        return taylor_solve(self.y0, self.phi, self.order)

    @property
    def base(self) -> np.ndarray:  # type: ignore[override]
        return self.solution.coefficients

    def variation(self, h: Direction) -> np.ndarray:
        y = self.solution
        a = self.phi.d_xi().compose(y)
        if h.d_phi is None or h.d_phi.is_zero:
            v = PowerSeries.zeros(self.order)
        else:
            v = (h.scale * self._series(h.d_phi)).compose(y).integral()
        return linearized_holo_solve(a, h.scale * complex(h.d_data or 0.0), v).coefficients  # type: ignore


# checks

@dataclass(frozen=True, eq=False)
class DerivReport:
    fd_value: np.ndarray
    variational_value: np.ndarray
    error: float
    eps: float
    tolerance: float
    order: Optional[float] = None

    @property
    def passed(self) -> bool:
        return self.error <= self.tolerance

    def summary(self) -> dict[str, Any]:
        return {'error': self.error, 'eps': self.eps, 'tolerance': self.tolerance, 'order': self.order,
                'verdict': 'pass' if self.passed else 'fail'}


def fd_directional(solution_map: SolutionMap, h: Direction, eps: Optional[float] = None, jobs: int = 1) -> np.ndarray:
    """(S(x + eps h) - S(x - eps h)) / (2 eps) nodewise."""
    eps = eps or lab_settings.FD_EPSILON
    if h.is_zero:
        return np.zeros_like(solution_map.base)
    plus, minus = solution_map.evaluate_many([[(eps, h)], [(-eps, h)]], jobs)
    return (plus - minus) / (2.0 * eps)


def compare(fd: np.ndarray, variational: np.ndarray, eps: float = math.nan, tolerance: Optional[float] = None,
            order: Optional[float] = None) -> DerivReport:
    """Relative sup error against max(|variational|, floor)."""
    fd, variational = np.asarray(fd), np.asarray(variational)
    if fd.shape != variational.shape:
        raise GridError(f'Cannot compare fields of shapes {fd.shape} and {variational.shape}.')
    tolerance = lab_settings.DERIVATIVE_TOLERANCE if tolerance is None else tolerance
    scale = max(float(np.max(np.abs(variational), initial=0.0)), lab_settings.RELATIVE_FLOOR)
    error = float(np.max(np.abs(fd - variational), initial=0.0)) / scale
    return DerivReport(fd_value=fd, variational_value=variational, error=error, eps=eps, tolerance=tolerance,
                       order=order)


def richardson_order(solution_map: SolutionMap, h: Direction, eps: Optional[float] = None, jobs: int = 1) -> float:
    """Observed eps-order from central differences at eps, eps/2 and eps/4."""
    eps = eps or lab_settings.FD_EPSILON
    points = [[(sign * e, h)] for e in (eps, eps / 2, eps / 4) for sign in (1.0, -1.0)]
    values = solution_map.evaluate_many(points, jobs)
    fd = [(values[2 * k] - values[2 * k + 1]) / (2.0 * e) for k, e in enumerate((eps, eps / 2, eps / 4))]
    coarse = float(np.max(np.abs(fd[0] - fd[1])))
    fine = float(np.max(np.abs(fd[1] - fd[2])))
    if coarse == 0.0 or fine == 0.0:
        logger.warning('Richardson differences vanished; the map looks affine in this direction')
        return math.nan
    return math.log2(coarse / fine)


def derivative_check(solution_map: SolutionMap, h: Direction, eps: Optional[float] = None,
                     tolerance: Optional[float] = None, richardson: bool = False, jobs: int = 1) -> DerivReport:
    eps = eps or lab_settings.FD_EPSILON
    fd = fd_directional(solution_map, h, eps, jobs)
    order = richardson_order(solution_map, h, eps, jobs) if richardson else None
    return compare(fd, solution_map.variation(h), eps, tolerance, order)


def linearity_check(solution_map: SolutionMap, h1: Direction, h2: Direction, alpha: float = 0.7,
                    beta: float = -1.3) -> float:
    """Relative sup defect of the variation under alpha h1 + beta h2."""
    lhs = solution_map.variation(h1.combined(alpha, h2, beta))
    rhs = alpha * solution_map.variation(h1) + beta * solution_map.variation(h2)
    return compare(lhs, rhs).error


@dataclass(frozen=True, eq=False)
class SecondVariationReport:
    mixed: np.ndarray
    swapped: np.ndarray
    analytic: Optional[np.ndarray]
    error: Optional[float]
    eps: float
    tolerance: float

    @property
    def symmetric(self) -> bool:
        return bool(np.array_equal(self.mixed, self.swapped))

    @property
    def passed(self) -> bool:
        return self.symmetric and (self.error is None or self.error <= self.tolerance)

    def summary(self) -> dict[str, Any]:
        return {'symmetric': self.symmetric, 'error': self.error, 'eps': self.eps, 'tolerance': self.tolerance,
                'analytic': self.analytic is not None, 'verdict': 'pass' if self.passed else 'fail'}


def _mixed_difference(solution_map: SolutionMap, h1: Direction, h2: Direction, eps: float,
                      jobs: int) -> np.ndarray:
    pp, pm, mp, mm = solution_map.evaluate_many(
        [[(eps, h1), (eps, h2)], [(eps, h1), (-eps, h2)], [(-eps, h1), (eps, h2)], [(-eps, h1), (-eps, h2)]], jobs)
    return ((pp + mm) - (pm + mp)) / (4.0 * eps * eps)


def second_variation_check(solution_map: SolutionMap, h1: Direction, h2: Direction, eps: float = 1e-2,
                           tolerance: float = 1e-2, jobs: int = 1) -> SecondVariationReport:
    """Mixed second difference, its direction swap, and the analytic second variation when available."""
    if not eps > 0:
        raise ConfigError('The second-difference step must be positive.')
    if h1.is_zero or h2.is_zero:
        zero = np.zeros_like(solution_map.base)
        return SecondVariationReport(mixed=zero, swapped=zero.copy(), analytic=None, error=None, eps=eps,
                                     tolerance=tolerance)
    mixed = _mixed_difference(solution_map, h1, h2, eps, jobs)
    swapped = _mixed_difference(solution_map, h2, h1, eps, jobs)
    analytic = solution_map.second_variation(h1, h2)
    error = None if analytic is None else compare(mixed, analytic, eps, tolerance).error
    if analytic is None:
        logger.info('No closed-form second variation; reporting symmetry only')
    return SecondVariationReport(mixed=mixed, swapped=swapped, analytic=analytic, error=error, eps=eps,
                                 tolerance=tolerance)
