"""
Implicit initial value problem phi(s, y, y') = 0 on [0, 1], y(0) = eta.

The slope is resolved pointwise by Newton's method and the resulting explicit
ODE is stepped with classical RK4. The problem is regular when
p3 = d_xi2 phi o [id; y, y'] has no zero along the trajectory.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Optional, Sequence, TypedDict

import numpy as np
from scipy.integrate import cumulative_simpson

from drfutils.pool import fan_out

from .conf import lab_settings
from .exceptions import (ConfigError, ConvergenceError, RegularityError,
                         SlopeResolutionError, SolmapError)
from .expr import Expression
from .function_core import GridFn1D, compose_jet

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ImplicitIVP:
    eta: float
    phi: Expression
    n: int = 100
    slope_guess: float = 0.0
    threshold: float = field(default_factory=lambda: lab_settings.REGULARITY_THRESHOLD)
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.n < 8:
            raise ConfigError('The implicit IVP needs at least 8 steps.')
        if not {'xi1', 'xi2'} <= set(self.phi.variables):
            raise ConfigError('Implicit nonlinearities are expressions in (s, xi1, xi2).')

    def perturbed(self, d_eta: float, psi: Optional[Expression], eps: float) -> 'ImplicitIVP':
        phi = self.phi if psi is None or eps == 0 else self.phi + eps * psi
        return replace(self, eta=self.eta + eps * d_eta, phi=phi)


@dataclass(frozen=True, eq=False)
class RegularityTrace:
    """p_i = d_i phi o [id; y, y'] at the nodes."""
    p2: GridFn1D
    p3: GridFn1D
    slope: GridFn1D
    min_abs_p3: float
    regular: bool


def resolve_slope(phi: Expression, s: float, y: float, w_guess: float = 0.0,
                  params: Optional[Mapping[str, float]] = None, tolerance: Optional[float] = None,
                  max_iterations: Optional[int] = None) -> float:
    """Newton on w -> phi(s, y, w) from `w_guess` until |phi| <= tolerance."""
    tolerance = lab_settings.SLOPE_TOLERANCE if tolerance is None else tolerance
    max_iterations = max_iterations or lab_settings.SLOPE_MAX_ITERATIONS
    d_phi = phi.differentiate('xi2')
    env = {**(params or {}), 's': s, 't': s, 'xi1': y}
    w = float(w_guess)
    for _ in range(max_iterations):
        f = float(phi.eval({**env, 'xi2': w}))
        if abs(f) <= tolerance:
            return w
        d = float(d_phi.eval({**env, 'xi2': w}))
        if d == 0.0 or not math.isfinite(d):
            raise SlopeResolutionError(f'd phi / d xi2 vanished at s={s:.17g}, y={y:.17g}, w={w:.17g}.', s=s)
        step = f / d
        w -= step
        if not math.isfinite(w):
            break
        if abs(step) <= 4 * np.finfo(float).eps * max(1.0, abs(w)):
            # stagnated at the rounding floor of phi
            if abs(float(phi.eval({**env, 'xi2': w}))) <= 1e3 * tolerance:
                return w
            break
    raise ConvergenceError(f'Slope resolution did not converge at s={s:.17g}, y={y:.17g}.')


def integrate(problem: ImplicitIVP) -> tuple[GridFn1D, RegularityTrace]:
    """RK4 on y' = psi(s, y) with psi resolved by warm-started Newton per stage."""
    phi, params = problem.phi, problem.params
    n = problem.n
    h = 1.0 / n
    y = np.empty(n + 1)
    slopes = np.empty(n + 1)
    y[0] = problem.eta
    last_good = 0.0
    try:
        slopes[0] = resolve_slope(phi, 0.0, y[0], problem.slope_guess, params)
        for k in range(n):
            s = k * h
            k1 = slopes[k]
            k2 = resolve_slope(phi, s + h / 2, y[k] + h / 2 * k1, k1, params)
            k3 = resolve_slope(phi, s + h / 2, y[k] + h / 2 * k2, k2, params)
            k4 = resolve_slope(phi, s + h, y[k] + h * k3, k3, params)
            y[k + 1] = y[k] + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            slopes[k + 1] = resolve_slope(phi, s + h, y[k + 1], k4, params)
            last_good = s + h
    except SlopeResolutionError as e:
        raise SlopeResolutionError(f'{e} Last good s={last_good:.17g}.', s=last_good) from e
    except ConvergenceError as e:
        raise ConvergenceError(f'{e} Last good s={last_good:.17g}.') from e
    solution = GridFn1D(0.0, 1.0, y)
    slope = GridFn1D(0.0, 1.0, slopes)
    return solution, regularity_trace(problem, solution, slope)


def regularity_trace(problem: ImplicitIVP, y: GridFn1D, slope: GridFn1D) -> RegularityTrace:
    p2 = compose_jet(problem.phi.differentiate('xi1'), y, slope, problem.params)
    p3 = compose_jet(problem.phi.differentiate('xi2'), y, slope, problem.params)
    min_abs_p3 = float(np.min(np.abs(p3.values)))
    regular = min_abs_p3 > problem.threshold
    if not regular:
        logger.warning('p3 comes within %.3g of zero (threshold %.3g)', min_abs_p3, problem.threshold)
    return RegularityTrace(p2=p2, p3=p3, slope=slope, min_abs_p3=min_abs_p3, regular=regular)


def variational_solve(trace: RegularityTrace, u0: float, g: GridFn1D) -> GridFn1D:
    """Solve p3 u' + p2 u = g, u(0) = u0 by the integrating factor e^A, A = int p2 / p3."""
    if not trace.regular:
        raise RegularityError(f'p3 vanishes (min |p3| = {trace.min_abs_p3:.3g}); the variation is not unique.')
    trace.p3.check_same_grid(g)
    s = trace.p3.nodes
    A = cumulative_simpson(trace.p2.values / trace.p3.values, x=s, initial=0.0)
    integral = cumulative_simpson(np.exp(A) * g.values / trace.p3.values, x=s, initial=0.0)
    return GridFn1D(0.0, 1.0, np.exp(-A) * (u0 + integral))


def direction_source(problem: ImplicitIVP, trace: RegularityTrace, y: GridFn1D, psi: Optional[Expression]) -> GridFn1D:
    """g = -psi o [id; y, y'] for a perturbation of phi by psi."""
    if psi is None or psi.is_zero:
        return GridFn1D(0.0, 1.0, np.zeros(y.n + 1))
    return -compose_jet(psi, y, trace.slope, problem.params)


class ScanRow(TypedDict):
    parameter: float
    min_abs_p3: float
    regular: bool
    error: str


def _scan_entry(build: Callable[[float], ImplicitIVP], parameter: float) -> ScanRow:
    try:
        _, trace = integrate(build(parameter))
    except SlopeResolutionError as e:
        return ScanRow(parameter=parameter, min_abs_p3=0.0, regular=False, error=str(e))
    except SolmapError as e:
        return ScanRow(parameter=parameter, min_abs_p3=math.nan, regular=False, error=str(e))
    return ScanRow(parameter=parameter, min_abs_p3=trace.min_abs_p3, regular=trace.regular, error='')


def regularity_scan(build: Callable[[float], ImplicitIVP], parameters: Sequence[float], jobs: int = 1) -> list[ScanRow]:
    """min |p3| per parameter; failures are recorded and the scan continues."""
    return fan_out([lambda c=c: _scan_entry(build, c) for c in parameters], jobs)
