"""
Semilinear transport on the cylinder: dy/dt + dy/deta = phi(t, eta, y), y(0, .) = y0.

The equation is solved in its integral form y = bar_y0 + I(0, phi o [id, y])
where I integrates along the unit-speed characteristics. With dt equal to the
angular spacing every characteristic runs through grid nodes, so I needs no
interpolation. Time is marched in windows; each window is a Picard fixed
point whose contraction constants are sampled from phi and recorded.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Literal, Mapping, Optional, Sequence, Union

import numpy as np
from scipy.integrate import cumulative_simpson, cumulative_trapezoid, quad
from scipy.interpolate import CubicHermiteSpline

from .conf import lab_settings
from .exceptions import (ConfigError, ConvergenceError, DomainError, GridError,
                         StagnationError)
from .expr import TRANSPORT_VARIABLES, Expression
from .function_core import (CylFn, CylGrid, GridFn1D, c0i_norm, compose,
                            d_theta, d_time, periodic_c0i_norm)

logger = logging.getLogger(__name__)

Quadrature = Literal['trapezoid', 'simpson']
StepPolicy = Literal['fixed', 'lemma-c']
Partial = Literal['value', 'eta', 'xi', 'eta_xi', 'xi_xi']

_RATIO_FLOOR = 1e3 * np.finfo(float).eps


# cutoff

def _chi0(r: np.ndarray) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    inside = (r > 1.0) & (r < 2.0)
    ri = r[inside]
    out[inside] = np.exp(1.0 / ((ri - 1.0) * (ri - 2.0)))
    return out


def _dchi0(r: np.ndarray) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    inside = (r > 1.0) & (r < 2.0)
    ri = r[inside]
    q = (ri - 1.0) * (ri - 2.0)
    out[inside] = np.exp(1.0 / q) * (-(2.0 * ri - 3.0) / q ** 2)
    return out


@lru_cache(maxsize=None)
def _cutoff_profile() -> tuple[float, CubicHermiteSpline]:
    """Normalising integral and the antiderivative of chi0 on [1, 2]."""
    total, _ = quad(lambda r: float(_chi0(np.array([r]))[0]), 1.0, 2.0, epsabs=1e-15, epsrel=1e-13)
    r = np.linspace(1.0, 2.0, 4097)
    antiderivative = cumulative_simpson(_chi0(r), x=r, initial=0.0)
    antiderivative *= total / antiderivative[-1]
    return total, CubicHermiteSpline(r, antiderivative, _chi0(r))


def cutoff_chi(s: Union[float, np.ndarray], derivative: int = 0) -> Union[float, np.ndarray]:
    """Smooth cutoff: 1 on [-1, 1], 0 outside (-2, 2), and its first two derivatives."""
    total, antiderivative = _cutoff_profile()
    scalar = np.ndim(s) == 0
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    r = np.abs(s_arr)
    mid = (r > 1.0) & (r < 2.0)
    if derivative == 0:
        out = np.where(r <= 1.0, 1.0, 0.0)
        out[mid] = 1.0 - antiderivative(r[mid]) / total
    elif derivative == 1:
        out = np.zeros_like(r)
        out[mid] = -np.sign(s_arr[mid]) * _chi0(r[mid]) / total
    elif derivative == 2:
        out = np.zeros_like(r)
        out[mid] = -_dchi0(r[mid]) / total
    else:
        raise ValueError('Only derivatives up to order 2 are provided.')
    return float(out[0]) if scalar else out


# nonlinearities

class Nonlinearity:
    """phi(t, eta, xi) with the partials the contraction constants need."""

    def __init__(self, phi: Expression, params: Optional[Mapping[str, float]] = None):
        missing = set(TRANSPORT_VARIABLES) - set(phi.variables)
        if missing:
            raise ConfigError(f'Transport nonlinearities need the variables t, eta, xi; missing {sorted(missing)}.')
        self.phi = phi
        self.params = dict(params or {})
        d_xi = phi.differentiate('xi')
        d_eta = phi.differentiate('eta')
        self.partials: dict[Partial, Expression] = {
            'value': phi,
            'eta': d_eta,
            'xi': d_xi,
            'eta_xi': d_eta.differentiate('xi'),
            'xi_xi': d_xi.differentiate('xi'),
        }

    def jet(self, which: Partial, t: np.ndarray, eta: np.ndarray, xi: np.ndarray) -> np.ndarray:
        value = self.partials[which].eval({**self.params, 't': t, 'eta': eta, 'xi': xi})
        return np.broadcast_to(np.asarray(value, dtype=float), np.broadcast_shapes(np.shape(t), np.shape(eta), np.shape(xi)))

    def __call__(self, t: np.ndarray, eta: np.ndarray, xi: np.ndarray) -> np.ndarray:
        return self.jet('value', t, eta, xi)

    def __str__(self) -> str:
        return str(self.phi)


class CutoffNonlinearity(Nonlinearity):
    """chi(xi / B) * phi(t, eta, xi), with exact product-rule partials."""

    def __init__(self, base: Nonlinearity, level: float):
        if not level > 0:
            raise ConfigError('Cutoff level must be positive.')
        self.base = base
        self.level = level
        self.phi = base.phi
        self.params = base.params
        self.partials = base.partials

    def jet(self, which: Partial, t: np.ndarray, eta: np.ndarray, xi: np.ndarray) -> np.ndarray:
        B = self.level
        s = np.asarray(xi, dtype=float) / B
        chi = cutoff_chi(s)
        if which == 'value':
            return chi * self.base.jet('value', t, eta, xi)
        if which == 'eta':
            return chi * self.base.jet('eta', t, eta, xi)
        d1 = cutoff_chi(s, 1) / B
        if which == 'xi':
            return d1 * self.base.jet('value', t, eta, xi) + chi * self.base.jet('xi', t, eta, xi)
        if which == 'eta_xi':
            return d1 * self.base.jet('eta', t, eta, xi) + chi * self.base.jet('eta_xi', t, eta, xi)
        d2 = cutoff_chi(s, 2) / B ** 2
        return (d2 * self.base.jet('value', t, eta, xi) + 2.0 * d1 * self.base.jet('xi', t, eta, xi)
                + chi * self.base.jet('xi_xi', t, eta, xi))

    def __str__(self) -> str:
        return f'chi(xi/{self.level:.17g}) * ({self.phi})'


def as_nonlinearity(phi: Union[Expression, Nonlinearity], params: Optional[Mapping[str, float]] = None) -> Nonlinearity:
    return phi if isinstance(phi, Nonlinearity) else Nonlinearity(phi, params)


def _jet_on(nl: Nonlinearity, which: Partial, t: np.ndarray, eta: np.ndarray, xi: np.ndarray) -> np.ndarray:
    try:
        return nl.jet(which, t, eta, xi)
    except DomainError as e:
        shape = np.broadcast_shapes(np.shape(t), np.shape(eta), np.shape(xi))
        mask = np.broadcast_to(np.asarray(e.mask if e.mask is not None else True), shape)
        index = np.unravel_index(int(np.argmax(mask)), shape)
        pick: Callable[[np.ndarray], float] = lambda a: float(np.broadcast_to(a, shape)[index])
        raise e.at(t=pick(t), eta=pick(eta), xi=pick(xi)) from e


# problem and configuration

@dataclass(frozen=True, eq=False)
class TransportProblem:
    """y0 on [0, 1] (periodic), phi in (t, eta, xi), final time T."""
    y0: GridFn1D
    phi: Expression
    T: float
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if abs(self.y0.a) > 1e-12 or abs(self.y0.b - 1.0) > 1e-12:
            raise GridError('Transport data y0 must live on [0, 1].')
        if not self.T > 0:
            raise ConfigError('Final time T must be positive.')
        as_nonlinearity(self.phi)

    @property
    def n_theta(self) -> int:
        return self.y0.n

    @property
    def grid(self) -> CylGrid:
        return CylGrid.aligned(self.T, self.n_theta)

    def with_horizon(self, T: float) -> 'TransportProblem':
        return replace(self, T=T)


@dataclass(frozen=True)
class PicardConfig:
    tolerance: float = field(default_factory=lambda: lab_settings.PICARD_TOLERANCE)
    max_iterations: int = field(default_factory=lambda: lab_settings.PICARD_MAX_ITERATIONS)
    xi_window: Union[float, Literal['auto']] = 'auto'
    cutoff: Union[bool, Literal['auto']] = 'auto'
    step_policy: StepPolicy = field(default_factory=lambda: lab_settings.STEP_POLICY)
    steps: Optional[int] = None
    safety: float = field(default_factory=lambda: lab_settings.SAFETY_FACTOR)
    quadrature: Quadrature = field(default_factory=lambda: lab_settings.QUADRATURE)
    stencil_order: int = field(default_factory=lambda: lab_settings.STENCIL_ORDER)
    initial: Union[None, float, CylFn] = None

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ConfigError('Fixed-point tolerance must be positive.')
        if self.max_iterations < 1:
            raise ConfigError('At least one Picard iteration is required.')
        if self.xi_window != 'auto' and not float(self.xi_window) > 0:
            raise ConfigError('A manual xi-window must be positive.')
        if self.step_policy not in ('fixed', 'lemma-c'):
            raise ConfigError(f'Unknown step policy {self.step_policy!r}.')
        if self.steps is not None and self.steps < 1:
            raise ConfigError('Fixed step count must be positive.')
        if self.quadrature not in ('trapezoid', 'simpson'):
            raise ConfigError(f'Unknown quadrature {self.quadrature!r}.')
        if not self.safety >= 1.0:
            raise ConfigError('Safety factor must be at least 1.')


@dataclass(frozen=True)
class ContractionConstants:
    M0: float
    M1: float
    M: float
    R: float
    L: float
    alpha: float
    A: float
    xi_window: float


@dataclass(frozen=True)
class StepRecord:
    t0: float
    t2: float
    A: float
    M: float
    R: float
    L: float
    alpha: float
    xi_window: float
    cutoff_level: Optional[float]
    iterations: int
    ratios: tuple[float, ...]

    @property
    def ratio(self) -> float:
        return max(self.ratios) if self.ratios else 0.0


@dataclass(frozen=True, eq=False)
class SolveReport:
    solution: CylFn
    steps: tuple[StepRecord, ...]
    residual: float
    regular: bool
    blowup_estimate: Optional[float] = None

    @property
    def max_alpha(self) -> float:
        return max((s.alpha for s in self.steps), default=0.0)

    @property
    def max_ratio(self) -> float:
        return max((s.ratio for s in self.steps), default=0.0)

    @property
    def iterations(self) -> int:
        return sum(s.iterations for s in self.steps)


@dataclass(frozen=True, eq=False)
class PicardResult:
    z: CylFn
    iterations: int
    ratios: tuple[float, ...]


# characteristics

def _characteristic_cumulative(g: np.ndarray, dt: float, quadrature: Quadrature) -> np.ndarray:
    """c[k, m] = integral from row 0 to row k along the characteristic through (k, m)."""
    rows = np.arange(g.shape[0])[:, None]
    cols = np.arange(g.shape[1])[None, :]
    n = g.shape[1]
    unsheared = np.take_along_axis(g, (cols + rows) % n, axis=1)
    if quadrature == 'simpson' and g.shape[0] >= 3:
        c = cumulative_simpson(unsheared, dx=dt, axis=0, initial=0.0)
    else:
        c = cumulative_trapezoid(unsheared, dx=dt, axis=0, initial=0.0)
    return np.take_along_axis(c, (cols - rows) % n, axis=1)


def _transport_rows(row: np.ndarray, count: int) -> np.ndarray:
    """Rows j = 0..count-1 of a slice carried along the characteristics: out[j, m] = row[m - j]."""
    n = row.size
    idx = (np.arange(n)[None, :] - np.arange(count)[:, None]) % n
    return row[idx]


def bar_y0(y0: GridFn1D, grid: CylGrid) -> CylFn:
    """bar_y0(t, eta) = y0(eta - t), exact on an aligned grid."""
    grid.require_aligned()
    if y0.n != grid.n_theta or abs(y0.a) > 1e-12 or abs(y0.b - 1.0) > 1e-12:
        raise GridError(f'y0 needs {grid.n_theta} cells on [0, 1]; got {y0.n} on [{y0.a}, {y0.b}].')
    shift = int(round(grid.t0 / grid.dt))
    row = np.roll(y0.periodic_values(), shift)
    return CylFn(grid, _transport_rows(row, grid.n_t + 1))


def char_integral(a: float, z: CylFn, quadrature: Optional[Quadrature] = None) -> CylFn:
    """I(a, z)(t, eta) = integral from a to t of z(tau, eta - t + tau); signed for t < a."""
    z.grid.require_aligned()
    ka = z.grid.node_index(a)
    c = _characteristic_cumulative(z.values, z.grid.dt, quadrature or lab_settings.QUADRATURE)
    if ka:
        # subtract the value at row ka on the same characteristic
        n = z.grid.n_theta
        rows = np.arange(z.grid.n_t + 1)[:, None]
        cols = np.arange(n)[None, :]
        at_a = c[ka][(cols - rows + ka) % n]
        c = c - at_a
    return CylFn(z.grid, c)


# constants

def _sample(nl: Nonlinearity, which: Partial, times: np.ndarray, etas: np.ndarray, xis: np.ndarray) -> float:
    values = _jet_on(nl, which, times[:, None, None], etas[None, :, None], xis[None, None, :])
    if not np.all(np.isfinite(values)):
        raise DomainError('Non-finite sample of the nonlinearity.', node=str(nl))
    return float(np.max(np.abs(values)))


def _sample_axes(window: tuple[float, float], xi_window: float, n_theta: Optional[int]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    t0, t2 = window
    times = np.linspace(t0, t2, 3) if t2 > t0 else np.array([t0])
    n_eta = min(lab_settings.ETA_SAMPLES, n_theta or lab_settings.ETA_SAMPLES)
    etas = np.arange(n_eta) / n_eta
    xis = np.linspace(-xi_window, xi_window, lab_settings.XI_SAMPLES)
    return times, etas, xis


def constants(phi: Union[Expression, Nonlinearity], window: tuple[float, float], A: float, xi_window: float,
              t1: float = 0.0, safety: Optional[float] = None, n_theta: Optional[int] = None) -> ContractionConstants:
    """Sampled suprema of phi and its partials on the window times [-xi_window, xi_window].

    M0 bounds |phi(., ., 0)| and |d_xi phi|, M1 adds |d_eta phi|, and M bounds
    |d_xi phi|, |d_eta d_xi phi| and |d_xi^2 phi|; all are inflated by `safety`.
    R = 4(1 + A)(1 + M t1 e^(M t1)), L = min(t2 - t0, 1 / (3 M R)), alpha = L M (2 + R).
    """
    nl = as_nonlinearity(phi)
    safety = lab_settings.SAFETY_FACTOR if safety is None else safety
    t0, t2 = window
    if t2 < t0:
        raise GridError('Window end precedes its start.')
    times, etas, xis = _sample_axes(window, xi_window, n_theta)
    at_zero = _sample(nl, 'value', times, etas, np.zeros(1))
    d_xi = _sample(nl, 'xi', times, etas, xis)
    d_eta = _sample(nl, 'eta', times, etas, xis)
    d_eta_xi = _sample(nl, 'eta_xi', times, etas, xis)
    d_xi_xi = _sample(nl, 'xi_xi', times, etas, xis)
    M0 = safety * max(at_zero, d_xi)
    M1 = safety * max(at_zero, d_eta, d_xi)
    M = safety * max(d_xi, d_eta_xi, d_xi_xi)
    R = 4.0 * (1.0 + A) * (1.0 + M * t1 * math.exp(M * t1))
    length = t2 - t0
    L = min(length, 1.0 / (3.0 * M * R)) if M > 0 else length
    return ContractionConstants(M0=M0, M1=M1, M=M, R=R, L=L, alpha=L * M * (2.0 + R), A=A, xi_window=xi_window)


def _cutoff_needed(nl: Nonlinearity, window: tuple[float, float], xi_window: float, n_theta: int) -> bool:
    times, etas, xis = _sample_axes(window, xi_window, n_theta)
    inner = _sample(nl, 'xi', times, etas, xis)
    outer = _sample(nl, 'xi', times, etas, 2.0 * xis)
    return outer > inner * (1.0 + 1e-9) + 1e-300


@dataclass(frozen=True)
class _WindowPlan:
    constants: ContractionConstants
    nonlinearity: Nonlinearity
    cutoff_level: Optional[float]


def _plan(nl: Nonlinearity, slice_: np.ndarray, window: tuple[float, float], config: PicardConfig) -> _WindowPlan:
    n_theta = slice_.size
    A = periodic_c0i_norm(slice_, 1, config.stencil_order)
    if config.xi_window == 'auto':
        boot = constants(nl, window, A, 2.0 * (1.0 + A), safety=config.safety, n_theta=n_theta)
        level = (1.0 + A) * math.exp(boot.M0 * boot.L)
        xi_window = 2.0 * level
    else:
        xi_window = float(config.xi_window)
        level = xi_window / 2.0
    use_cutoff = config.cutoff if isinstance(config.cutoff, bool) else _cutoff_needed(nl, window, xi_window, n_theta)
    active = CutoffNonlinearity(nl, level) if use_cutoff else nl
    return _WindowPlan(constants(active, window, A, xi_window, safety=config.safety, n_theta=n_theta),
                       active, level if use_cutoff else None)


# Picard iteration

def _iterate(base: np.ndarray, integrand: Callable[[np.ndarray], np.ndarray], dt: float, config: PicardConfig,
             initial: Optional[np.ndarray] = None, where: str = '') -> tuple[np.ndarray, int, tuple[float, ...]]:
    """Fixed point of z -> base + cumulative characteristic integral of integrand(z)."""
    z = base if initial is None else initial
    ratios: list[float] = []
    previous: Optional[float] = None
    for iteration in range(1, config.max_iterations + 1):
        z_next = base + _characteristic_cumulative(integrand(z), dt, config.quadrature)
        if not np.all(np.isfinite(z_next)):
            raise ConvergenceError(f'Picard iterates left the finite range{where}.')
        update = float(np.max(np.abs(z_next - z)))
        scale = max(1.0, float(np.max(np.abs(z_next))))
        floor = _RATIO_FLOOR * scale
        if previous is not None and previous > floor and update > floor:
            ratios.append(update / previous)
        previous = update
        z = z_next
        if update <= config.tolerance * scale:
            return z, iteration, tuple(ratios)
    raise ConvergenceError(f'No Picard convergence in {config.max_iterations} iterations{where}.')


def picard_step(z0: CylFn, phi: Union[Expression, Nonlinearity], config: Optional[PicardConfig] = None) -> PicardResult:
    """Fixed point of z -> z0 + I(t0, phi o [id, z]) on the window grid of `z0`."""
    config = config or PicardConfig()
    z0.grid.require_aligned()
    nl = as_nonlinearity(phi)
    t = z0.grid.times[:, None]
    eta = z0.grid.thetas[None, :]
    initial = _initial_rows(config.initial, z0.grid, 0, z0.grid.n_t)
    z, iterations, ratios = _iterate(z0.values, lambda z: _jet_on(nl, 'value', t, eta, z), z0.grid.dt, config,
                                     initial, f' on [{z0.grid.t0:.6g}, {z0.T:.6g}]')
    return PicardResult(CylFn(z0.grid, z), iterations, ratios)


def _initial_rows(initial: Union[None, float, CylFn], grid: CylGrid, k0: int, k1: int) -> Optional[np.ndarray]:
    if initial is None:
        return None
    if isinstance(initial, CylFn):
        if initial.grid.n_theta != grid.n_theta or initial.grid.n_t < k1:
            raise GridError('Initial iterate does not cover the solve grid.')
        return np.array(initial.values[k0:k1 + 1])
    return np.full((k1 - k0 + 1, grid.n_theta), float(initial))


def _fixed_windows(n_t: int, steps: Optional[int]) -> list[int]:
    if steps is None or steps >= n_t:
        return list(range(n_t + 1))
    return sorted(set(int(round(b)) for b in np.linspace(0, n_t, steps + 1)))


def _blowup_estimate(values: np.ndarray, last: int, dt: float) -> float:
    if last < 1:
        return math.inf
    sup = np.max(np.abs(values[:last + 1]), axis=1)
    growth = (sup[last] - sup[last - 1]) / dt
    if growth <= 0:
        return math.inf
    return last * dt + sup[last] / growth


def solve(problem: TransportProblem, config: Optional[PicardConfig] = None) -> SolveReport:
    """March y = bar_y0 + I(0, phi o [id, y]) over [0, T] window by window.

    Raises `StagnationError` (with the partial report) when the admissible
    step under the "lemma-c" policy drops below one time cell.
    """
    config = config or PicardConfig()
    grid = problem.grid
    nl = as_nonlinearity(problem.phi, problem.params)
    dt = grid.dt
    values = np.empty(grid.shape)
    values[0] = problem.y0.periodic_values()
    thetas = grid.thetas[None, :]
    times = grid.times
    fixed = _fixed_windows(grid.n_t, config.steps) if config.step_policy == 'fixed' else None
    records: list[StepRecord] = []
    k0 = 0
    while k0 < grid.n_t:
        t0 = float(times[k0])
        if fixed is not None:
            k1 = next(b for b in fixed if b > k0)
            plan = _plan(nl, values[k0], (t0, float(times[k1])), config)
            c = plan.constants
        else:
            plan = _plan(nl, values[k0], (t0, problem.T), config)
            c = plan.constants
            cells = int(math.floor(c.L / dt + 1e-9))
            if cells < 1:
                estimate = _blowup_estimate(values, k0, dt)
                logger.warning('Step stagnated at t=%.6g: L=%.3g below dt=%.3g; blow-up near t=%.6g', t0, c.L, dt, estimate)
                partial = None
                if k0 >= 1:
                    partial = _report(CylFn(grid.window(0, k0), values[:k0 + 1]), records, problem, nl, config)
                raise StagnationError(f'Step length {c.L:.3g} fell below one time cell at t={t0:.6g}.',
                                      report=partial, blowup_estimate=estimate)
            k1 = min(k0 + cells, grid.n_t)
        t = times[k0:k1 + 1, None]
        base = _transport_rows(values[k0], k1 - k0 + 1)
        active = plan.nonlinearity
        z, iterations, ratios = _iterate(base, lambda z: _jet_on(active, 'value', t, thetas, z), dt, config,
                                         _initial_rows(config.initial, grid, k0, k1),
                                         f' on [{t0:.6g}, {times[k1]:.6g}]')
        values[k0:k1 + 1] = z
        records.append(StepRecord(t0=t0, t2=float(times[k1]), A=c.A, M=c.M, R=c.R, L=c.L, alpha=c.alpha,
                                  xi_window=c.xi_window, cutoff_level=plan.cutoff_level, iterations=iterations,
                                  ratios=ratios))
        logger.debug('window [%.6g, %.6g]: A=%.4g M=%.4g alpha=%.4g iterations=%d',
                     t0, times[k1], c.A, c.M, c.alpha, iterations)
        k0 = k1
    return _report(CylFn(grid, values), records, problem, nl, config)


def _report(solution: CylFn, records: Sequence[StepRecord], problem: TransportProblem, nl: Nonlinearity,
            config: PicardConfig) -> SolveReport:
    return SolveReport(solution=solution, steps=tuple(records), residual=residual(solution, problem, config.stencil_order),
                       regular=_is_regular(solution, nl, config))


def _is_regular(y: CylFn, nl: Nonlinearity, config: PicardConfig) -> bool:
    t, eta = y.grid.mesh()
    try:
        a = CylFn(y.grid, _jet_on(nl, 'xi', t, eta, y.values))
        u = linearized_solve(a, CylFn.constant(y.grid, 1.0), replace(config, initial=None))
    except (ConvergenceError, DomainError, GridError) as e:
        logger.warning('Linearization at the solution failed: %s', e)
        return False
    return bool(np.all(np.isfinite(u.values)))


# linearized equation

def linearized_solve(a: CylFn, v: CylFn, config: Optional[PicardConfig] = None) -> CylFn:
    """u = v + I(t0, a u) by Picard on windows no longer than 1 / (12 sup|a|)."""
    config = config or PicardConfig()
    a.check_same_grid(v)
    grid = v.grid
    grid.require_aligned()
    sup_a = a.sup_norm()
    cells = grid.n_t if sup_a == 0 else max(1, int(math.floor(1.0 / (12.0 * sup_a) / grid.dt + 1e-9)))
    values = np.empty(grid.shape)
    values[0] = v.values[0]
    k0 = 0
    while k0 < grid.n_t:
        k1 = min(k0 + cells, grid.n_t)
        base = v.values[k0:k1 + 1] + _transport_rows(values[k0] - v.values[k0], k1 - k0 + 1)
        coefficient = a.values[k0:k1 + 1]
        z, _, _ = _iterate(base, lambda z: coefficient * z, grid.dt, config,
                           _initial_rows(config.initial, grid, k0, k1), ' in the linearized solve')
        values[k0:k1 + 1] = z
        k0 = k1
    return CylFn(grid, values)


# diagnostics

def residual(y: CylFn, problem: TransportProblem, order: Optional[int] = None) -> float:
    """sup |dy/dt + dy/deta - phi(t, eta, y)| over all grid rows."""
    order = order or lab_settings.STENCIL_ORDER
    if y.grid.n_t < order:
        order = 2
    if y.grid.n_t < 2:
        return math.nan
    lhs = d_time(y, order).values + d_theta(y, 1, order).values
    return float(np.max(np.abs(lhs - compose(problem.phi, y, problem.params).values)))


def apriori_bound(v: CylFn, phi: Union[Expression, Nonlinearity], y: CylFn, i: Literal[0, 1] = 0,
                  safety: Optional[float] = None) -> float:
    """(1 + |v|_i) e^(L M_i) - 1 with M_i sampled over the range of y."""
    if i not in (0, 1):
        raise ConfigError('The a-priori bound is available for levels 0 and 1.')
    window = (y.grid.t0, y.T)
    c = constants(phi, window, 0.0, max(y.sup_norm(), 1e-12), safety=safety, n_theta=y.grid.n_theta)
    M_i = c.M0 if i == 0 else c.M1
    return (1.0 + c0i_norm(v, i)) * math.exp((window[1] - window[0]) * M_i) - 1.0


def apriori_check(v: CylFn, phi: Union[Expression, Nonlinearity], y: CylFn, i: Literal[0, 1] = 0,
                  safety: Optional[float] = None) -> float:
    """Margin of the a-priori bound over |y|_i; nonnegative up to discretization slack."""
    return apriori_bound(v, phi, y, i, safety) - c0i_norm(y, i)


@dataclass(frozen=True)
class LipschitzProbe:
    lhs: float
    rhs: float

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs


def lipschitz_check(phi: Union[Expression, Nonlinearity], u: CylFn, v: CylFn, safety: Optional[float] = None,
                    quadrature: Optional[Quadrature] = None) -> LipschitzProbe:
    """Compare |I(t0, phi o u) - I(t0, phi o v)|_1 with L M (2 + R) |u - v|_1 on the grid of u."""
    u.check_same_grid(v)
    nl = as_nonlinearity(phi)
    grid = u.grid
    radius = max(c0i_norm(u, 1), c0i_norm(v, 1))
    c = constants(nl, (grid.t0, grid.T), 0.0, max(u.sup_norm(), v.sup_norm(), 1e-12), safety=safety,
                  n_theta=grid.n_theta)
    t, eta = grid.mesh()
    gu = CylFn(grid, _jet_on(nl, 'value', t, eta, u.values))
    gv = CylFn(grid, _jet_on(nl, 'value', t, eta, v.values))
    lhs = c0i_norm(char_integral(grid.t0, gu, quadrature) - char_integral(grid.t0, gv, quadrature), 1)
    rhs = (grid.T - grid.t0) * c.M * (2.0 + radius) * c0i_norm(u - v, 1)
    return LipschitzProbe(lhs=lhs, rhs=rhs)


def uniqueness_probe(problem: TransportProblem, config: Optional[PicardConfig],
                     z_init1: Union[float, CylFn], z_init2: Union[float, CylFn]) -> float:
    """Sup distance between the solutions reached from two initial iterates."""
    config = config or PicardConfig()
    first = solve(problem, replace(config, initial=z_init1)).solution
    second = solve(problem, replace(config, initial=z_init2)).solution
    return float(np.max(np.abs(first.values - second.values)))
