"""
Two-point boundary value problem y'' = phi(s, y, y'), y(0) = eta0, y(1) = eta1.

Newton iterates on the fixed-point form f0(w) = w - ell(phi o [id; w + eta_bar, w' + eta_bar'])
where ell is the Green operator of y'' with zero boundary values. Regularity
at a solution means unique solvability of u'' - p3 u' - p2 u = rhs, assembled
with order-2 central differences on the interior nodes.
"""
import logging
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Mapping, Optional, Sequence, TypedDict

import numpy as np
import scipy.linalg
from scipy.integrate import cumulative_simpson, simpson

from drfutils.pool import fan_out

from .conf import lab_settings
from .exceptions import (ConfigError, ConvergenceError, SingularSystemError)
from .expr import Expression
from .function_core import GridFn1D, compose_jet

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class BVProblem:
    eta0: float
    eta1: float
    phi: Expression
    n: int = 200
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.n < 16:
            raise ConfigError('The BVP needs at least 16 interior nodes.')
        if not {'xi1', 'xi2'} <= set(self.phi.variables):
            raise ConfigError('BVP nonlinearities are expressions in (s, xi1, xi2).')

    @property
    def h(self) -> float:
        return 1.0 / (self.n + 1)

    def perturbed(self, d_eta0: float, d_eta1: float, psi: Optional[Expression], eps: float) -> 'BVProblem':
        phi = self.phi if psi is None or eps == 0 else self.phi + eps * psi
        return replace(self, eta0=self.eta0 + eps * d_eta0, eta1=self.eta1 + eps * d_eta1, phi=phi)


def _nodes(n: int) -> np.ndarray:
    return np.linspace(0.0, 1.0, n + 2)


@lru_cache(maxsize=8)
def _ell_matrix(n: int) -> np.ndarray:
    """ell applied to the unit vectors of the n + 2 node grid."""
    s = _nodes(n)
    z2 = cumulative_simpson(cumulative_simpson(np.eye(n + 2), x=s, axis=0, initial=0.0), x=s, axis=0, initial=0.0)
    ell = z2 - np.outer(s, z2[-1])
    ell[0] = 0.0
    ell[-1] = 0.0
    ell.setflags(write=False)
    return ell


@lru_cache(maxsize=8)
def _first_derivative_matrix(n: int) -> np.ndarray:
    """Order-2 differences on all n + 2 nodes, one-sided at the ends."""
    h = 1.0 / (n + 1)
    d = np.zeros((n + 2, n + 2))
    idx = np.arange(1, n + 1)
    d[idx, idx - 1] = -0.5 / h
    d[idx, idx + 1] = 0.5 / h
    d[0, :3] = np.array([-3.0, 4.0, -1.0]) / (2.0 * h)
    d[-1, -3:] = np.array([1.0, -4.0, 3.0]) / (2.0 * h)
    d.setflags(write=False)
    return d


def green_ell(z: GridFn1D) -> GridFn1D:
    """y = z2 - z2(1) s with z2 the double Simpson integral of z; y(0) = y(1) = 0 exactly."""
    s = z.nodes
    z2 = cumulative_simpson(cumulative_simpson(z.values, x=s, initial=0.0), x=s, initial=0.0)
    y = z2 - z2[-1] * s
    y[0] = 0.0
    y[-1] = 0.0
    return GridFn1D(z.a, z.b, y)


def eta_bar(eta0: float, eta1: float, n: int) -> GridFn1D:
    """Affine interpolant of the boundary values on the n + 2 node grid."""
    s = _nodes(n)
    return GridFn1D(0.0, 1.0, eta0 + (eta1 - eta0) * s)


@dataclass(frozen=True, eq=False)
class LinearizedBVP:
    """u -> u'' - p3 u' - p2 u on the interior nodes with zero boundary values."""
    p2: GridFn1D
    p3: GridFn1D
    matrix: np.ndarray
    sigma_min: float
    sigma_next: float
    norm: float

    @property
    def condition(self) -> float:
        return self.norm / self.sigma_min if self.sigma_min > 0 else float('inf')

    @property
    def regular(self) -> bool:
        return not _rank_deficient(self.sigma_min, self.sigma_next, self.norm)


def _rank_deficient(sigma_min: float, sigma_next: float, norm: float) -> bool:
    """Whether sigma_min is negligible against the norm or isolated below the rest of the spectrum."""
    return (sigma_min <= lab_settings.SINGULARITY_THRESHOLD * norm
            or sigma_min <= lab_settings.SPECTRAL_GAP * sigma_next)


def _operator(p2: np.ndarray, p3: np.ndarray, h: float) -> np.ndarray:
    n = p2.size
    main = -2.0 / h ** 2 - p2
    lower = 1.0 / h ** 2 + p3[1:] / (2.0 * h)
    upper = 1.0 / h ** 2 - p3[:-1] / (2.0 * h)
    return np.diag(main) + np.diag(lower, -1) + np.diag(upper, 1) if n > 1 else np.diag(main)


def assemble_linearized(p2: GridFn1D, p3: GridFn1D) -> LinearizedBVP:
    p2.check_same_grid(p3)
    matrix = _operator(p2.values[1:-1], p3.values[1:-1], p2.h)
    sigma = scipy.linalg.svdvals(matrix)
    return LinearizedBVP(p2=p2, p3=p3, matrix=matrix, sigma_min=float(sigma[-1]),
                         sigma_next=float(sigma[-2 if sigma.size > 1 else 0]), norm=float(sigma[0]))


def linearized_bvp_solve(p2: GridFn1D, p3: GridFn1D, rhs: GridFn1D) -> GridFn1D:
    """Zero-boundary u with u'' - p3 u' - p2 u = rhs at the interior nodes."""
    rhs.check_same_grid(p2)
    operator = assemble_linearized(p2, p3)
    if not operator.regular:
        raise SingularSystemError(f'Linearized operator is singular: sigma_min = {operator.sigma_min:.3g}, '
                                  f'norm = {operator.norm:.3g}.', sigma_min=operator.sigma_min)
    b = rhs.values[1:-1]
    interior = scipy.linalg.lu_solve(scipy.linalg.lu_factor(operator.matrix), b)
    mismatch = float(np.max(np.abs(operator.matrix @ interior - b)))
    if mismatch > 1e-8 * max(1.0, float(np.max(np.abs(b)))):
        logger.warning('Linearized BVP residual %.3g is large (condition %.3g)', mismatch, operator.condition)
    return GridFn1D(0.0, 1.0, np.concatenate([[0.0], interior, [0.0]]))


class NewtonReport(TypedDict):
    steps: int
    residuals: list[float]
    quadratic_rates: list[float]
    regular: bool
    sigma_min: float
    condition: float


def _jets(problem: BVProblem, y: np.ndarray) -> tuple[GridFn1D, GridFn1D, np.ndarray]:
    grid_y = GridFn1D(0.0, 1.0, y)
    dy = GridFn1D(0.0, 1.0, _first_derivative_matrix(problem.n) @ y)
    return grid_y, dy, compose_jet(problem.phi, grid_y, dy, problem.params).values


def _partials(problem: BVProblem, y: GridFn1D, dy: GridFn1D) -> tuple[GridFn1D, GridFn1D]:
    p2 = compose_jet(problem.phi.differentiate('xi1'), y, dy, problem.params)
    p3 = compose_jet(problem.phi.differentiate('xi2'), y, dy, problem.params)
    return p2, p3


def newton_solve(problem: BVProblem, init: Optional[GridFn1D] = None, tolerance: Optional[float] = None,
                 max_steps: Optional[int] = None) -> tuple[GridFn1D, NewtonReport]:
    """Damped Newton on f0; returns eta_bar + w and the convergence report.

    `init` is the zero-boundary increment w (default 0).
    """
    tolerance = lab_settings.NEWTON_TOLERANCE if tolerance is None else tolerance
    max_steps = max_steps or lab_settings.NEWTON_MAX_STEPS
    n = problem.n
    ell = _ell_matrix(n)
    d1 = _first_derivative_matrix(n)
    base = eta_bar(problem.eta0, problem.eta1, n).values
    w = np.zeros(n + 2) if init is None else np.array(init.values, dtype=float)
    if w.size != n + 2:
        raise ConfigError(f'Initial increment needs {n + 2} nodes.')
    w[0] = w[-1] = 0.0

    def f0(w: np.ndarray) -> np.ndarray:
        return w - ell @ _jets(problem, w + base)[2]

    residuals: list[float] = []
    F = f0(w)
    error = float(np.max(np.abs(F)))
    residuals.append(error)
    steps = 0
    while error > tolerance:
        if steps >= max_steps:
            raise ConvergenceError(f'Newton did not converge in {max_steps} steps (|f0| = {error:.3g}).')
        y, dy, _ = _jets(problem, w + base)
        p2, p3 = _partials(problem, y, dy)
        jacobian = np.eye(n + 2) - ell @ (p3.values[:, None] * d1 + np.diag(p2.values))
        lu, piv = scipy.linalg.lu_factor(jacobian[1:-1, 1:-1], check_finite=True)
        if np.any(np.diag(lu) == 0.0):
            raise SingularSystemError('Newton linearization is singular.', sigma_min=0.0)
        du = np.zeros(n + 2)
        du[1:-1] = scipy.linalg.lu_solve((lu, piv), -F[1:-1])
        step = 1.0
        for _ in range(lab_settings.NEWTON_MAX_HALVINGS + 1):
            trial = w + step * du
            F_trial = f0(trial)
            error_trial = float(np.max(np.abs(F_trial)))
            if error_trial < error:
                break
            step /= 2.0
        else:
            raise ConvergenceError(f'Line search failed after {lab_settings.NEWTON_MAX_HALVINGS} halvings.')
        w, F, error = trial, F_trial, error_trial
        residuals.append(error)
        steps += 1
        logger.debug('Newton step %d: |f0| = %.3g, damping %.3g', steps, error, step)
    y, dy, _ = _jets(problem, w + base)
    p2, p3 = _partials(problem, y, dy)
    operator = assemble_linearized(p2, p3)
    if not operator.regular:
        logger.warning('Linearization at the solution is near-singular: sigma_min = %.3g', operator.sigma_min)
    rates = [residuals[k + 1] / residuals[k] ** 2 for k in range(len(residuals) - 1)
             if residuals[k] <= 1e-3 and residuals[k] > 0]
    report = NewtonReport(steps=steps, residuals=residuals, quadratic_rates=rates, regular=operator.regular,
                          sigma_min=operator.sigma_min, condition=operator.condition)
    return y, report


def variation_rhs(problem: BVProblem, y: GridFn1D, d_eta0: float, d_eta1: float,
                  psi: Optional[Expression]) -> tuple[GridFn1D, GridFn1D, GridFn1D, GridFn1D]:
    """p2, p3, the shift d_eta_bar and the right-hand side of the variation at a solution y.

    The variation is d_eta_bar + w with w'' - p3 w' - p2 w = psi o [id; y, y'] + p2 d_eta_bar + p3 d_eta_bar'.
    """
    dy = GridFn1D(0.0, 1.0, _first_derivative_matrix(problem.n) @ y.values)
    p2, p3 = _partials(problem, y, dy)
    shift = eta_bar(d_eta0, d_eta1, problem.n)
    rhs = p2.values * shift.values + p3.values * (d_eta1 - d_eta0)
    if psi is not None and not psi.is_zero:
        rhs = rhs + compose_jet(psi, y, dy, problem.params).values
    return p2, p3, shift, GridFn1D(0.0, 1.0, rhs)


def linearized_variation(problem: BVProblem, y: GridFn1D, d_eta0: float, d_eta1: float,
                         psi: Optional[Expression]) -> GridFn1D:
    p2, p3, shift, rhs = variation_rhs(problem, y, d_eta0, d_eta1, psi)
    return shift + linearized_bvp_solve(p2, p3, rhs)


# resonance

def _sigma_min(matrix: np.ndarray, start: np.ndarray, iterations: int = 100) -> float:
    """Smallest singular value by inverse iteration on the normal operator."""
    try:
        lu, piv = scipy.linalg.lu_factor(matrix)
    except (ValueError, np.linalg.LinAlgError):
        return 0.0
    if np.any(np.diag(lu) == 0.0):
        return 0.0
    x = start / np.linalg.norm(start)
    estimate = np.inf
    for _ in range(iterations):
        # (A^T A)^{-1} x = A^{-1} A^{-T} x
        y = scipy.linalg.lu_solve((lu, piv), scipy.linalg.lu_solve((lu, piv), x, trans=1))
        norm = np.linalg.norm(y)
        if not np.isfinite(norm) or norm == 0.0:
            return 0.0
        x = y / norm
        previous, estimate = estimate, 1.0 / np.sqrt(norm)
        if abs(previous - estimate) <= 1e-12 * estimate:
            break
    return float(estimate)


class ScanPoint(TypedDict):
    r: float
    sigma_min: float


def resonance_scan(r_min: float, r_max: float, steps: int, n: int = 200, jobs: int = 1) -> list[ScanPoint]:
    """sigma_min of u -> u'' - r u over `steps` equispaced r in [r_min, r_max]."""
    if steps <= 0 or r_max < r_min:
        return []
    h = 1.0 / (n + 1)
    start = np.random.default_rng(0).standard_normal(n)
    rs = np.linspace(r_min, r_max, steps) if steps > 1 else np.array([r_min])

    def point(r: float) -> ScanPoint:
        matrix = _operator(np.full(n, r), np.zeros(n), h)
        return ScanPoint(r=float(r), sigma_min=_sigma_min(matrix, start))

    return fan_out([lambda r=r: point(r) for r in rs], jobs)


def resonance_dips(scan: Sequence[ScanPoint], fraction: Optional[float] = None) -> list[ScanPoint]:
    """Interior local minima of sigma_min below `fraction` of the scan maximum."""
    fraction = lab_settings.RESONANCE_DIP_FRACTION if fraction is None else fraction
    if len(scan) < 3:
        return []
    sigma = np.array([p['sigma_min'] for p in scan])
    threshold = fraction * float(np.max(sigma))
    return [scan[k] for k in range(1, len(scan) - 1)
            if sigma[k] <= sigma[k - 1] and sigma[k] < sigma[k + 1] and sigma[k] <= threshold]


class RangeCheck(TypedDict):
    residual: float
    integral: float
    solvable: bool


def range_orthogonality_check(mode: int, v: GridFn1D) -> RangeCheck:
    """Solvability of u'' + mode^2 pi^2 u = v'' against the kernel mode sin(mode pi s).

    The residual is the part of v'' along the left singular vector of sigma_min. When that
    singular value is rank deficient, v'' lies in the range only if the relative projection
    stays below RANGE_TOLERANCE.
    """
    n = v.n - 1
    s = v.nodes
    integral = float(simpson(v.values * np.sin(mode * np.pi * s), x=s))
    if n < 1:
        return RangeCheck(residual=0.0, integral=integral, solvable=True)
    rhs = (v.values[:-2] - 2.0 * v.values[1:-1] + v.values[2:]) / v.h ** 2
    matrix = _operator(np.full(n, -(mode * np.pi) ** 2), np.zeros(n), v.h)
    left, sigma, _ = scipy.linalg.svd(matrix)
    kernel = left[:, -1]
    projection = abs(float(kernel @ rhs))
    residual = projection * float(np.max(np.abs(kernel)))
    deficient = _rank_deficient(float(sigma[-1]), float(sigma[-2 if n > 1 else 0]), float(sigma[0]))
    solvable = not deficient or projection <= lab_settings.RANGE_TOLERANCE * float(np.linalg.norm(rhs))
    return RangeCheck(residual=residual, integral=integral, solvable=solvable)
