"""
Probes of the level structure: restriction consistency across nested horizons,
level-wise bijectivity of the linearization, regularity bootstrap under grid
refinement, and the logarithm counterexample whose levels do not nest.
"""
import logging
import math
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence, TypedDict

import numpy as np

from drfutils.pool import fan_out

from .exceptions import ConfigError, DomainError, GridError, SolmapError
from .expr import LINE_VARIABLES, Expression, parse
from .function_core import CylFn, CylGrid, GridFn1D, c0i_norm, restrict
from .transport import PicardConfig, TransportProblem, char_integral, linearized_solve, solve

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LevelLadder:
    """Horizons T_1 < T_2 < ... on a shared angular grid; level i also reports derivative orders up to i."""
    horizons: tuple[float, ...]
    n_theta: int

    def __post_init__(self):
        if not self.horizons:
            raise ConfigError('A ladder needs at least one level.')
        if any(b <= a for a, b in zip(self.horizons, self.horizons[1:])):
            raise ConfigError('Ladder horizons must be strictly increasing.')
        for T in self.horizons:
            CylGrid.aligned(T, self.n_theta)

    @classmethod
    def uniform(cls, T1: float, levels: int, n_theta: int) -> 'LevelLadder':
        return cls(tuple(i * T1 for i in range(1, levels + 1)), n_theta)

    @property
    def levels(self) -> int:
        return len(self.horizons)


class PairError(TypedDict):
    i: int
    j: int
    error: float


class LevelRow(TypedDict):
    level: int
    T: float
    solved: bool
    norms: list[float]
    error: str


@dataclass(frozen=True, eq=False)
class ConsistencyReport:
    pairs: list[PairError]
    levels: list[LevelRow]
    solutions: list[Optional[CylFn]]

    @property
    def max_error(self) -> float:
        return max((p['error'] for p in self.pairs), default=0.0)


def _solve_level(problem: TransportProblem, config: PicardConfig) -> CylFn:
    return solve(problem, config).solution


def consistency_check(problem: TransportProblem, ladder: LevelLadder, config: Optional[PicardConfig] = None,
                      jobs: int = 1) -> ConsistencyReport:
    """sup |restrict(y_j, T_i) - y_i| for every solved pair i < j."""
    config = config or PicardConfig()
    if problem.n_theta != ladder.n_theta:
        raise GridError(f'Ladder uses {ladder.n_theta} angular cells, the data {problem.n_theta}.')

    def attempt(T: float):
        try:
            return _solve_level(problem.with_horizon(T), config)
        except SolmapError as e:
            logger.warning('Level with horizon %.6g failed: %s', T, e)
            return e

    outcomes = fan_out([lambda T=T: attempt(T) for T in ladder.horizons], jobs)
    levels: list[LevelRow] = []
    for i, (T, outcome) in enumerate(zip(ladder.horizons, outcomes), start=1):
        if isinstance(outcome, CylFn):
            norms = [c0i_norm(outcome, order) for order in range(i + 1)]
            levels.append(LevelRow(level=i, T=T, solved=True, norms=norms, error=''))
        else:
            levels.append(LevelRow(level=i, T=T, solved=False, norms=[], error=str(outcome)))
    pairs: list[PairError] = []
    for i, y_i in enumerate(outcomes):
        for j in range(i + 1, len(outcomes)):
            y_j = outcomes[j]
            if isinstance(y_i, CylFn) and isinstance(y_j, CylFn):
                restricted = restrict(y_j, ladder.horizons[i])
                pairs.append(PairError(i=i + 1, j=j + 1, error=float(np.max(np.abs(restricted.values - y_i.values)))))
    solutions = [y if isinstance(y, CylFn) else None for y in outcomes]
    return ConsistencyReport(pairs=pairs, levels=levels, solutions=solutions)


def trig_polynomial(grid: CylGrid, rng: np.random.Generator, modes: int = 3) -> CylFn:
    """Random smooth field sum_k (a_k cos 2 pi k eta + b_k sin 2 pi k eta)(1 + c_k t)."""
    t, eta = grid.mesh()
    values = np.zeros(grid.shape)
    for k in range(modes + 1):
        a, b, c = rng.uniform(-1.0, 1.0, 3)
        values += (a * np.cos(2 * np.pi * k * eta) + b * np.sin(2 * np.pi * k * eta)) * (1.0 + c * t)
    return CylFn(grid, values)


@dataclass(frozen=True)
class BijectivityReport:
    trials: int
    max_residual: float
    max_kernel: float


def bijectivity_probe(a: CylFn, trials: int = 10, seed: int = 0, config: Optional[PicardConfig] = None) -> BijectivityReport:
    """Residuals of u = v + I(t0, a u) for random v, and sup |u| from a random start at v = 0."""
    config = config or PicardConfig()
    if trials == 0:
        logger.warning('Bijectivity probe ran with zero trials; the check is vacuous')
        return BijectivityReport(trials=0, max_residual=0.0, max_kernel=0.0)
    rng = np.random.default_rng(seed)
    grid = a.grid
    worst = 0.0
    for _ in range(trials):
        v = trig_polynomial(grid, rng)
        u = linearized_solve(a, v, config)
        defect = u - v - char_integral(grid.t0, a * u, config.quadrature)
        worst = max(worst, defect.sup_norm())
    start = trig_polynomial(grid, rng)
    kernel = linearized_solve(a, CylFn.zeros(grid), replace(config, initial=start)).sup_norm()
    return BijectivityReport(trials=trials, max_residual=worst, max_kernel=kernel)


class BootstrapRow(TypedDict):
    n_theta: int
    order: int
    norm: float
    difference: float
    ratio: float


def transport_family(y0: Expression, phi: Expression, T: float,
                     params: Optional[dict[str, float]] = None) -> Callable[[int], TransportProblem]:
    """Problems on [0, T] x S^1 with y0 sampled on n_theta cells."""
    def build(n_theta: int) -> TransportProblem:
        return TransportProblem(GridFn1D.from_expression(y0, 0.0, 1.0, n_theta, params=params), phi, T,
                                params or {})
    return build


def bootstrap_check(build: Callable[[int], TransportProblem], resolutions: Sequence[int], max_order: int = 4,
                    config: Optional[PicardConfig] = None, jobs: int = 1) -> list[BootstrapRow]:
    """c0i norms of the solution for i <= max_order across refinements, with successive differences."""
    if not 0 <= max_order <= 4:
        raise ConfigError('Bootstrap orders run from 0 to 4.')
    config = config or PicardConfig()
    solutions = fan_out([lambda n=n: _solve_level(build(n), config) for n in resolutions], jobs)
    rows: list[BootstrapRow] = []
    for order in range(max_order + 1):
        norms = [c0i_norm(y, order) for y in solutions]
        differences = [math.nan] + [abs(b - a) for a, b in zip(norms, norms[1:])]
        for k, (n, norm) in enumerate(zip(resolutions, norms)):
            previous = differences[k - 1] if k >= 2 else math.nan
            ratio = previous / differences[k] if k >= 2 and differences[k] > 0 else math.nan
            rows.append(BootstrapRow(n_theta=n, order=order, norm=norm, difference=differences[k], ratio=ratio))
    return rows


class ExpRow(TypedDict):
    level: int
    min_x: float
    success: bool
    multiplier: float
    error: str


_LOG = parse('log(s)', LINE_VARIABLES)


def exp_counterexample(x: GridFn1D, levels: int) -> list[ExpRow]:
    """Per level i, y = log(x restricted to [-i, i]); the linearization multiplies by exp(y) = x."""
    if levels < 1:
        raise ConfigError('At least one level is required.')
    if x.a > -levels or x.b < levels:
        raise GridError(f'x must cover [-{levels}, {levels}]; it covers [{x.a}, {x.b}].')
    rows: list[ExpRow] = []
    for i in range(1, levels + 1):
        piece = x.restrict(-i, i)
        min_x = float(np.min(piece.values))
        try:
            y = _LOG.eval({'s': piece.values})
        except DomainError as e:
            rows.append(ExpRow(level=i, min_x=min_x, success=False, multiplier=math.nan, error=e.reason))
            continue
        rows.append(ExpRow(level=i, min_x=min_x, success=True, multiplier=float(np.max(np.abs(np.exp(y)))),
                           error=''))
    return rows


class ConvergenceRow(TypedDict):
    n_theta: int
    error: float
    order: float


def convergence_study(build: Callable[[int], TransportProblem], exact: Expression, resolutions: Sequence[int],
                      config: Optional[PicardConfig] = None, params: Optional[dict[str, float]] = None,
                      jobs: int = 1) -> list[ConvergenceRow]:
    """Sup error against a closed-form solution in (t, eta) and observed orders between refinements."""
    config = config or PicardConfig()
    solutions = fan_out([lambda n=n: _solve_level(build(n), config) for n in resolutions], jobs)
    rows: list[ConvergenceRow] = []
    previous: Optional[tuple[int, float]] = None
    for n, y in zip(resolutions, solutions):
        t, eta = y.grid.mesh()
        reference = np.broadcast_to(exact.eval({**(params or {}), 't': t, 'eta': eta, 'xi': 0.0}), y.grid.shape)
        error = float(np.max(np.abs(y.values - reference)))
        order = math.nan
        if previous is not None and error > 0 and previous[1] > 0:
            order = math.log(previous[1] / error) / math.log(n / previous[0])
        rows.append(ConvergenceRow(n_theta=n, error=error, order=order))
        previous = (n, error)
    return rows
