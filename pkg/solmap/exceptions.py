"""
Laboratory exceptions.

Every error carries the exit code the command line reports for it, in the way
API exceptions carry their HTTP status code.
"""
from typing import Any, Optional


class SolmapError(Exception):
    """Base class for laboratory errors.

    Subclasses should provide `exit_code`, `default_detail` and `default_code`.
    """
    exit_code = 1
    default_detail = 'A laboratory error occurred.'
    default_code = 'error'

    def __init__(self, detail: Optional[str] = None, code: Optional[str] = None):
        self.detail = detail if detail is not None else self.default_detail
        self.code = code if code is not None else self.default_code
        super().__init__(self.detail)

    def __str__(self):
        return str(self.detail)

    def get_full_details(self) -> dict[str, Any]:
        return {'message': self.detail, 'code': self.code, 'exit_code': self.exit_code}


class ConfigError(SolmapError):
    default_detail = 'Invalid run configuration.'
    default_code = 'invalid_config'


class GridError(SolmapError):
    default_detail = 'Grids do not match or are too coarse.'
    default_code = 'grid_mismatch'


class ExpressionError(SolmapError):
    default_detail = 'Invalid expression.'
    default_code = 'invalid_expression'


class ExpressionSyntaxError(ExpressionError):
    default_detail = 'Expression syntax error.'
    default_code = 'syntax_error'

    def __init__(self, detail: Optional[str] = None, position: int = 0, code: Optional[str] = None):
        self.position = position
        super().__init__(f'{detail or self.default_detail} (at position {position})', code)


class UndeclaredVariableError(ExpressionError):
    default_detail = 'Undeclared variable.'
    default_code = 'undeclared_variable'

    def __init__(self, name: str, position: int = 0):
        self.name = name
        self.position = position
        super().__init__(f"Undeclared variable '{name}' (at position {position})")


class DomainError(SolmapError):
    """Evaluation left the domain of a node (division by zero, log of a non-positive number)."""
    exit_code = 4
    default_detail = 'Expression evaluated outside its domain.'
    default_code = 'domain_error'

    def __init__(self, detail: Optional[str] = None, node: Any = None, index: Optional[int] = None,
                 coordinates: Optional[dict[str, float]] = None, mask: Any = None):
        self.reason = detail or self.default_detail
        self.node = node
        self.index = index
        self.mask = mask
        self.coordinates = coordinates or {}
        message = self.reason
        if node is not None:
            message += f' Node: {node}.'
        if self.coordinates:
            message += ' At ' + ', '.join(f'{k}={v:.17g}' for k, v in self.coordinates.items()) + '.'
        super().__init__(message)

    def at(self, **coordinates: float) -> 'DomainError':
        return DomainError(self.reason, node=self.node, index=self.index, coordinates=coordinates)


class ConvergenceError(SolmapError):
    exit_code = 3
    default_detail = 'Solver did not converge.'
    default_code = 'no_convergence'


class StagnationError(ConvergenceError):
    """The admissible step shrank below one time cell.

    `report` holds the solution up to the last completed window and
    `blowup_estimate` the extrapolated blow-up time.
    """
    default_detail = 'Step length stagnated below one time cell.'
    default_code = 'stagnation'

    def __init__(self, detail: Optional[str] = None, report: Any = None, blowup_estimate: float = float('inf')):
        self.report = report
        self.blowup_estimate = blowup_estimate
        super().__init__(detail)


class SeriesOverflowError(ConvergenceError):
    default_detail = 'Series coefficient overflow.'
    default_code = 'overflow'

    def __init__(self, index: int):
        self.index = index
        super().__init__(f'Series coefficient overflow at index {index}.')


class RegularityError(SolmapError):
    exit_code = 2
    default_detail = 'Regularity failure detected.'
    default_code = 'irregular'


class SlopeResolutionError(RegularityError):
    """The implicit slope equation lost its nondegenerate root."""
    default_detail = 'Slope resolution failed: derivative vanished.'
    default_code = 'slope_resolution'

    def __init__(self, detail: Optional[str] = None, s: float = 0.0):
        self.s = s
        super().__init__(detail)


class SingularSystemError(RegularityError):
    default_detail = 'Linearized system is singular.'
    default_code = 'singular_system'

    def __init__(self, detail: Optional[str] = None, sigma_min: float = 0.0):
        self.sigma_min = sigma_min
        super().__init__(detail)
