"""
Run configurations of the command-line subcommands.

Raw values come from a key=value file merged with command-line flags; the
serializers here turn them into validated problem descriptions.
"""
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence, Union

import numpy as np
from rest_framework import serializers

from drfutils.serializers import AutoOrFloatField, ComplexField, NumberListField, validation

from .conf import lab_settings
from .exceptions import ExpressionError, GridError, SolmapError
from .expr import HOLO_VARIABLES, IMPLICIT_VARIABLES, LINE_VARIABLES, TRANSPORT_VARIABLES, Expression, parse
from .function_core import CylGrid, GridFn1D, read_grid_csv

_NAME = re.compile(r'^[A-Za-z_][A-Za-z_0-9]*$')


def parse_parameters(text: Union[str, Mapping[str, Any], None]) -> dict[str, float]:
    """'c=0.5, k=2' -> {'c': 0.5, 'k': 2.0}."""
    if not text:
        return {}
    if isinstance(text, Mapping):
        items = list(text.items())
    else:
        items = []
        for chunk in str(text).split(','):
            if not chunk.strip():
                continue
            name, sep, value = chunk.partition('=')
            if not sep:
                raise serializers.ValidationError(f"Parameter '{chunk.strip()}' is not of the form name=value.")
            items.append((name.strip(), value.strip()))
    parameters: dict[str, float] = {}
    for name, value in items:
        if not _NAME.match(name) or name == 'pi':
            raise serializers.ValidationError(f"'{name}' is not a valid parameter name.")
        try:
            parameters[name] = float(value)
        except (TypeError, ValueError):
            raise serializers.ValidationError(f"Parameter '{name}' needs a numeric value.")
    return parameters


class ParametersField(serializers.Field):
    def to_internal_value(self, data: Any) -> dict[str, float]:
        return parse_parameters(data)

    def to_representation(self, value: Mapping[str, float]) -> str:
        return ','.join(f'{k}={v!r}' for k, v in sorted(value.items()))


class ExpressionField(serializers.Field):
    """Grammar text parsed over `variables` plus the run's declared parameters."""

    def __init__(self, variables: Sequence[str], **kwargs: Any):
        self.variables = tuple(variables)
        super().__init__(**kwargs)

    def _parameters(self) -> list[str]:
        initial = getattr(self.parent, 'initial_data', None) or {}
        try:
            names = parse_parameters(initial.get('params'))
        except serializers.ValidationError:
            return []
        return [name for name in names if name not in self.variables]

    def to_internal_value(self, data: Any) -> Expression:
        if isinstance(data, Expression):
            return data
        try:
            return parse(str(data), self.variables + tuple(self._parameters()))
        except ExpressionError as e:
            raise serializers.ValidationError(str(e))

    def to_representation(self, value: Expression) -> str:
        return str(value)


@dataclass(frozen=True, eq=False)
class GridData:
    """Data given as an expression in s, an inline list of nodal values or a CSV file."""
    expression: Optional[Expression] = None
    values: Optional[tuple[float, ...]] = None
    path: Optional[Path] = None

    def on(self, a: float, b: float, n: int, params: Optional[Mapping[str, float]] = None) -> GridFn1D:
        if self.expression is not None:
            return GridFn1D.from_expression(self.expression, a, b, n, params=params)
        if self.values is not None:
            if len(self.values) != n + 1:
                raise GridError(f'Inline data has {len(self.values)} values; {n + 1} nodes are needed.')
            return GridFn1D(a, b, np.asarray(self.values))
        grid = read_grid_csv(self.path)  # type: ignore
        if grid.n != n or not math.isclose(grid.a, a, abs_tol=1e-12) or not math.isclose(grid.b, b, abs_tol=1e-12):
            raise GridError(f'{self.path}: data on [{grid.a}, {grid.b}] with {grid.n} cells; '
                            f'[{a}, {b}] with {n} cells is needed.')
        return grid

    def __str__(self) -> str:
        if self.expression is not None:
            return str(self.expression)
        if self.values is not None:
            return '[' + ','.join(repr(v) for v in self.values) + ']'
        return str(self.path)


class DataField(ExpressionField):
    def __init__(self, **kwargs: Any):
        super().__init__(LINE_VARIABLES, **kwargs)

    def to_internal_value(self, data: Any) -> GridData:
        if isinstance(data, GridData):
            return data
        if isinstance(data, (list, tuple)):
            return GridData(values=tuple(NumberListField(child=serializers.FloatField()).to_internal_value(data)))
        text = str(data).strip()
        if text.startswith('['):
            field = NumberListField(child=serializers.FloatField(allow_infinity=False, allow_nan=False), min_length=3)
            return GridData(values=tuple(field.to_internal_value(text)))
        if text.lower().endswith('.csv'):
            path = Path(text)
            if not path.is_file():
                raise serializers.ValidationError(f'Data file {text} does not exist.')
            return GridData(path=path)
        return GridData(expression=super().to_internal_value(text))

    def to_representation(self, value: GridData) -> str:
        return str(value)


# run configurations

class RunSerializer(serializers.Serializer):
    out = serializers.CharField(default=lambda: lab_settings.OUTPUT_DIR)
    jobs = serializers.IntegerField(min_value=1, default=lambda: lab_settings.JOBS)
    seed = serializers.IntegerField(min_value=0, default=0)
    params = ParametersField(default=dict)


class PicardSerializer(RunSerializer):
    tol = serializers.FloatField(min_value=0.0, default=lambda: lab_settings.PICARD_TOLERANCE)
    max_iter = serializers.IntegerField(min_value=1, default=lambda: lab_settings.PICARD_MAX_ITERATIONS)
    policy = serializers.ChoiceField(choices=['fixed', 'lemma-c'], default=lambda: lab_settings.STEP_POLICY)
    steps = serializers.IntegerField(min_value=1, required=False, allow_null=True, default=None)
    xi_window = AutoOrFloatField(default='auto')
    cutoff = serializers.ChoiceField(choices=['auto', 'on', 'off'], default='auto')
    safety = serializers.FloatField(min_value=1.0, default=lambda: lab_settings.SAFETY_FACTOR)
    quadrature = serializers.ChoiceField(choices=['trapezoid', 'simpson'], default=lambda: lab_settings.QUADRATURE)

    @validation
    def validate_tol(self, value: float):
        assert value > 0, 'Fixed-point tolerance must be positive.'


class TransportDataSerializer(PicardSerializer):
    y0 = DataField()
    phi = ExpressionField(TRANSPORT_VARIABLES)
    n = serializers.IntegerField(min_value=8, default=256)


class TransportSerializer(TransportDataSerializer):
    T = serializers.FloatField()
    exact = ExpressionField(TRANSPORT_VARIABLES, required=False, allow_null=True, default=None)

    @validation
    def validate_T(self, value: float):
        assert value > 0, 'Final time T must be positive.'

    def validate(self, attrs: dict[str, Any]) -> dict[str, Any]:
        try:
            CylGrid.aligned(attrs['T'], attrs['n'])
        except SolmapError as e:
            raise serializers.ValidationError({'T': [str(e)]})
        return attrs


class TransportSensitivitySerializer(TransportSerializer):
    d_y0 = DataField(required=False, allow_null=True, default=None)
    psi = ExpressionField(TRANSPORT_VARIABLES, required=False, allow_null=True, default=None)
    eps = serializers.FloatField(default=lambda: lab_settings.FD_EPSILON)
    tolerance = serializers.FloatField(default=lambda: lab_settings.DERIVATIVE_TOLERANCE)
    second = serializers.BooleanField(default=False)
    second_eps = serializers.FloatField(default=1e-2)

    @validation
    def validate_eps(self, value: float):
        assert value > 0, 'The difference step must be positive.'

    def validate(self, attrs: dict[str, Any]) -> dict[str, Any]:
        attrs = super().validate(attrs)
        if attrs.get('d_y0') is None and attrs.get('psi') is None:
            raise serializers.ValidationError('Give a direction: d_y0, psi or both.')
        return attrs


class IvpSerializer(RunSerializer):
    eta = serializers.FloatField()
    phi = ExpressionField(IMPLICIT_VARIABLES)
    n = serializers.IntegerField(min_value=8, default=100)
    slope_guess = serializers.FloatField(default=0.0)
    threshold = serializers.FloatField(min_value=0.0, default=lambda: lab_settings.REGULARITY_THRESHOLD)
    scan = NumberListField(child=serializers.FloatField(), required=False, default=list)
    scan_param = serializers.CharField(required=False, default='c')

    def validate(self, attrs: dict[str, Any]) -> dict[str, Any]:
        if attrs['scan'] and attrs['scan_param'] not in attrs['params']:
            raise serializers.ValidationError({'scan_param': [f"Declare '{attrs['scan_param']}' in params to scan it."]})
        return attrs


class IvpSensitivitySerializer(IvpSerializer):
    d_eta = serializers.FloatField(default=0.0)
    psi = ExpressionField(IMPLICIT_VARIABLES, required=False, allow_null=True, default=None)
    eps = serializers.FloatField(default=lambda: lab_settings.FD_EPSILON)
    tolerance = serializers.FloatField(default=lambda: lab_settings.DERIVATIVE_TOLERANCE)

    def validate(self, attrs: dict[str, Any]) -> dict[str, Any]:
        attrs = super().validate(attrs)
        if attrs['d_eta'] == 0 and attrs.get('psi') is None:
            raise serializers.ValidationError('Give a direction: d_eta, psi or both.')
        return attrs


class BvpSerializer(RunSerializer):
    eta0 = serializers.FloatField()
    eta1 = serializers.FloatField()
    phi = ExpressionField(IMPLICIT_VARIABLES)
    n = serializers.IntegerField(min_value=16, default=200)
    tol = serializers.FloatField(default=lambda: lab_settings.NEWTON_TOLERANCE)
    max_steps = serializers.IntegerField(min_value=1, default=lambda: lab_settings.NEWTON_MAX_STEPS)
    d_eta0 = serializers.FloatField(default=0.0)
    d_eta1 = serializers.FloatField(default=0.0)
    psi = ExpressionField(IMPLICIT_VARIABLES, required=False, allow_null=True, default=None)
    eps = serializers.FloatField(default=lambda: lab_settings.FD_EPSILON)
    tolerance = serializers.FloatField(default=lambda: lab_settings.DERIVATIVE_TOLERANCE)


class ResonanceScanSerializer(RunSerializer):
    rmin = serializers.FloatField()
    rmax = serializers.FloatField()
    steps = serializers.IntegerField(min_value=0, default=2000)
    n = serializers.IntegerField(min_value=16, default=200)
    fraction = serializers.FloatField(min_value=0.0, max_value=1.0,
                                      default=lambda: lab_settings.RESONANCE_DIP_FRACTION)
    mode = serializers.IntegerField(min_value=1, required=False, allow_null=True, default=None)
    v = DataField(required=False, allow_null=True, default=None)

    def validate(self, attrs: dict[str, Any]) -> dict[str, Any]:
        if attrs['rmax'] < attrs['rmin']:
            raise serializers.ValidationError({'rmax': ['rmax must not be below rmin.']})
        if (attrs.get('mode') is None) != (attrs.get('v') is None):
            raise serializers.ValidationError('The orthogonality check needs both mode and v.')
        return attrs


class HoloSerializer(RunSerializer):
    y0 = ComplexField(default=0j)
    phi = ExpressionField(HOLO_VARIABLES, required=False, allow_null=True, default=None)
    order = serializers.IntegerField(min_value=1, default=200)
    m_max = serializers.IntegerField(min_value=0, default=8)
    k_max = serializers.IntegerField(min_value=0, default=4)
    tail = serializers.FloatField(min_value=0.0, max_value=1.0, default=0.5)
    epsilon = serializers.FloatField(min_value=0.0, required=False, allow_null=True, default=None)
    family_n = serializers.IntegerField(min_value=1, required=False, allow_null=True, default=None)
    d_y0 = ComplexField(default=0j)
    psi = ExpressionField(HOLO_VARIABLES, required=False, allow_null=True, default=None)
    eps = serializers.FloatField(default=lambda: lab_settings.FD_EPSILON)
    tolerance = serializers.FloatField(default=lambda: lab_settings.DERIVATIVE_TOLERANCE)

    def validate(self, attrs: dict[str, Any]) -> dict[str, Any]:
        family = attrs.get('epsilon') is not None, attrs.get('family_n') is not None
        if family[0] != family[1]:
            raise serializers.ValidationError('The blow-up family needs both epsilon and family_n.')
        if not family[0] and attrs.get('phi') is None:
            raise serializers.ValidationError({'phi': ['Give phi or the blow-up family (epsilon, family_n).']})
        return attrs


class HoloCounterexampleSerializer(RunSerializer):
    r = serializers.FloatField()
    s = serializers.FloatField()
    n_max = serializers.IntegerField(min_value=2, default=40)
    order = serializers.IntegerField(min_value=2, default=200)
    points = serializers.IntegerField(min_value=8, default=2048)

    def validate(self, attrs: dict[str, Any]) -> dict[str, Any]:
        if not 0 < attrs['r'] < attrs['s'] < 1:
            raise serializers.ValidationError('The counterexample needs 0 < r < s < 1.')
        return attrs


class ConsistencySerializer(TransportDataSerializer):
    horizons = NumberListField(child=serializers.FloatField(min_value=0.0), min_length=1)
    trials = serializers.IntegerField(min_value=0, default=10)

    def validate(self, attrs: dict[str, Any]) -> dict[str, Any]:
        horizons = attrs['horizons']
        if any(b <= a for a, b in zip(horizons, horizons[1:])):
            raise serializers.ValidationError({'horizons': ['Horizons must be strictly increasing.']})
        try:
            for T in horizons:
                CylGrid.aligned(T, attrs['n'])
        except SolmapError as e:
            raise serializers.ValidationError({'horizons': [str(e)]})
        return attrs


class ExpSerializer(RunSerializer):
    x = DataField()
    levels = serializers.IntegerField(min_value=1, default=2)
    n = serializers.IntegerField(min_value=4, default=400)

    def validate(self, attrs: dict[str, Any]) -> dict[str, Any]:
        if attrs['n'] % (2 * attrs['levels']):
            raise serializers.ValidationError({'n': ['n must be a multiple of 2 * levels so every level is node-aligned.']})
        return attrs


class ConvergenceStudySerializer(TransportDataSerializer):
    T = serializers.FloatField(min_value=0.0)
    exact = ExpressionField(TRANSPORT_VARIABLES, required=False, allow_null=True, default=None)
    y0 = ExpressionField(LINE_VARIABLES)
    resolutions = NumberListField(child=serializers.IntegerField(min_value=8), min_length=2, default=[64, 128, 256])
    orders = serializers.IntegerField(min_value=0, max_value=4, default=4)

    def validate(self, attrs: dict[str, Any]) -> dict[str, Any]:
        try:
            for n in attrs['resolutions']:
                CylGrid.aligned(attrs['T'], n)
        except SolmapError as e:
            raise serializers.ValidationError({'resolutions': [str(e)]})
        return attrs
