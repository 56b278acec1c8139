from functools import wraps
from pathlib import Path
from typing import Any, Callable, Mapping, Optional, TypeVar, Union

from rest_framework import serializers
from rest_framework.serializers import Serializer, ValidationError

_T = TypeVar('_T')


def validation(fn: Callable[..., Optional[_T]]):
    """Turn a `validate_<field>` made of asserts into a DRF field validator.

    A failed assert becomes a ValidationError carrying the assert message. The
    field keeps its value unless the validator returns a replacement.

    Example:

            @validation
            def validate_T(self, value):
                assert value > 0, 'Final time T must be positive.'
    """
    @wraps(fn)
    def validate_field(self: Serializer, value: _T, *args: Any, **kwargs: Any) -> _T:
        try:
            normalized = fn(self, value, *args, **kwargs)
        except AssertionError as e:
            raise ValidationError(str(e) or 'Invalid value.')
        return value if normalized is None else normalized
    return validate_field


class NumberListField(serializers.ListField):
    """Accept a list or a comma separated string of numbers.

    Example:

            class MySerializer(Serializer):
                horizons = NumberListField(child=serializers.FloatField(), min_length=1)
    """

    def to_internal_value(self, data: Any) -> list[Any]:
        if isinstance(data, str):
            data = [item.strip() for item in data.strip().strip('[]').split(',') if item.strip()]
        return super().to_internal_value(data)


class AutoOrFloatField(serializers.Field):
    """Either the literal 'auto' or a positive float."""
    default_error_messages = {
        'invalid': "Expected 'auto' or a positive number.",
    }

    def to_internal_value(self, data: Any) -> Union[str, float]:
        if isinstance(data, str) and data.strip().lower() == 'auto':
            return 'auto'
        try:
            value = float(data)
        except (TypeError, ValueError):
            self.fail('invalid')
        if not value > 0:
            self.fail('invalid')
        return value

    def to_representation(self, value: Union[str, float]) -> str:
        return str(value)


class ComplexField(serializers.Field):
    default_error_messages = {
        'invalid': 'Expected a complex number such as 0.5 or 0.5+0.1j.',
    }

    def to_internal_value(self, data: Any) -> complex:
        try:
            return complex(str(data).replace(' ', ''))
        except ValueError:
            self.fail('invalid')

    def to_representation(self, value: complex) -> str:
        return repr(complex(value))


def read_key_value_file(path: Union[str, Path]) -> dict[str, str]:
    """Read `key=value` lines; blank lines and `#` comments are skipped, dashes in keys become underscores."""
    values: dict[str, str] = {}
    with open(path) as f:
        for number, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith('#'):
                continue
            key, sep, value = line.partition('=')
            if not sep or not key.strip():
                raise ValidationError({'config': [f'{path}:{number}: expected key=value.']})
            values[key.strip().replace('-', '_')] = value.strip()
    return values


def flatten_errors(errors: Any, prefix: str = '') -> list[str]:
    """Turn nested serializer errors into `field: message` lines."""
    if isinstance(errors, Mapping):
        lines: list[str] = []
        for key, value in errors.items():
            name = key if key != 'non_field_errors' else ''
            lines.extend(flatten_errors(value, f'{prefix}{name}: ' if name else prefix))
        return lines
    if isinstance(errors, (list, tuple)):
        return [line for item in errors for line in flatten_errors(item, prefix)]
    return [f'{prefix}{errors}']
