"""
Settings for the laboratory are all namespaced in the SOLMAP setting.
For example your project's `settings.py` file might look like this:

SOLMAP = {
    'PICARD_TOLERANCE': 1e-12,
    'JOBS': 4,
}

This module provides the `lab_settings` object, that is used to access
laboratory settings, checking for user settings first, then falling
back to the defaults. It also works when Django settings are not configured.
"""
import os
from typing import Any, Optional

from django.conf import settings
from django.core.signals import setting_changed

DEFAULTS: dict[str, Any] = {
    'PICARD_TOLERANCE': 1e-12,
    'PICARD_MAX_ITERATIONS': 200,
    'SAFETY_FACTOR': 1.25,
    'XI_SAMPLES': 33,
    'ETA_SAMPLES': 64,
    'STENCIL_ORDER': 4,
    'QUADRATURE': 'trapezoid',
    'STEP_POLICY': 'fixed',
    'SLOPE_TOLERANCE': 1e-13,
    'SLOPE_MAX_ITERATIONS': 50,
    'REGULARITY_THRESHOLD': 1e-8,
    'NEWTON_TOLERANCE': 1e-10,
    'NEWTON_MAX_STEPS': 50,
    'NEWTON_MAX_HALVINGS': 30,
    'SINGULARITY_THRESHOLD': 1e-8,
    'SPECTRAL_GAP': 1e-2,
    'RANGE_TOLERANCE': 1e-8,
    'RESONANCE_DIP_FRACTION': 0.05,
    'OVERFLOW_BOUND': 1e300,
    'RADIUS_BOUND': 10.0,
    'FD_EPSILON': 1e-3,
    'DERIVATIVE_TOLERANCE': 1e-3,
    'RELATIVE_FLOOR': 1e-12,
    'OUTPUT_DIR': 'solmap-out',
    'SIGNIFICANT_DIGITS': 17,
    'JOBS': int(os.environ.get('SOLMAP_JOBS', '1')),
}


class LabSettings:
    """Provide attribute access to the SOLMAP settings.

    Example:

            from solmap.conf import lab_settings
            print(lab_settings.PICARD_TOLERANCE)
    """

    def __init__(self, user_settings: Optional[dict[str, Any]] = None, defaults: Optional[dict[str, Any]] = None):
        if user_settings is not None:
            self._user_settings = user_settings
        self.defaults = defaults or DEFAULTS
        self._cached_attrs: set[str] = set()

    @property
    def user_settings(self) -> dict[str, Any]:
        if not hasattr(self, '_user_settings'):
            self._user_settings = getattr(settings, 'SOLMAP', {}) if settings.configured else {}
        return self._user_settings

    def __getattr__(self, attr: str) -> Any:
        if attr not in self.defaults:
            raise AttributeError(f"Invalid laboratory setting: '{attr}'")
        val = self.user_settings.get(attr, self.defaults[attr])
        self._cached_attrs.add(attr)
        setattr(self, attr, val)
        return val

    def reload(self):
        for attr in self._cached_attrs:
            delattr(self, attr)
        self._cached_attrs.clear()
        if hasattr(self, '_user_settings'):
            delattr(self, '_user_settings')


lab_settings = LabSettings(None, DEFAULTS)


def reload_lab_settings(*args: Any, **kwargs: Any):
    if kwargs['setting'] == 'SOLMAP':
        lab_settings.reload()


setting_changed.connect(reload_lab_settings)
