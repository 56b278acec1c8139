"""
Django settings for the solmap_lab project.

Only the pieces the laboratory uses are configured: the `solmap` app (for its
management commands), DRF (for run-config validation) and logging. There is no
database, no URL routing and no middleware.
"""

import os
from pathlib import Path

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

SECRET_KEY = os.environ.get('SOLMAP_SECRET_KEY', 'solmap-lab-offline')

DEBUG = False

ALLOWED_HOSTS: list[str] = []

INSTALLED_APPS = [
    'rest_framework',
    'solmap',
]

DATABASES: dict[str, dict[str, str]] = {}

REST_FRAMEWORK = {
    'UNAUTHENTICATED_USER': None,
    'DEFAULT_AUTHENTICATION_CLASSES': [],
    'DEFAULT_PERMISSION_CLASSES': [],
}

SOLMAP = {
    'OUTPUT_DIR': os.environ.get('SOLMAP_OUTPUT_DIR', 'solmap-out'),
}

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'plain': {
            'format': '{levelname} {name}: {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'stream': 'ext://sys.stderr',
            'formatter': 'plain',
        },
    },
    'loggers': {
        'solmap': {
            'handlers': ['console'],
            'level': os.environ.get('SOLMAP_LOG_LEVEL', 'WARNING'),
            'propagate': False,
        },
        'drfutils': {
            'handlers': ['console'],
            'level': os.environ.get('SOLMAP_LOG_LEVEL', 'WARNING'),
            'propagate': False,
        },
    },
}


# Internationalization
# https://docs.djangoproject.com/en/5.1/topics/i18n/

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True
