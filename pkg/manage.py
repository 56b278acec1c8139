#!/usr/bin/env python
"""Command-line entry point of the solution-map laboratory."""
import os
import sys


def main():
    """Run one laboratory subcommand and exit with its code."""
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'solmap_lab.settings')
    try:
        import django  # noqa: F401
    except ImportError as exc:
        raise ImportError('Django is missing; install requirements.txt into the active environment.') from exc
    from solmap.cli import dispatch
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == '__main__':
    main()
