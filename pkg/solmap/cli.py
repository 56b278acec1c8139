"""
Command-line entry point: `python manage.py <subcommand> [flags]`.
"""
import os
import sys
from typing import Optional, Sequence, TextIO

from django.core.management import load_command_class
from django.core.management.base import CommandError

SUBCOMMANDS = (
    'transport-solve',
    'transport-sensitivity',
    'ivp',
    'ivp-sensitivity',
    'bvp',
    'bvp-resonance-scan',
    'holo',
    'holo-counterexample',
    'harness-consistency',
    'harness-exp',
    'convergence-study',
)


def _setup():
    import django
    from django.apps import apps
    if not apps.ready:
        os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'solmap_lab.settings')
        django.setup()


def usage() -> str:
    return 'usage: manage.py <subcommand> [flags]\n\nsubcommands:\n' + ''.join(f'  {name}\n' for name in SUBCOMMANDS)


def dispatch(argv: Sequence[str], stdout: Optional[TextIO] = None, stderr: Optional[TextIO] = None) -> int:
    """Run exactly one subcommand and return its exit code."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    if not argv or argv[0] in ('-h', '--help', 'help'):
        stdout.write(usage())
        return 0 if argv else 1
    name = argv[0]
    if name not in SUBCOMMANDS:
        stderr.write(f"Unknown subcommand '{name}'.\n{usage()}")
        return 1
    _setup()
    command = load_command_class('solmap', name.replace('-', '_'))
    parser = command.create_parser('manage.py', name)
    try:
        options = vars(parser.parse_args(list(argv[1:])))
    except CommandError as e:
        stderr.write(f'{e}\n')
        return 1
    except SystemExit as e:
        # --help
        return int(e.code or 0)
    args = options.pop('args', ())
    try:
        command.execute(*args, **options, stdout=stdout, stderr=stderr)
    except CommandError as e:
        stderr.write(f'{e}\n')
        return e.returncode
    return 0
