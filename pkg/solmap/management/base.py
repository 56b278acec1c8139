"""
Shared plumbing of the laboratory subcommands.

A subcommand declares its flags and a RunSerializer; raw values are read from
the optional key=value file, overridden by flags, validated, and handed to
`run` together with the run's ArtifactWriter. Laboratory errors leave through
CommandError with their exit code.
"""
import logging
from pathlib import Path
from typing import Any, NamedTuple, Optional

from django.core.management.base import BaseCommand, CommandError, CommandParser
from rest_framework.serializers import ValidationError

from drfutils.serializers import flatten_errors, read_key_value_file

from ..artifacts import ArtifactWriter
from ..exceptions import SolmapError
from ..serializers import RunSerializer
from ..transport import PicardConfig, TransportProblem

logger = logging.getLogger('solmap.commands')


class Outcome(NamedTuple):
    summary: str
    exit_code: int = 0


class LabCommand(BaseCommand):
    """Provide the config/flag merge, validation and artifact handling of a subcommand.

    Example:

            class Command(LabCommand):
                name = 'bvp'
                serializer_class = BvpSerializer
                flags = (('--eta0', 'left boundary value'), ...)

                def run(self, config, writer):
                    ...
                    return Outcome('bvp: converged')
    """
    name = ''
    serializer_class: type[RunSerializer] = RunSerializer
    # (flag, help); values stay strings until the serializer sees them
    flags: tuple[tuple[str, str], ...] = ()
    switches: tuple[tuple[str, str], ...] = ()
    requires_system_checks: list[str] = []

    def add_arguments(self, parser: CommandParser):
        parser.add_argument('--config', help='key=value file; flags override its values')
        parser.add_argument('--out', help='output directory')
        parser.add_argument('--jobs', help='worker threads for independent solves (default $SOLMAP_JOBS or 1)')
        parser.add_argument('--seed', help='seed of randomized probes')
        parser.add_argument('--params', help='extra expression parameters, e.g. c=0.5,k=2')
        for flag, help_text in self.flags:
            parser.add_argument(flag, help=help_text, default=None)
        for flag, help_text in self.switches:
            parser.add_argument(flag, help=help_text, action='store_const', const='true', default=None)

    def collect(self, options: dict[str, Any]) -> dict[str, Any]:
        fields = set(self.serializer_class().fields)
        data: dict[str, Any] = {}
        if path := options.get('config'):
            try:
                data.update(read_key_value_file(path))
            except OSError as e:
                raise CommandError(f'Cannot read config file {path}: {e.strerror}.', returncode=1)
            except ValidationError as e:
                raise CommandError('\n'.join(flatten_errors(e.detail)), returncode=1)
            if unknown := sorted(set(data) - fields):
                raise CommandError(f'Unknown config keys for {self.name}: {", ".join(unknown)}.', returncode=1)
        for name in fields:
            if options.get(name) is not None:
                data[name] = options[name]
        return data

    def handle(self, *args: Any, **options: Any):
        raw = self.collect(options)
        serializer = self.serializer_class(data=raw)
        if not serializer.is_valid():
            raise CommandError('Invalid configuration:\n' + '\n'.join(flatten_errors(serializer.errors)),
                               returncode=1)
        config = dict(serializer.validated_data)
        recorded = {k: v for k, v in serializer.data.items() if k != 'out'}
        writer = ArtifactWriter(Path(config['out']), self.name, recorded)
        try:
            outcome = self.run(config, writer)
        except SolmapError as e:
            writer.record('error.code', e.code)
            writer.record('error.message', str(e))
            writer.finish(e.exit_code)
            logger.debug('%s failed with exit code %d', self.name, e.exit_code)
            raise CommandError(f'{self.name}: {type(e).__name__}: {e}', returncode=e.exit_code) from e
        writer.record('summary', outcome.summary)
        writer.finish(outcome.exit_code)
        if outcome.exit_code:
            raise CommandError(outcome.summary, returncode=outcome.exit_code)
        self.stdout.write(outcome.summary)

    def run(self, config: dict[str, Any], writer: ArtifactWriter) -> Outcome:
        raise NotImplementedError('`run()` must be implemented.')


def picard_config(config: dict[str, Any]) -> PicardConfig:
    cutoff: Any = {'auto': 'auto', 'on': True, 'off': False}[config['cutoff']]
    return PicardConfig(tolerance=config['tol'], max_iterations=config['max_iter'], xi_window=config['xi_window'],
                        cutoff=cutoff, step_policy=config['policy'], steps=config.get('steps'),
                        safety=config['safety'], quadrature=config['quadrature'])


def transport_problem(config: dict[str, Any], T: Optional[float] = None) -> TransportProblem:
    params = config['params']
    y0 = config['y0'].on(0.0, 1.0, config['n'], params)
    return TransportProblem(y0, config['phi'], config['T'] if T is None else T, params)


TRANSPORT_FLAGS = (
    ('--y0', 'initial data: expression in s, inline list or CSV file'),
    ('--phi', 'nonlinearity in (t, eta, xi)'),
    ('--n', 'angular cells (time step 1/n)'),
    ('--tol', 'fixed-point tolerance'),
    ('--max-iter', 'Picard iterations per window'),
    ('--policy', "step policy: 'fixed' or 'lemma-c'"),
    ('--steps', "number of windows under the 'fixed' policy"),
    ('--xi-window', "'auto' or the half-width of the xi sampling window"),
    ('--cutoff', "'auto', 'on' or 'off'"),
    ('--safety', 'safety factor on sampled suprema'),
    ('--quadrature', "'trapezoid' or 'simpson'"),
)
