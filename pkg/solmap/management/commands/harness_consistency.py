from ...function_core import CylFn, compose
from ...harness import LevelLadder, bijectivity_probe, consistency_check
from ...serializers import ConsistencySerializer
from ...transport import uniqueness_probe
from ..base import TRANSPORT_FLAGS, LabCommand, Outcome, picard_config, transport_problem


class Command(LabCommand):
    help = 'Restriction consistency, bijectivity and uniqueness probes over a ladder of horizons.'
    name = 'harness-consistency'
    serializer_class = ConsistencySerializer
    flags = TRANSPORT_FLAGS + (
        ('--horizons', 'comma separated, strictly increasing horizons'),
        ('--trials', 'random right-hand sides per level'),
    )

    def run(self, config, writer):
        horizons = config['horizons']
        problem = transport_problem(config, T=horizons[-1])
        picard = picard_config(config)
        ladder = LevelLadder(tuple(horizons), config['n'])
        report = consistency_check(problem, ladder, picard, config['jobs'])
        writer.records('pairs', report.pairs, ('i', 'j', 'error'))
        writer.records('levels', report.levels, ('level', 'T', 'solved', 'error'))
        writer.table('norms', ('level', 'order', 'norm'),
                     ((row['level'], order, norm) for row in report.levels for order, norm in enumerate(row['norms'])))
        writer.record('consistency.max_error', report.max_error)
        probes = []
        phi_xi = problem.phi.differentiate('xi')
        for row, y in zip(report.levels, report.solutions):
            if not isinstance(y, CylFn):
                continue
            probe = bijectivity_probe(compose(phi_xi, y, problem.params), config['trials'], config['seed'], picard)
            probes.append((row['level'], probe.trials, probe.max_residual, probe.max_kernel))
        writer.table('bijectivity', ('level', 'trials', 'max_residual', 'max_kernel'), probes)
        distance = uniqueness_probe(problem.with_horizon(horizons[0]), picard, 0.0, 1.0)
        writer.record('uniqueness.distance', distance)
        failed = sum(1 for row in report.levels if not row['solved'])
        writer.record('consistency.failed_levels', failed)
        return Outcome(f'harness-consistency: max restriction error {report.max_error:.3g}, '
                       f'{failed} failed levels, uniqueness distance {distance:.3g}')
