from ...harness import bootstrap_check, convergence_study, transport_family
from ...serializers import ConvergenceStudySerializer
from ..base import TRANSPORT_FLAGS, LabCommand, Outcome, picard_config


class Command(LabCommand):
    help = 'Errors against a closed-form solution and c0i norms of the transport solution under refinement.'
    name = 'convergence-study'
    serializer_class = ConvergenceStudySerializer
    flags = TRANSPORT_FLAGS + (
        ('--T', 'final time'),
        ('--exact', 'closed-form solution in (t, eta)'),
        ('--resolutions', 'comma separated angular cell counts'),
        ('--orders', 'highest c0i order reported'),
    )

    def run(self, config, writer):
        build = transport_family(config['y0'], config['phi'], config['T'], config['params'])
        picard = picard_config(config)
        summary = 'convergence-study:'
        if exact := config.get('exact'):
            rows = convergence_study(build, exact, config['resolutions'], picard, config['params'], config['jobs'])
            writer.records('errors', rows, ('n_theta', 'error', 'order'))
            writer.record('convergence.last_order', rows[-1]['order'])
            summary += f' observed order {rows[-1]["order"]:.3g},'
        table = bootstrap_check(build, config['resolutions'], config['orders'], picard, config['jobs'])
        writer.records('bootstrap', table, ('n_theta', 'order', 'norm', 'difference', 'ratio'))
        return Outcome(f'{summary} {len(table)} bootstrap rows')
