from ...function_core import CylFn
from ...sensitivity import Direction, TransportMap, derivative_check, second_variation_check
from ...serializers import TransportSensitivitySerializer
from ..base import TRANSPORT_FLAGS, LabCommand, Outcome, picard_config, transport_problem


class Command(LabCommand):
    help = 'Compare finite-difference and variational derivatives of the transport solution map.'
    name = 'transport-sensitivity'
    serializer_class = TransportSensitivitySerializer
    flags = TRANSPORT_FLAGS + (
        ('--T', 'final time'),
        ('--d-y0', 'data direction: expression in s, inline list or CSV file'),
        ('--psi', 'nonlinearity direction in (t, eta, xi)'),
        ('--eps', 'central difference step'),
        ('--tolerance', 'relative sup error accepted'),
        ('--second-eps', 'step of the mixed second difference'),
    )
    switches = (('--second', 'also check the second variation'),)

    def run(self, config, writer):
        problem = transport_problem(config)
        solution_map = TransportMap(problem, picard_config(config))
        d_y0 = config['d_y0'].on(0.0, 1.0, config['n'], config['params']) if config['d_y0'] is not None else None
        h = Direction(d_data=d_y0, d_phi=config['psi'])
        report = derivative_check(solution_map, h, config['eps'], config['tolerance'], richardson=True,
                                  jobs=config['jobs'])
        grid = solution_map.report.solution.grid
        writer.field('fd', CylFn(grid, report.fd_value), 'fd')
        writer.field('variational', CylFn(grid, report.variational_value), 'variational')
        writer.record_all('first', report.summary())
        summary = f'transport-sensitivity: relative error {report.error:.3g} ({report.summary()["verdict"]})'
        if config['second']:
            h1 = Direction(d_data=d_y0) if d_y0 is not None else h
            h2 = Direction(d_phi=config['psi']) if config['psi'] is not None else h1
            second = second_variation_check(solution_map, h1, h2, config['second_eps'], jobs=config['jobs'])
            writer.field('mixed', CylFn(grid, second.mixed), 'mixed')
            writer.record_all('second', second.summary())
            summary += f', second variation {second.summary()["verdict"]}'
        return Outcome(summary)
