from dataclasses import replace

from ...implicit_ode import ImplicitIVP, integrate, regularity_scan
from ...serializers import IvpSerializer
from ..base import LabCommand, Outcome

IVP_FLAGS = (
    ('--eta', 'initial value y(0)'),
    ('--phi', 'implicit equation phi(s, xi1, xi2) = 0 with xi1 = y, xi2 = y\''),
    ('--n', 'RK4 steps on [0, 1]'),
    ('--slope-guess', "Newton start for y'(0)"),
    ('--threshold', 'regularity threshold on |p3|'),
)


def ivp_problem(config) -> ImplicitIVP:
    return ImplicitIVP(config['eta'], config['phi'], config['n'], config['slope_guess'], config['threshold'],
                       config['params'])


class Command(LabCommand):
    help = "Integrate the implicit IVP phi(s, y, y') = 0, y(0) = eta, and trace its regularity."
    name = 'ivp'
    serializer_class = IvpSerializer
    flags = IVP_FLAGS + (
        ('--scan', 'comma separated values of a parameter to scan for regularity'),
        ('--scan-param', 'name of the scanned parameter'),
    )

    def run(self, config, writer):
        problem = ivp_problem(config)
        y, trace = integrate(problem)
        writer.table('solution', ('s', 'y', 'slope', 'p2', 'p3'),
                     zip(y.nodes, y.values, trace.slope.values, trace.p2.values, trace.p3.values))
        writer.record_all('report', {'min_abs_p3': trace.min_abs_p3, 'regular': trace.regular})
        if config['scan']:
            name = config['scan_param']
            rows = regularity_scan(lambda c: replace(problem, params={**problem.params, name: c}), config['scan'],
                                   config['jobs'])
            writer.records('scan', rows, ('parameter', 'min_abs_p3', 'regular', 'error'))
            writer.record('scan.irregular', sum(1 for row in rows if not row['regular']))
        summary = f'ivp: y(1) = {y.values[-1]:.17g}, min |p3| = {trace.min_abs_p3:.3g}'
        if not trace.regular:
            return Outcome(summary + ', irregular', 2)
        return Outcome(summary)
