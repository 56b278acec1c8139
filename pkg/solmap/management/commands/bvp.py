from ...bvp import BVProblem, newton_solve
from ...sensitivity import BoundaryMap, Direction, derivative_check
from ...serializers import BvpSerializer
from ..base import LabCommand, Outcome


class Command(LabCommand):
    help = "Solve y'' = phi(s, y, y'), y(0) = eta0, y(1) = eta1 by Newton iteration on the Green operator form."
    name = 'bvp'
    serializer_class = BvpSerializer
    flags = (
        ('--eta0', 'left boundary value'),
        ('--eta1', 'right boundary value'),
        ('--phi', 'right-hand side phi(s, xi1, xi2) with xi1 = y, xi2 = y\''),
        ('--n', 'interior nodes'),
        ('--tol', 'Newton tolerance on the sup norm of f0'),
        ('--max-steps', 'Newton steps'),
        ('--d-eta0', 'left boundary direction'),
        ('--d-eta1', 'right boundary direction'),
        ('--psi', 'nonlinearity direction in (s, xi1, xi2)'),
        ('--eps', 'central difference step'),
        ('--tolerance', 'relative sup error accepted'),
    )

    def run(self, config, writer):
        problem = BVProblem(config['eta0'], config['eta1'], config['phi'], config['n'], config['params'])
        y, report = newton_solve(problem, tolerance=config['tol'], max_steps=config['max_steps'])
        writer.table('solution', ('s', 'y'), zip(y.nodes, y.values))
        writer.table('newton', ('step', 'residual'), enumerate(report['residuals']))
        writer.record_all('newton', {'steps': report['steps'], 'regular': report['regular'],
                                     'sigma_min': report['sigma_min'], 'condition': report['condition']})
        summary = f'bvp: {report["steps"]} Newton steps, sigma_min {report["sigma_min"]:.3g}'
        if not report['regular']:
            return Outcome(summary + ', linearization near-singular', 2)
        if config['d_eta0'] or config['d_eta1'] or config['psi'] is not None:
            h = Direction(d_data=(config['d_eta0'], config['d_eta1']), d_phi=config['psi'])
            check = derivative_check(BoundaryMap(problem), h, config['eps'], config['tolerance'], jobs=config['jobs'])
            writer.table('sensitivity', ('s', 'fd', 'variational'), zip(y.nodes, check.fd_value, check.variational_value))
            writer.record_all('first', check.summary())
            summary += f', derivative check {check.summary()["verdict"]} ({check.error:.3g})'
        return Outcome(summary)
