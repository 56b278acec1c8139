import numpy as np

from ...exceptions import ConvergenceError
from ...holo import BiSeries, blowup_family, empty_interior_demo, radius_estimate, series_residual, taylor_solve
from ...sensitivity import Direction, HoloMap, derivative_check
from ...serializers import HoloSerializer
from ..base import LabCommand, Outcome


class Command(LabCommand):
    help = "Solve y' = phi(eta, y), y(0) = y0 by Taylor series and estimate the radius of convergence."
    name = 'holo'
    serializer_class = HoloSerializer
    flags = (
        ('--y0', 'initial value (complex)'),
        ('--phi', 'phi(eta, xi), expanded at the origin'),
        ('--order', 'truncation order'),
        ('--m-max', 'eta degree kept from phi'),
        ('--k-max', 'xi degree kept from phi'),
        ('--tail', 'fraction of nonzero coefficients used by the radius fit'),
        ('--epsilon', 'blow-up family: initial value'),
        ('--family-n', 'blow-up family: exponent n of n(n+1) eta^n xi^2'),
        ('--d-y0', 'initial value direction'),
        ('--psi', 'nonlinearity direction in (eta, xi)'),
        ('--eps', 'central difference step'),
        ('--tolerance', 'relative sup error accepted'),
    )

    def run(self, config, writer):
        if config.get('epsilon') is not None:
            verdict = empty_interior_demo(config['epsilon'], config['family_n'], config['order'])
            y0, phi = blowup_family(config['epsilon'], config['family_n'])
            writer.table('coefficients', ('n', 're', 'im'), taylor_solve(y0, phi, config['order']).csv_rows())
            writer.record_all('family', verdict)
            return Outcome(f'holo: {verdict["verdict"]}, radius {verdict["estimated_radius"]:.6g} '
                           f'(analytic {verdict["analytic_radius"]:.6g})')
        phi = BiSeries.from_expression(config['phi'], config['m_max'], config['k_max'], config['params'])
        y = taylor_solve(config['y0'], phi, config['order'])
        writer.table('coefficients', ('n', 're', 'im'), y.csv_rows())
        checked = max(config['order'] - config['k_max'], 1)
        writer.record('series.residual', float(np.max(np.abs(series_residual(y, phi).coefficients[:checked]))))
        try:
            radius = radius_estimate(y, config['tail'])
        except ConvergenceError as e:
            writer.record('series.radius', 'undetermined')
            summary = f'holo: radius undetermined ({e})'
        else:
            writer.record('series.radius', radius)
            summary = f'holo: radius {radius:.6g}'
        if config['d_y0'] or config['psi'] is not None:
            solution_map = HoloMap(config['y0'], config['phi'], config['order'], config['m_max'], config['k_max'],
                                   config['params'])
            check = derivative_check(solution_map, Direction(d_data=config['d_y0'], d_phi=config['psi']),
                                     config['eps'], config['tolerance'], jobs=config['jobs'])
            writer.table('sensitivity', ('n', 'fd_re', 'fd_im', 'variational_re', 'variational_im'),
                         ((n, a.real, a.imag, b.real, b.imag)
                          for n, (a, b) in enumerate(zip(check.fd_value, check.variational_value))))
            writer.record_all('first', check.summary())
            summary += f', derivative check {check.summary()["verdict"]} ({check.error:.3g})'
        return Outcome(summary)
