import numpy as np

from ...artifacts import ArtifactWriter
from ...exceptions import StagnationError
from ...serializers import TransportSerializer
from ...transport import SolveReport, solve
from ..base import TRANSPORT_FLAGS, LabCommand, Outcome, picard_config, transport_problem

STEP_COLUMNS = ('t0', 't2', 'A', 'M', 'R', 'L', 'alpha', 'xi_window', 'cutoff_level', 'iterations', 'ratio')


def write_report(writer: ArtifactWriter, report: SolveReport):
    writer.field('solution', report.solution)
    writer.table('steps', STEP_COLUMNS, ([getattr(step, c) for c in STEP_COLUMNS] for step in report.steps))
    writer.record_all('report', {
        'windows': len(report.steps),
        'iterations': report.iterations,
        'residual': report.residual,
        'regular': report.regular,
        'max_alpha': report.max_alpha,
        'max_ratio': report.max_ratio,
    })
    if report.steps:
        first = report.steps[0]
        writer.record_all('constants', {'A': first.A, 'M': first.M, 'R': first.R, 'L': first.L,
                                        'alpha': first.alpha})
    grid = report.solution.grid
    writer.record_all('grid', {'n_theta': grid.n_theta, 'n_t': grid.n_t, 'dt': grid.dt, 'T': grid.T})


class Command(LabCommand):
    help = 'Solve y_t + y_eta = phi(t, eta, y) on [0, T] x S^1 by windowed Picard iteration.'
    name = 'transport-solve'
    serializer_class = TransportSerializer
    flags = TRANSPORT_FLAGS + (
        ('--T', 'final time'),
        ('--exact', 'closed-form solution in (t, eta) to compare against'),
    )

    def run(self, config, writer):
        problem = transport_problem(config)
        try:
            report = solve(problem, picard_config(config))
        except StagnationError as e:
            if e.report is not None:
                write_report(writer, e.report)
            writer.record('report.blowup_estimate', e.blowup_estimate)
            raise
        write_report(writer, report)
        summary = (f'transport-solve: {len(report.steps)} windows, {report.iterations} iterations, '
                   f'residual {report.residual:.3g}')
        if exact := config.get('exact'):
            t, eta = report.solution.grid.mesh()
            reference = exact.eval({**config['params'], 't': t, 'eta': eta, 'xi': 0.0})
            error = float(np.max(np.abs(report.solution.values - reference)))
            writer.record('report.exact_error', error)
            summary += f', sup error {error:.3g}'
        if not report.regular:
            return Outcome(summary + ', linearization irregular', 2)
        return Outcome(summary)
