from ...holo import counterexample_run
from ...serializers import HoloCounterexampleSerializer
from ..base import LabCommand, Outcome


class Command(LabCommand):
    help = 'Distances of y_n = a_n s / (s - a_n^2 eta) to s / (s - eta) on |eta| <= r, and the radius of the limit.'
    name = 'holo-counterexample'
    serializer_class = HoloCounterexampleSerializer
    flags = (
        ('--r', 'radius of the sup-norm disc'),
        ('--s', 'pole of the limit solution'),
        ('--n-max', 'last member of the sequence'),
        ('--order', 'Taylor order of the limit series'),
        ('--points', 'sample points on the circle |eta| = r'),
    )

    def run(self, config, writer):
        report = counterexample_run(config['r'], config['s'], config['n_max'], config['points'], config['order'])
        writer.records('distances', report['distances'], ('n', 'distance'))
        writer.record_all('counterexample', {'ratio': report['ratio'], 'radius_y1': report['radius_y1'],
                                             'extension_fails': report['extension_fails']})
        return Outcome(f'holo-counterexample: ratio {report["ratio"]:.4g}, limit radius {report["radius_y1"]:.4g}, '
                       f'extension {"fails" if report["extension_fails"] else "exists"}')
