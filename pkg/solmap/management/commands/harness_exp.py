from ...harness import exp_counterexample
from ...serializers import ExpSerializer
from ..base import LabCommand, Outcome


class Command(LabCommand):
    help = 'Per level i, attempt y = log(x) on [-i, i]; levels where x is not positive fail.'
    name = 'harness-exp'
    serializer_class = ExpSerializer
    flags = (
        ('--x', 'x in s: expression, inline list or CSV on [-levels, levels]'),
        ('--levels', 'number of levels'),
        ('--n', 'cells on [-levels, levels]'),
    )

    def run(self, config, writer):
        levels = config['levels']
        x = config['x'].on(-float(levels), float(levels), config['n'], config['params'])
        rows = exp_counterexample(x, levels)
        writer.records('levels', rows, ('level', 'min_x', 'success', 'multiplier', 'error'))
        failed = [row['level'] for row in rows if not row['success']]
        writer.record('exp.failed_levels', ','.join(map(str, failed)))
        summary = f'harness-exp: {levels - len(failed)} of {levels} levels solvable'
        return Outcome(summary, 2 if failed else 0)
