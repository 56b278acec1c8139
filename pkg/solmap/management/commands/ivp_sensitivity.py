from ...sensitivity import Direction, ImplicitMap, derivative_check
from ...serializers import IvpSensitivitySerializer
from ..base import LabCommand, Outcome
from .ivp import IVP_FLAGS, ivp_problem


class Command(LabCommand):
    help = 'Compare finite-difference and integrating-factor derivatives of the implicit IVP solution map.'
    name = 'ivp-sensitivity'
    serializer_class = IvpSensitivitySerializer
    flags = IVP_FLAGS + (
        ('--d-eta', 'initial value direction'),
        ('--psi', 'nonlinearity direction in (s, xi1, xi2)'),
        ('--eps', 'central difference step'),
        ('--tolerance', 'relative sup error accepted'),
    )

    def run(self, config, writer):
        solution_map = ImplicitMap(ivp_problem(config))
        h = Direction(d_data=config['d_eta'], d_phi=config['psi'])
        report = derivative_check(solution_map, h, config['eps'], config['tolerance'], richardson=True,
                                  jobs=config['jobs'])
        nodes = solution_map.solution[0].nodes
        writer.table('sensitivity', ('s', 'fd', 'variational'), zip(nodes, report.fd_value, report.variational_value))
        writer.record_all('first', report.summary())
        return Outcome(f'ivp-sensitivity: relative error {report.error:.3g} ({report.summary()["verdict"]})')
