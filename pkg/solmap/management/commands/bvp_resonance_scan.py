from ...bvp import range_orthogonality_check, resonance_dips, resonance_scan
from ...serializers import ResonanceScanSerializer
from ..base import LabCommand, Outcome


class Command(LabCommand):
    help = "Scan sigma_min of u -> u'' - r u over r and report the resonance dips."
    name = 'bvp-resonance-scan'
    serializer_class = ResonanceScanSerializer
    flags = (
        ('--rmin', 'left end of the r range'),
        ('--rmax', 'right end of the r range'),
        ('--steps', 'scan points'),
        ('--n', 'interior nodes'),
        ('--fraction', 'dips lie below this fraction of the scan maximum'),
        ('--mode', 'resonant mode for the orthogonality check'),
        ('--v', 'zero-boundary v in s for the orthogonality check'),
    )

    def run(self, config, writer):
        scan = resonance_scan(config['rmin'], config['rmax'], config['steps'], config['n'], config['jobs'])
        dips = resonance_dips(scan, config['fraction'])
        writer.records('scan', scan, ('r', 'sigma_min'))
        writer.records('dips', dips, ('r', 'sigma_min'))
        writer.record('scan.points', len(scan))
        writer.record('scan.dips', ','.join(f'{dip["r"]:.6g}' for dip in dips))
        summary = f'bvp-resonance-scan: {len(scan)} points, {len(dips)} dips'
        if config.get('mode') is not None:
            v = config['v'].on(0.0, 1.0, config['n'] + 1, config['params'])
            check = range_orthogonality_check(config['mode'], v)
            writer.record_all('orthogonality', check)
            summary += f', mode {config["mode"]} {"solvable" if check["solvable"] else "unsolvable"}'
        return Outcome(summary)
