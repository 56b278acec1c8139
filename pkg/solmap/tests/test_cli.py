import io

import pytest
from django.conf import settings
from django.test import override_settings

from solmap.artifacts import config_hash, format_value
from solmap.cli import SUBCOMMANDS, dispatch
from solmap.conf import DEFAULTS, lab_settings


def run(*argv: str) -> tuple[int, str, str]:
    stdout, stderr = io.StringIO(), io.StringIO()
    code = dispatch(list(argv), stdout, stderr)
    return code, stdout.getvalue(), stderr.getvalue()


def manifest(directory) -> dict[str, str]:
    lines = (directory / 'manifest.txt').read_text().splitlines()
    assert lines == sorted(lines)
    return dict(line.split('=', 1) for line in lines)


TRANSPORT = ('transport-solve', '--y0', 'sin(2*pi*s)', '--phi', 'xi', '--T', '0.5', '--n', '32')


def test_usage():
    code, out, _ = run()
    assert code == 1
    assert all(name in out for name in SUBCOMMANDS)
    assert run('help')[0] == 0


def test_unknown_subcommand():
    code, _, err = run('transport-solver')
    assert code == 1
    assert "Unknown subcommand 'transport-solver'" in err


def test_transport_solve(tmp_path):
    code, out, _ = run(*TRANSPORT, '--exact', 'exp(t)*sin(2*pi*(eta - t))', '--out', str(tmp_path))
    assert code == 0
    assert out.startswith('transport-solve: 16 windows')
    entries = manifest(tmp_path)
    assert entries['command'] == 'transport-solve'
    assert entries['exit_code'] == '0'
    assert entries['config.T'] == '0.5'
    assert 'config.out' not in entries
    assert entries['files'] == 'solution.csv,solution.dat,steps.csv'
    assert float(entries['report.exact_error']) <= 1e-3
    header = (tmp_path / 'solution.csv').read_bytes().split(b'\r\n')[0]
    assert header == b't,eta,y'


def test_identical_runs_are_byte_identical(tmp_path):
    first, second = tmp_path / 'a', tmp_path / 'b'
    assert run(*TRANSPORT, '--out', str(first))[0] == 0
    assert run(*TRANSPORT, '--out', str(second))[0] == 0
    for name in ('solution.csv', 'solution.dat', 'steps.csv', 'manifest.txt'):
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_config_file_and_flag_override(tmp_path):
    config = tmp_path / 'run.conf'
    config.write_text('# riccati\ny0 = 0.5\nphi = xi^2\nT = 1.0\nn = 16\nmax-iter = 100\n')
    out = tmp_path / 'out'
    assert run('transport-solve', '--config', str(config), '--n', '32', '--out', str(out))[0] == 0
    entries = manifest(out)
    assert entries['config.n'] == '32'
    assert entries['config.max_iter'] == '100'


def test_unknown_config_key(tmp_path):
    config = tmp_path / 'run.conf'
    config.write_text('y0 = 0.5\nphi = xi\nT = 1.0\nhorizon = 2\n')
    code, _, err = run('transport-solve', '--config', str(config), '--out', str(tmp_path))
    assert code == 1
    assert 'horizon' in err


@pytest.mark.parametrize('argv, message', [
    (('transport-solve', '--y0', '0.5', '--phi', 'xi', '--T', '0.5', '--n', '4'), 'n:'),
    (('transport-solve', '--y0', '0.5', '--phi', 'xi + q', '--T', '0.5'), 'phi:'),
    (('transport-solve', '--y0', '0.5', '--phi', 'xi', '--T', '0.501', '--n', '32'), 'T:'),
    (('transport-solve', '--y0', '0.5', '--phi', 'xi'), 'T:'),
    (('holo-counterexample', '--r', '0.9', '--s', '0.5'), '0 < r < s < 1'),
])
def test_invalid_configuration(tmp_path, argv, message):
    code, _, err = run(*argv, '--out', str(tmp_path))
    assert code == 1
    assert message in err


def test_parameters_are_declared(tmp_path):
    code, _, _ = run('transport-solve', '--y0', '0.5', '--phi', 'c*xi', '--params', 'c=0.5', '--T', '0.5',
                     '--n', '16', '--out', str(tmp_path))
    assert code == 0
    assert manifest(tmp_path)['config.params'] == 'c=0.5'


def test_irregular_ivp_exits_with_regularity_code(tmp_path):
    code, _, err = run('ivp', '--eta', '0', '--phi', 'xi2^2 - t', '--out', str(tmp_path))
    assert code == 2
    assert 'SlopeResolutionError' in err
    entries = manifest(tmp_path)
    assert entries['exit_code'] == '2'
    assert entries['error.code'] and entries['error.message']


def test_ivp_sensitivity(tmp_path):
    code, out, _ = run('ivp-sensitivity', '--eta', '0.3', '--phi', 'xi2 - sin(xi1) - s', '--d-eta', '1',
                       '--out', str(tmp_path))
    assert code == 0
    assert manifest(tmp_path)['first.verdict'] == 'pass'


def test_stagnation_exits_with_convergence_code(tmp_path):
    code, _, _ = run('transport-solve', '--y0', '0.5', '--phi', 'xi^2', '--T', '1.5', '--n', '64',
                     '--policy', 'lemma-c', '--out', str(tmp_path))
    assert code == 3
    entries = manifest(tmp_path)
    assert entries['exit_code'] == '3'
    assert 'report.blowup_estimate' in entries


def test_harness_exp_reports_failed_level(tmp_path):
    code, _, _ = run('harness-exp', '--x', 's + 1.5', '--levels', '2', '--out', str(tmp_path))
    assert code == 2
    assert manifest(tmp_path)['exp.failed_levels'] == '2'
    rows = (tmp_path / 'levels.csv').read_text().splitlines()
    assert rows[0] == 'level,min_x,success,multiplier,error'
    assert rows[1].split(',')[2] == 'true' and rows[2].split(',')[2] == 'false'


def test_harness_exp_all_levels(tmp_path):
    assert run('harness-exp', '--x', '1', '--levels', '3', '--n', '60', '--out', str(tmp_path))[0] == 0


def test_harness_consistency(tmp_path):
    code, out, _ = run('harness-consistency', '--y0', '0.5', '--phi', 'xi^2', '--horizons', '0.5,1.0',
                       '--n', '32', '--trials', '2', '--out', str(tmp_path))
    assert code == 0
    entries = manifest(tmp_path)
    assert float(entries['consistency.max_error']) <= 1e-10
    assert entries['consistency.failed_levels'] == '0'
    assert float(entries['uniqueness.distance']) <= 1e-10


def test_bvp_with_direction(tmp_path):
    code, _, _ = run('bvp', '--eta0', '0', '--eta1', '0', '--phi', '-exp(xi1)', '--n', '100', '--d-eta0', '0.3',
                     '--out', str(tmp_path))
    assert code == 0
    entries = manifest(tmp_path)
    assert entries['newton.regular'] == 'true'
    assert entries['first.verdict'] == 'pass'


@pytest.mark.parametrize('n', ['50', '100', '200'])
def test_bvp_at_resonance(tmp_path, n):
    code, _, _ = run('bvp', '--eta0', '0', '--eta1', '0', '--phi', '-pi^2*xi1', '--n', n, '--out', str(tmp_path))
    assert code == 2
    assert manifest(tmp_path)['newton.regular'] == 'false'


def test_resonance_scan(tmp_path):
    code, out, _ = run('bvp-resonance-scan', '--rmin', '-45', '--rmax', '0', '--steps', '226', '--n', '50',
                       '--out', str(tmp_path))
    assert code == 0
    assert out.strip().endswith('2 dips')


def test_holo_blowup_family(tmp_path):
    code, out, _ = run('holo', '--epsilon', '0.5', '--family-n', '3', '--out', str(tmp_path))
    assert code == 0
    assert manifest(tmp_path)['family.blows_up_inside'] == 'true'


def test_holo_counterexample(tmp_path):
    code, _, _ = run('holo-counterexample', '--r', '0.5', '--s', '0.8', '--out', str(tmp_path))
    assert code == 0
    assert manifest(tmp_path)['counterexample.extension_fails'] == 'true'


def test_convergence_study(tmp_path):
    code, _, _ = run('convergence-study', '--y0', '0.5', '--phi', 'xi^2', '--T', '1', '--exact', '1/(2 - t)',
                     '--resolutions', '32,64', '--orders', '1', '--out', str(tmp_path))
    assert code == 0
    assert float(manifest(tmp_path)['convergence.last_order']) >= 1.85


def test_format_value():
    assert format_value(0.1) == '0.10000000000000001'
    assert format_value(True) == 'true'
    assert format_value(float('nan')) == 'nan'
    assert format_value(-float('inf')) == '-inf'
    assert format_value(1 - 2j) == '1-2j'
    assert format_value(None) == ''
    with override_settings(SOLMAP={'SIGNIFICANT_DIGITS': 6}):
        assert format_value(1 / 3) == '0.333333'


def test_config_hash_ignores_key_order():
    assert config_hash({'a': 1, 'b': 0.5}) == config_hash({'b': 0.5, 'a': 1})
    assert config_hash({'a': 1}) != config_hash({'a': 2})


def test_project_settings_only_override():
    assert set(settings.SOLMAP) <= set(DEFAULTS)
    assert lab_settings.SPECTRAL_GAP == DEFAULTS['SPECTRAL_GAP']
    with override_settings(SOLMAP={'SPECTRAL_GAP': 0.5}):
        assert lab_settings.SPECTRAL_GAP == 0.5
    assert lab_settings.SPECTRAL_GAP == DEFAULTS['SPECTRAL_GAP']
