"""
End-to-end tests of the command line: exit codes, reports and config errors
"""
import json
import os

import pytest

from main import RunReport, main

CONFIG_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'configs')

ZERO_DATA_CONFIG = """\
# charge-free vacuum on a small lattice
shape = 14,14,14
h = 0.1
dt = 0.02
steps = 2
margin = 6
e = 0
free_data = zero
seed = 3
"""


def write_config(tmp_path, text, name='run.env'):
    path = tmp_path / name
    path.write_text(text, encoding='utf-8')
    return str(path)


def test_verify_passes_and_writes_a_report(tmp_path):
    out = tmp_path / 'verify.json'
    assert main(['--out', str(out), 'verify', '--trials', '50']) == 0
    report = json.loads(out.read_text(encoding='utf-8'))
    assert report['command'] == 'verify'
    assert report['passed'] is True
    assert 'wall_time' not in report
    assert {c['name'] for c in report['checks']} >= {'clifford_identities', 'current_is_null',
                                                      'majorana_axial_current_vanishes',
                                                      'ghost_time_component_vanishes'}
    ghost = next(c for c in report['checks'] if c['name'] == 'ghost_time_component_vanishes')
    assert ghost['status'] == 'pass' and ghost['measured'] <= 1e-12


def test_equal_seeds_give_identical_report_bytes(tmp_path):
    first, second = tmp_path / 'a.json', tmp_path / 'b.json'
    main(['--seed', '9', '--out', str(first), 'verify', '--trials', '20'])
    main(['--seed', '9', '--out', str(second), 'verify', '--trials', '20'])
    assert first.read_bytes() == second.read_bytes()


def test_timing_flag_adds_the_wall_time(tmp_path):
    out = tmp_path / 'timed.json'
    main(['--timing', '--out', str(out), 'verify', '--trials', '5'])
    assert json.loads(out.read_text(encoding='utf-8'))['wall_time'] >= 0.0


def test_zero_trials_is_a_usage_error():
    with pytest.raises(SystemExit) as excinfo:
        main(['verify', '--trials', '0'])
    assert excinfo.value.code == 2


def test_example_with_massless_case(tmp_path):
    out = tmp_path / 'example.json'
    assert main(['--out', str(out), 'example', '--mass', '0', '--mass', '1']) == 0
    report = json.loads(out.read_text(encoding='utf-8'))
    names = [c['name'] for c in report['checks']]
    assert 'example[m=0.0].vanishing_determinant' in names
    assert report['results']['m=1.0']['det'] == pytest.approx(2.0)


def test_roundtrip_from_shipped_config():
    assert main(['roundtrip', '--config', os.path.join(CONFIG_DIR, 'roundtrip.env')]) == 0


def test_evolve_charge_free_vacuum(tmp_path):
    path = write_config(tmp_path, ZERO_DATA_CONFIG)
    out = tmp_path / 'evolve.json'
    xlsx = tmp_path / 'evolve.xlsx'
    assert main(['--out', str(out), '--xlsx', str(xlsx), 'evolve', '--config', path]) == 0
    report = json.loads(out.read_text(encoding='utf-8'))
    assert report['config']['e'] == 0.0
    assert xlsx.exists()


def test_bad_config_returns_two(tmp_path):
    path = write_config(tmp_path, "shape = 14,14,14\ncolour = blue\n")
    assert main(['evolve', '--config', path]) == 2
    assert main(['roundtrip', '--config', str(tmp_path / 'missing.env')]) == 2


def test_report_without_checks_fails():
    report = RunReport('verify')
    assert not report.passed
    assert report.exit_code == 1
    report.add_check('one', True, 0.0, 1.0)
    assert report.exit_code == 0
    report.add_error('two', ValueError('boom'))
    assert report.exit_code == 1
