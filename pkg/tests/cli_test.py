# -*- coding: utf-8 -*-

import csv
import json

import pytest

from conftest import exponential_model
from queuelab import __version__
from queuelab.cli import EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, main
from queuelab.model import ModelSpec, ServiceDistribution


def invoke(capsys, out, *argv):
    code = main(['--output-dir', str(out), *argv])
    captured = capsys.readouterr()
    return code, captured.out


def test_stability(capsys, tmp_path, symmetric, write_model):
    code, out = invoke(capsys, tmp_path / 'out', 'stability', write_model(symmetric))
    payload = json.loads(out)

    assert code == EXIT_OK
    assert payload['rho'] == pytest.approx(0.5)
    assert payload['verdict'] == 'Stable'
    assert payload['k2Radical']['atMostOne']
    assert json.loads((tmp_path / 'out' / 'stability.json').read_text()) == payload

    manifest = json.loads((tmp_path / 'out' / 'manifest.json').read_text())
    assert manifest['subcommand'] == 'stability'
    assert manifest['version'] == __version__
    assert manifest['outputs'] == ['stability.json']
    assert len(manifest['modelDigest']) == 64
    assert manifest['exitCode'] == EXIT_OK


def test_stability_verdicts(capsys, tmp_path, critical, supercritical, write_model):
    _, out = invoke(capsys, tmp_path, 'stability', write_model(critical))
    assert json.loads(out)['verdict'] == 'Boundary'

    _, out = invoke(capsys, tmp_path, 'stability', write_model(supercritical))
    assert json.loads(out)['verdict'] == 'Unstable'

    _, out = invoke(capsys, tmp_path, 'stability', '--epsilon', '0.6', write_model(supercritical))
    assert json.loads(out)['verdict'] == 'Boundary'


def test_validate(capsys, tmp_path, symmetric, write_model):
    code, out = invoke(capsys, tmp_path, 'validate', write_model(symmetric))
    assert code == EXIT_OK
    assert json.loads(out) == {'ok': True, 'violations': []}

    bad = {'lambda': [[0.5, -1.0], [1.0, 0.0]], 'lambda0': [0.0, 0.0],
           'service': [{'kind': 'exponential', 'rate': 2.0}, {'kind': 'pareto', 'shape': 0.5, 'scale': 1.0}]}
    code, out = invoke(capsys, tmp_path, 'validate', write_model(bad, 'bad.json'))
    codes = [violation['code'] for violation in json.loads(out)['violations']]

    assert code == EXIT_VALIDATION
    assert sorted(codes) == ['infinite_mean', 'negative_rate', 'no_restart']


def test_invalid_model_exit_code(capsys, tmp_path, write_model):
    path = write_model({'lambda': [[1.0, 2.0]], 'lambda0': [0.5], 'service': [{'kind': 'exponential', 'rate': 1}]})

    assert main(['--output-dir', str(tmp_path), 'stability', path]) == EXIT_VALIDATION
    assert 'lambda must be a square' in capsys.readouterr().err


def test_missing_model_file(capsys, tmp_path):
    assert main(['--output-dir', str(tmp_path), 'stability', str(tmp_path / 'nope.json')]) == EXIT_VALIDATION


def test_restart_only_matters_for_sampling(capsys, tmp_path, write_model):
    path = write_model(exponential_model([[0.5]], [1.0], lam0=[0.0]))

    code, _ = invoke(capsys, tmp_path, 'stability', path)
    assert code == EXIT_OK

    code, _ = invoke(capsys, tmp_path, 'simulate', path, '--seed', '1', '--busy-periods', '10')
    assert code == EXIT_VALIDATION

    code, out = invoke(capsys, tmp_path, 'simulate', path, '--seed', '1', '--busy-periods', '10', '--class', '1')
    assert code == EXIT_OK
    assert json.loads(out)['busyPeriods']['count'] == 10

    code, _ = invoke(capsys, tmp_path, 'simulate', path, '--seed', '1', '--busy-periods', '10',
                     '--initial-state', '2')
    assert code == EXIT_OK

    code, _ = invoke(capsys, tmp_path, 'simulate', path, '--seed', '1', '--horizon', '50', '--sweep', '0.5',
                     '--class', '1')
    assert code == EXIT_VALIDATION


def test_usage_errors(capsys, tmp_path, mm1, write_model):
    path = write_model(mm1)

    assert main(['frobnicate', path]) == EXIT_USAGE
    assert main(['--output-dir', str(tmp_path), 'branching', path]) == EXIT_USAGE
    assert main(['--output-dir', str(tmp_path), 'simulate', path, '--seed', '1']) == EXIT_USAGE
    assert 'usage:' in capsys.readouterr().err


def test_version(capsys):
    with pytest.raises(SystemExit) as excinfo:
        main(['--version'])

    assert excinfo.value.code == 0
    assert __version__ in capsys.readouterr().out


def test_fluid(capsys, tmp_path, symmetric, write_model):
    code, out = invoke(capsys, tmp_path, 'fluid', write_model(symmetric), '--q0', '1,1', '--policy', 'priority:2,1',
                       '--horizon', '10')
    summary = json.loads(out)

    assert code == EXIT_OK
    assert summary['drainTime'] == pytest.approx(2.0)
    assert summary['lyapunovDrainTime'] == pytest.approx(2.0)
    assert summary['policy'] == 'static-priority:2,1'
    assert summary['dynamicsResidual'] < 1e-10

    with open(tmp_path / 'fluid.csv', newline='') as table:
        rows = list(csv.reader(table))
    assert rows[0] == ['t', 'Q_1', 'Q_2', 'Y']
    assert rows[1] == ['0.0', '1.0', '1.0', '0.0']
    assert float(rows[-1][0]) == pytest.approx(10.0)


def test_fluid_unstable_witness(capsys, tmp_path, supercritical, write_model):
    code, out = invoke(capsys, tmp_path, 'fluid', write_model(supercritical), '--q0', '0,0', '--horizon', '5')
    summary = json.loads(out)

    assert code == EXIT_OK
    assert summary['drainTime'] is None
    assert summary['witness']['value'] == pytest.approx(0.5)


def test_fluid_bad_q0(capsys, tmp_path, symmetric, write_model):
    code, _ = invoke(capsys, tmp_path, 'fluid', write_model(symmetric), '--q0', '1,1,1')
    assert code == EXIT_VALIDATION


def test_lst(capsys, tmp_path, mm1, write_model):
    code, out = invoke(capsys, tmp_path, 'lst', write_model(mm1), '--theta-min', '0.01', '--theta-max', '10',
                       '--points', '8')
    summary = json.loads(out)

    assert code == EXIT_OK
    assert summary['points'] == 8
    assert summary['nonIncreasing']
    assert summary['moments']['meanBusy'] == pytest.approx([2.0], rel=1e-5)

    with open(tmp_path / 'lst.csv', newline='') as table:
        rows = list(csv.reader(table))
    assert rows[0] == ['theta', 'g_1', 'residual']
    values = [float(row[1]) for row in rows[1:]]
    assert values == sorted(values, reverse=True)


def test_lst_json_format(capsys, tmp_path, mm1, write_model):
    code = main(['--output-dir', str(tmp_path), '--format', 'json', 'lst', write_model(mm1), '--points', '4'])
    capsys.readouterr()

    assert code == EXIT_OK
    rows = json.loads((tmp_path / 'lst.json').read_text())
    assert len(rows) == 4
    assert set(rows[0]) == {'theta', 'g_1', 'residual'}


def test_lst_unstable_is_numerical_failure(capsys, tmp_path, supercritical, write_model):
    code = main(['--output-dir', str(tmp_path), 'lst', write_model(supercritical)])

    assert code == EXIT_NUMERICAL
    assert 'requires rho(M) <= 1' in capsys.readouterr().err


def test_lst_non_convergence(capsys, tmp_path, symmetric, write_model):
    config = tmp_path / 'config.yaml'
    config.write_text('lst:\n  max_iter: 1\n')

    code = main(['--config', str(config), '--output-dir', str(tmp_path), 'lst', write_model(symmetric)])
    assert code == EXIT_NUMERICAL
    assert 'numerical failure' in capsys.readouterr().err


@pytest.mark.parametrize('argv, expected', [
    (['lst', 'supercritical.json'], EXIT_NUMERICAL),
    (['stability', 'nope.json'], EXIT_VALIDATION),
])
def test_manifest_written_for_failed_runs(capsys, tmp_path, supercritical, write_model, argv, expected):
    write_model(supercritical, 'supercritical.json')
    command, name = argv
    code = main(['--output-dir', str(tmp_path / 'out'), command, str(tmp_path / name)])
    capsys.readouterr()

    manifest = json.loads((tmp_path / 'out' / 'manifest.json').read_text())
    assert code == expected
    assert manifest['exitCode'] == expected
    assert manifest['subcommand'] == command
    assert manifest['outputs'] == []


def test_branching_is_reproducible(capsys, tmp_path, symmetric, write_model):
    path = write_model(symmetric)
    for name in ('a', 'b'):
        code, _ = invoke(capsys, tmp_path / name, 'branching', path, '--seed', '7', '--reps', '2000')
        assert code == EXIT_OK

    for name in ('branching.json', 'manifest.json'):
        assert (tmp_path / 'a' / name).read_bytes() == (tmp_path / 'b' / name).read_bytes()

    summary = json.loads((tmp_path / 'a' / 'branching.json').read_text())
    assert summary['consistent']
    assert summary['meanBusy']['closedForm'] == pytest.approx([1.0, 1.0])
    assert json.loads((tmp_path / 'a' / 'manifest.json').read_text())['seed'] == 7


def test_branching_single_class_with_z(capsys, tmp_path, mm1, write_model):
    code, out = invoke(capsys, tmp_path, 'branching', write_model(mm1), '--seed', '3', '--reps', '500',
                       '--class', '1', '--z', '100')
    summary = json.loads(out)

    assert code == EXIT_OK
    assert len(summary['classes']) == 1
    assert summary['scaledBusyPeriod'][0]['onePlusBeta'] == pytest.approx(2.0)

    code, _ = invoke(capsys, tmp_path, 'branching', write_model(mm1), '--seed', '3', '--class', '2')
    assert code == EXIT_VALIDATION


def test_simulate_busy_periods(capsys, tmp_path, symmetric, write_model):
    trace = tmp_path / 'events.tsv'
    code, out = invoke(capsys, tmp_path, 'simulate', write_model(symmetric), '--seed', '5', '--busy-periods',
                       '200', '--class', '2', '--trace', str(trace), '--policy', 'preemptive:2,1')
    summary = json.loads(out)

    assert code == EXIT_OK
    assert summary['policy'] == 'preemptive:2,1'
    assert summary['busyPeriods']['count'] == 200
    assert summary['busyPeriods']['perClass'][0]['class'] == 2
    assert summary['busyPeriods']['perClass'][0]['oracleMeanLength'] == pytest.approx(1.0)
    assert trace.read_text()
    assert (tmp_path / 'busy-periods.csv').exists()


def test_simulate_horizon_audit(capsys, tmp_path, symmetric, write_model):
    code, out = invoke(capsys, tmp_path, 'simulate', write_model(symmetric), '--seed', '5', '--horizon', '200',
                       '--audit', '--initial-state', '3,2')
    run = json.loads(out)['run']

    assert code == EXIT_OK
    assert sum(run['allocation']) + run['idle'] == pytest.approx(200.0)


def test_simulate_sweep(capsys, tmp_path, mm1, write_model):
    code, out = invoke(capsys, tmp_path, 'simulate', write_model(mm1), '--seed', '5', '--horizon', '2000',
                       '--sweep', '0.5,4')
    probe = json.loads(out)

    assert code == EXIT_OK
    assert probe['kappaStar'] == pytest.approx(2.0)
    assert [row['diverging'] for row in probe['rows']] == [False, True]

    code, _ = invoke(capsys, tmp_path, 'simulate', write_model(mm1), '--seed', '5', '--busy-periods', '10',
                     '--sweep', '0.5,4')
    assert code == EXIT_VALIDATION


def test_tail(capsys, tmp_path, write_model):
    spec = ModelSpec([[0.25]], [0.25], [ServiceDistribution.pareto(2.0, 1.0)])
    code, out = invoke(capsys, tmp_path, 'tail', write_model(spec), '--seed', '2', '--reps', '5000',
                       '--x', '4,8')
    summary = json.loads(out)

    assert code == EXIT_OK
    assert summary['d'] == pytest.approx(2.0)
    assert len(summary['containsD']) == 2
    assert summary['oneBigJump'] == pytest.approx([(1 / 2) ** 2 / 0.5, (1 / 4) ** 2 / 0.5])

    with open(tmp_path / 'tail.csv', newline='') as table:
        rows = list(csv.reader(table))
    assert rows[0][0] == 'x' and len(rows) == 3


def test_tail_needs_pareto(capsys, tmp_path, mm1, write_model):
    code, _ = invoke(capsys, tmp_path, 'tail', write_model(mm1), '--seed', '2', '--reps', '10')
    assert code == EXIT_NUMERICAL
