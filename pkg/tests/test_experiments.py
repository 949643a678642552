# -*- coding: utf-8 -*-
import json
import math

import pandas as pd
import pytest

from driftlab.errors import ChainError, EAError, SpecValidationError
from driftlab.services import experiment_service
from driftlab.services.experiment_service import columns_for, run_experiment
from driftlab.services.experiment_spec import BudgetFormula, load_spec, noise_from_grid, noise_preset, validate_spec
from driftlab.utils.result_writer import read_json


# ==============================================================================
# VALIDATION
# ==============================================================================

def test_valid_spec(decline_spec):
    spec = validate_spec(decline_spec)
    assert spec.kind == 'DECLINE_SCAN'
    assert spec.cells() == [{'a': 0.5, 'n': 100}, {'a': 0.5, 'n': 1000},
                            {'a': 2.0, 'n': 100}, {'a': 2.0, 'n': 1000}]
    assert spec.prefix == 'decline_scan'


def test_spec_from_text(decline_spec):
    assert validate_spec(json.dumps(decline_spec)).replications == 40


def test_missing_and_unknown_fields_are_all_reported(decline_spec):
    del decline_spec['master_seed']
    decline_spec['colour'] = 'blue'
    with pytest.raises(SpecValidationError) as info:
        validate_spec(decline_spec)
    assert info.value.code == 'CONFIG_INVALID'
    assert any('master_seed' in e for e in info.value.errors)
    assert any('colour' in e for e in info.value.errors)


@pytest.mark.parametrize('patch, fragment', [
    ({'kind': 'WARP_DRIVE'}, 'kind'),
    ({'replications': 0}, 'replications'),
    ({'budget': 'n-1'}, 'budget'),
    ({'budget': "__import__('os')"}, 'budget'),
    ({'grid': {'a': [0], 'n': [10]}}, 'grid.a'),
    ({'grid': {'a': [1], 'n': [0]}}, 'grid.n'),
    ({'start': 'ones'}, 'start'),
    ({'output': {'dir': ''}}, 'output.dir'),
])
def test_invalid_fields(decline_spec, patch, fragment):
    decline_spec.update(patch)
    with pytest.raises(SpecValidationError) as info:
        validate_spec(decline_spec)
    assert any(fragment in e for e in info.value.errors)


def test_kind_specific_rules():
    easy = {'kind': 'MONOTONE_EASY', 'grid': {'n': [50], 'c': [1.5]}, 'replications': 1,
            'budget': 'n', 'master_seed': 0}
    with pytest.raises(SpecValidationError):
        validate_spec(easy)
    bounds = {'kind': 'BOUNDS_CHECK', 'grid': {'a': [2], 'n': [50]}, 'replications': 1,
              'budget': 'n', 'master_seed': 0}
    with pytest.raises(SpecValidationError):
        validate_spec(bounds)
    linear = {'kind': 'LINEAR_CONSTANT', 'grid': {'n': [50], 'c': [1], 'fitness': ['leadingones']},
              'replications': 1, 'budget': 'n', 'master_seed': 0}
    with pytest.raises(SpecValidationError):
        validate_spec(linear)


def test_budget_formula():
    assert BudgetFormula('n*n')(10) == 100
    assert BudgetFormula('500*n*ln(n)')(100) == math.ceil(500 * 100 * math.log(100))
    assert BudgetFormula(1000)(7) == 1000
    for text in ('n-1', 'n/2', 'exp(n)', 'm*n', 'True'):
        with pytest.raises(ValueError):
            BudgetFormula(text)


def test_load_spec(write_spec, decline_spec):
    assert load_spec(str(write_spec(decline_spec))).master_seed == 7


# ==============================================================================
# BRUIT
# ==============================================================================

def test_noise_preset_delta2():
    c = 1.0
    noise = noise_preset(1.0, c, c + math.log(2) / 2)
    assert noise.delta2 == pytest.approx(0.5, rel=1e-12)


def test_noise_preset_underflow_is_flagged():
    noise = noise_preset(1.0, 0.5, 1.0)
    assert noise.delta1 == 0.0
    assert noise.notes['flag'] == 'UNDERFLOW'
    assert noise.notes['log10_delta1'] < -307


def test_noise_preset_ranges():
    with pytest.raises(EAError) as info:
        noise_preset(1.0, 2.0, 1.0)
    assert info.value.code == 'BAD_RANGE'
    with pytest.raises(EAError):
        noise_preset(0.0, 0.5, 1.0)


def test_noise_from_grid():
    assert noise_from_grid('none', 1.0).noiseless
    explicit = noise_from_grid({'delta1': 0.1, 'adversary1': 'ALWAYS_REJECT'}, 1.0)
    assert explicit.delta1 == 0.1 and explicit.adversary1.value == 'ALWAYS_REJECT'


# ==============================================================================
# EXÉCUTION
# ==============================================================================

def test_decline_scan_is_reproducible(tmp_path, decline_spec):
    spec = validate_spec(decline_spec)
    first = run_experiment(spec, threads=1, out_dir=str(tmp_path / 'one'))
    second = run_experiment(spec, threads=4, out_dir=str(tmp_path / 'four'))
    assert first.paths['csv'].read_bytes() == second.paths['csv'].read_bytes()
    assert first.paths['json'].read_bytes() == second.paths['json'].read_bytes()

    frame = pd.read_csv(first.paths['csv'])
    assert list(frame.columns) == columns_for(spec)
    assert len(frame) == 4
    assert (frame['status'] == 'OK').all()
    small = frame[frame['a'] == 0.5]
    assert small['theory_value'].notna().all()


def test_csv_format(tmp_path, decline_spec):
    result = run_experiment(validate_spec(decline_spec), out_dir=str(tmp_path))
    raw = result.paths['csv'].read_bytes()
    assert raw.startswith(b'kind,a,n,replications,mean,')
    assert b'\r\n' in raw
    text = raw.decode('utf-8')
    assert ',true,' in text


def test_summary_replays_the_run(tmp_path, decline_spec):
    spec = validate_spec(decline_spec)
    first = run_experiment(spec, out_dir=str(tmp_path / 'first'))
    summary = read_json(first.paths['json'])
    assert summary['tool'] == 'driftlab'
    assert 'generated_at' not in summary
    replay = run_experiment(validate_spec(summary['spec']), out_dir=str(tmp_path / 'replay'))
    assert replay.paths['csv'].read_bytes() == first.paths['csv'].read_bytes()


def test_failing_cell_is_recorded(tmp_path, decline_spec, monkeypatch):
    original = experiment_service.RUNNERS['DECLINE_SCAN']

    def flaky(ctx):
        if ctx.cell['a'] == 2.0 and ctx.cell['n'] == 100:
            raise ChainError('SINGULAR', 'cellule forcée en erreur')
        return original(ctx)

    monkeypatch.setitem(experiment_service.RUNNERS, 'DECLINE_SCAN', flaky)
    result = run_experiment(validate_spec(decline_spec), out_dir=str(tmp_path))
    assert result.failed_cells == 1
    failed = [r for r in result.rows if r['status'] == 'ERROR']
    assert failed[0]['error'] == 'SINGULAR'
    assert result.summary['failed_cells'] == 1


def test_linear_constant_cell(tmp_path):
    spec = validate_spec({
        'kind': 'LINEAR_CONSTANT', 'grid': {'n': [32], 'c': [1.0], 'fitness': ['onemax', 'binval']},
        'replications': 8, 'budget': '200*n*ln(n)', 'master_seed': 3,
    })
    result = run_experiment(spec, out_dir=str(tmp_path))
    for row in result.rows:
        assert row['status'] == 'OK'
        assert row['theory_value'] == pytest.approx(math.e)
        assert row['ratio'] > 0


def test_bounds_check_cell(tmp_path):
    spec = validate_spec({
        'kind': 'BOUNDS_CHECK', 'grid': {'a': [1], 'n': [100]},
        'replications': 200, 'budget': '100*n', 'master_seed': 5,
    })
    row = run_experiment(spec, out_dir=str(tmp_path)).rows[0]
    assert row['bound_holds'] is True
    assert row['theory_value'] <= row['mult_mean_bound']
    for slot in (1, 2, 3):
        p = row[f'tail_emp_k{slot}']
        assert 0.0 <= p <= 1.0
        assert row[f'tail_se_k{slot}'] == pytest.approx(math.sqrt(p * (1 - p) / 200))
    assert 'tail_se_k1' in columns_for(spec)


def test_oracle_compare_cell(tmp_path):
    spec = validate_spec({
        'kind': 'ORACLE_COMPARE', 'grid': {'n': [16], 'c': [1.0]},
        'replications': 300, 'budget': '1000*n', 'master_seed': 2,
    })
    row = run_experiment(spec, out_dir=str(tmp_path)).rows[0]
    assert abs(row['z_score']) < 4


def test_density_track_cell(tmp_path):
    spec = validate_spec({
        'kind': 'DENSITY_TRACK', 'grid': {'n': [100], 'c': [1.0]},
        'replications': 2, 'budget': '100*n', 'master_seed': 1,
    })
    result = run_experiment(spec, out_dir=str(tmp_path))
    row = result.rows[0]
    assert row['fitness'] == 'binval'
    assert 0.0 <= row['ordered_fraction_mean'] <= 1.0
    assert result.summary['derived'][0]['block'] == 10


def test_monotone_cells(tmp_path):
    hard = validate_spec({
        'kind': 'MONOTONE_HARD', 'grid': {'n': [50], 'c': [2.5]},
        'replications': 2, 'budget': '20*n', 'master_seed': 4, 'params': {'level_cap': 1000},
    })
    row = run_experiment(hard, out_dir=str(tmp_path)).rows[0]
    assert row['status'] in ('OK', 'ALL_CENSORED')
    assert 0.0 <= row['terminal_density_mean'] <= 1.0

    easy = validate_spec({
        'kind': 'MONOTONE_EASY', 'grid': {'n': [50], 'c': [0.5]},
        'replications': 3, 'budget': '400*n*ln(n)', 'master_seed': 4, 'params': {'level_cap': 1000},
    })
    row = run_experiment(easy, out_dir=str(tmp_path)).rows[0]
    assert row['status'] == 'OK'
    assert row['alpha'] == 0.25


def test_dry_run_writes_nothing(tmp_path, decline_spec):
    result = run_experiment(validate_spec(decline_spec), out_dir=str(tmp_path), write=False)
    assert result.paths == {}
    assert not any(tmp_path.iterdir())
