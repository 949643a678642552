# -*- coding: utf-8 -*-
"""
Vérifications à l'échelle des critères d'acceptation

Exécution : pytest -m slow (plusieurs minutes à plusieurs heures selon la machine)
"""
import math
from pathlib import Path

import numpy as np
import pytest

from driftlab.services.chain_core import (
    Target, make_biased_walk, replicate_hitting, simulate_hitting, solve_expected_hitting,
)
from driftlab.services.drift_bounds import (
    additive_bound, multiplicative_tail, negative_drift_thresholds, variable_drift_bound,
)
from driftlab.services.ea_engine import EAParams, onemax_expected_time, run_ea
from driftlab.services.experiment_service import run_experiment
from driftlab.services.experiment_spec import load_spec
from driftlab.services.fitness_lib import find_alpha, onemax
from driftlab.services.random_decline import exact_expected_time, make_random_decline, threshold_scan
from driftlab.utils.helpers import derive_seed, sample_mean_and_error

pytestmark = pytest.mark.slow

SPECS = Path(__file__).resolve().parent.parent / 'specs'


def preset(name):
    return load_spec(str(SPECS / f'{name}.json'))


@pytest.mark.parametrize('c', [0.5, 1.0])
def test_onemax_runs_match_exact_oracle(c):
    n, runs = 32, 2000
    params = EAParams(n, c)
    steps = [run_ea(onemax(n), params, 'zeros', budget=10 ** 6, seed=derive_seed(101, i)).steps
             for i in range(runs)]
    mean, error = sample_mean_and_error(steps)
    assert abs(mean - onemax_expected_time(n, c)) <= 3 * error


def test_additive_drift_walk():
    walk = make_biased_walk(0.75, cap=400)
    exact = solve_expected_hitting(walk, Target.at_most(0), list(range(401)))[50]
    assert exact == pytest.approx(100.0, rel=1e-9)
    assert additive_bound(50, 0.5).bound_value == 100.0

    stats = replicate_hitting(make_biased_walk(0.75), 50, Target.at_most(0), 10_000, 10 ** 6, master_seed=102)
    assert abs(stats.mean - 100.0) <= 3 * stats.std_error


def test_variable_drift_upper_bounds_onemax():
    n, c = 64, 0.5
    rate = c * (1 - c) / (n * (1 + c))
    bound = variable_drift_bound(lambda x: rate * x, n).bound_value
    exact = onemax_expected_time(n, c)
    assert exact <= bound
    assert 1.0 <= bound / exact <= 10.0


def test_multiplicative_tail_on_decline():
    n, runs = 1000, 100_000
    stats = replicate_hitting(make_random_decline(1), n, Target.at_most(0), runs, 10 * n, master_seed=103)
    for k in (1, 2, 3):
        threshold, probability = multiplicative_tail(n, 0.5, k).bound_value
        empirical = stats.exceedance(threshold)
        sigma = math.sqrt(probability * (1 - probability) / runs)
        assert empirical <= probability + 3 * sigma


def test_negative_drift_walk():
    n, a, b, epsilon = 200, 0.25, 0.75, 0.2
    walk = make_biased_walk(0.5 + epsilon / 2)
    low, high = math.floor(a * n), math.ceil(b * n)

    # Premier passage 150 -> 50 : environ 97.6 % des runs sous le seuil gamma = 0.5
    at_half = negative_drift_thresholds(a, b, epsilon, 0.5, n).value
    at_one = negative_drift_thresholds(a, b, epsilon, 1.0, n).value
    stats = replicate_hitting(walk, high, Target.at_most(low), 1000, 10 ** 5, master_seed=104)
    steps = np.asarray(stats.steps)
    assert np.mean(steps <= at_half) >= 0.95
    assert np.mean(steps <= at_one) >= 0.99

    start = math.ceil(a * n)
    escape_or_ruin = Target(lambda x: x >= high or x == 0,
                            lambda arr: (arr >= high) | (arr == 0), 'X >= bn ou X = 0')
    reached = 0
    for i in range(100):
        outcome = simulate_hitting(walk, start, escape_or_ruin, 10 ** 6, derive_seed(105, i))
        reached += outcome.first_state_in_target is not None and outcome.first_state_in_target >= high
    assert reached == 0


def test_random_decline_threshold():
    n_values = [10 ** 3, 10 ** 4, 10 ** 5, 10 ** 6]
    below = threshold_scan([2.0], n_values, 500, lambda n: 300 * math.ceil(math.log(n)), master_seed=106)
    ratios = np.array([row.ratio_mean_over_ln_n for row in below])
    assert np.all(np.abs(ratios / ratios.mean() - 1) <= 0.15)

    # Au-dessus de e la chaîne s'échappe avec probabilité positive, croissante avec n
    above = threshold_scan([3.5], n_values, 500, 2000, master_seed=106)
    escaped = [row.censored / row.replications for row in above]
    assert all(e2 >= e1 for e1, e2 in zip(escaped, escaped[1:]))
    assert escaped[-1] > 0

    for n in (10, 100, 1000):
        stats = replicate_hitting(make_random_decline(1), n, Target.at_most(0), 5000, 10 * n, master_seed=107)
        assert abs(stats.mean - exact_expected_time(1, n)) <= 3 * stats.std_error


def test_linear_functions_constant(tmp_path):
    result = run_experiment(preset('linear_constant'), threads=8, out_dir=str(tmp_path))
    by_cell = {(r['n'], r['c'], r['fitness']): r for r in result.rows}
    moving = 0
    for row in result.rows:
        assert row['status'] == 'OK'
        assert abs(row['ratio'] - 1) <= 0.25
    for c in (0.5, 1.0):
        for fitness in ('onemax', 'binval', 'random_linear'):
            small, large = by_cell[(512, c, fitness)], by_cell[(2048, c, fitness)]
            moving += abs(large['ratio'] - 1) <= abs(small['ratio'] - 1)
    assert moving >= 5


def test_monotone_easy_regime(tmp_path):
    spec = preset('monotone_easy')
    row = run_experiment(spec, threads=8, out_dir=str(tmp_path)).rows[0]
    assert row['censored'] == 0


def test_monotone_hard_regime(tmp_path):
    spec = preset('monotone_hard')
    result = run_experiment(spec, threads=8, out_dir=str(tmp_path))
    for row in result.rows:
        assert row['alpha'] == find_alpha(2.5)
        assert row['optimum_count'] == 0
        assert row['fraction_density_above_half_eps'] >= 0.95


def test_density_ordering_on_binval(tmp_path):
    row = run_experiment(preset('density_track'), threads=8, out_dir=str(tmp_path)).rows[0]
    assert row['runs_meeting_99'] == 20


@pytest.mark.parametrize('name', ['decline_scan', 'bounds_check', 'oracle_compare'])
def test_thread_count_does_not_change_output(tmp_path, name):
    spec = preset(name)
    single = run_experiment(spec, threads=1, out_dir=str(tmp_path / 'single'))
    many = run_experiment(spec, threads=8, out_dir=str(tmp_path / 'many'))
    assert single.paths['csv'].read_bytes() == many.paths['csv'].read_bytes()
