# -*- coding: utf-8 -*-
import numpy as np
import pandas as pd
import pytest
from scipy import stats

from driftlab.errors import EAError
from driftlab.services.chain_core import check_rows, replicate_hitting, trajectory_probe
from driftlab.services.ea_engine import (
    Adversary1, Adversary2, BitString, EAParams, NoiseConfig, density, ea_step, make_ea_chain,
    mutate, onemax_expected_time, onemax_zero_chain, run_ea, trace_to_csv,
)
from driftlab.services.fitness_lib import (
    CallableFitness, HotMode, HotMonotoneConfig, HotMonotoneFitness, binval, onemax,
)
from driftlab.utils.helpers import derive_seed, sample_mean_and_error


# ==============================================================================
# BITSTRING ET MUTATION
# ==============================================================================

def test_bitstring_basics():
    x = BitString.from_string('0110')
    assert str(x) == '0110'
    assert x.n == 4 and x.one_count == 2 and x.zero_count == 2
    assert x.flipped([0]) == BitString.from_string('1110')
    assert str(x) == '0110'
    assert hash(x) == hash(BitString.from_string('0110'))
    with pytest.raises(ValueError):
        x.bits[0] = 1
    with pytest.raises(AttributeError):
        x.bits = np.zeros(4)
    with pytest.raises(EAError):
        BitString.from_string('0120')


def test_mutation_at_full_rate_complements():
    params = EAParams(8, 8)
    child = mutate(BitString.from_string('01100101'), params, rng=0)
    assert str(child) == '10011010'


def test_mutation_is_reproducible():
    params = EAParams(100, 1)
    parent = BitString.zeros(100)
    assert mutate(parent, params, 5) == mutate(parent, params, 5)


def test_mutation_length_mismatch():
    with pytest.raises(EAError) as info:
        mutate(BitString.zeros(5), EAParams(6, 1), 0)
    assert info.value.code == 'LENGTH_MISMATCH'


@pytest.mark.parametrize('n, c', [(0, 1), (10, 0), (10, 11)])
def test_bad_params(n, c):
    with pytest.raises(EAError):
        EAParams(n, c)


def test_flip_count_is_binomial():
    n, c, samples = 50, 1.0, 200_000
    params = EAParams(n, c)
    rng = np.random.default_rng(17)
    parent = BitString.zeros(n)
    counts = np.bincount([mutate(parent, params, rng).one_count for _ in range(samples)], minlength=n + 1)
    expected = stats.binom.pmf(np.arange(n + 1), n, c / n) * samples
    observed = np.append(counts[:5], counts[5:].sum())
    expected = np.append(expected[:5], expected[5:].sum())
    _, p_value = stats.chisquare(observed, expected)
    assert p_value > 1e-3


@pytest.mark.slow
def test_flip_count_is_binomial_large_sample():
    n, c, samples = 100, 1.0, 1_000_000
    params = EAParams(n, c)
    rng = np.random.default_rng(18)
    parent = BitString.zeros(n)
    counts = np.bincount([mutate(parent, params, rng).one_count for _ in range(samples)], minlength=n + 1)
    expected = stats.binom.pmf(np.arange(n + 1), n, c / n) * samples
    observed = np.append(counts[:7], counts[7:].sum())
    expected = np.append(expected[:7], expected[7:].sum())
    _, p_value = stats.chisquare(observed, expected)
    assert p_value > 1e-3


# ==============================================================================
# PAS ET BRUIT
# ==============================================================================

def test_improvement_is_accepted():
    step = ea_step(BitString.zeros(6), onemax(6), EAParams(6, 6), NoiseConfig(), rng=0)
    assert step.accepted and step.next == BitString.ones(6)


def test_ties_are_accepted():
    step = ea_step(BitString.from_string('01'), onemax(2), EAParams(2, 2), NoiseConfig(), rng=0)
    assert step.accepted and str(step.next) == '10'


def test_worsening_is_rejected():
    step = ea_step(BitString.ones(6), onemax(6), EAParams(6, 6), NoiseConfig(), rng=0)
    assert not step.accepted and step.next == BitString.ones(6)


def test_type1_reject_adversary_blocks_everything():
    noise = NoiseConfig(delta1=1.0, adversary1=Adversary1.ALWAYS_REJECT)
    rng = np.random.default_rng(1)
    for _ in range(50):
        step = ea_step(BitString.zeros(6), onemax(6), EAParams(6, 6), noise, rng)
        assert not step.accepted
        assert step.noise_events.type1


def test_type1_accept_adversary_takes_worse_offspring():
    noise = NoiseConfig(delta1=1.0, adversary1='ALWAYS_ACCEPT')
    step = ea_step(BitString.ones(6), onemax(6), EAParams(6, 6), noise, rng=0)
    assert step.accepted and step.next == BitString.zeros(6)


def test_infinite_penalty_blocks_improvements():
    noise = NoiseConfig(delta1=0.0, delta2=0.0, adversary2=Adversary2.INFINITE)
    step = ea_step(BitString.zeros(6), onemax(6), EAParams(6, 6), noise, rng=0)
    assert not step.accepted
    assert step.noise_events.type2 and step.noise_events.penalty == float('inf')


def test_constant_penalty_threshold():
    noise = NoiseConfig(delta2=0.0, adversary2=Adversary2.CONSTANT, penalty=6)
    assert ea_step(BitString.zeros(6), onemax(6), EAParams(6, 6), noise, 0).accepted
    strict = NoiseConfig(delta2=0.0, adversary2=Adversary2.CONSTANT, penalty=7)
    assert not ea_step(BitString.zeros(6), onemax(6), EAParams(6, 6), strict, 0).accepted


def test_noise_config_validation():
    with pytest.raises(EAError):
        NoiseConfig(delta1=1.5)
    with pytest.raises(EAError):
        NoiseConfig(penalty=-1)
    assert NoiseConfig().noiseless
    assert not NoiseConfig(delta1=0.1).noiseless


def test_noisy_runs_are_reproducible():
    noise = NoiseConfig(delta1=0.3, delta2=0.5, adversary1='ALWAYS_ACCEPT', adversary2='CONSTANT', penalty=1)
    params = EAParams(30, 1)
    first = run_ea(onemax(30), params, 'zeros', noise, budget=2000, seed=44)
    second = run_ea(onemax(30), params, 'zeros', noise, budget=2000, seed=44)
    assert first.final_point == second.final_point
    assert first.accepted_count == second.accepted_count
    assert first.steps == second.steps


# ==============================================================================
# RUNS
# ==============================================================================

def test_run_from_optimum_takes_no_step():
    result = run_ea(onemax(10), EAParams(10, 1), 'ones', budget=100, seed=0)
    assert result.steps == 0 and result.status == 'OPTIMUM'


def test_run_is_censored_at_budget():
    never = CallableFitness(10, lambda b: int(b.sum()), optimum=lambda b: False)
    result = run_ea(never, EAParams(10, 1), 'zeros', budget=10, seed=0)
    assert result.status == 'CENSORED' and result.steps == 10


def test_run_needs_optimum_predicate():
    blind = CallableFitness(10, lambda b: int(b.sum()))
    with pytest.raises(EAError) as info:
        run_ea(blind, EAParams(10, 1), budget=10, seed=0)
    assert info.value.code == 'NO_OPTIMUM_PREDICATE'
    result = run_ea(blind, EAParams(10, 1), budget=10, seed=0, allow_no_optimum=True,
                    probes={'ones': lambda p: p.one_count})
    assert result.status == 'CENSORED'
    assert len(result.trace) == 11


def test_noiseless_fitness_never_decreases():
    f = binval(20)
    result = run_ea(f, EAParams(20, 1), 'random', budget=3000, seed=6,
                    probes={'fitness': lambda p: float(f(p))}, stop_at_optimum=False)
    values = [v for _, _, v in result.trace]
    assert all(b >= a for a, b in zip(values, values[1:]))


def test_trace_is_padded_after_optimum():
    result = run_ea(onemax(8), EAParams(8, 1), 'zeros', budget=5000, seed=1,
                    probes={'zeros': lambda p: p.zero_count}, probe_stride=100, stop_at_optimum=False)
    assert result.status == 'OPTIMUM'
    assert [t for t, _, _ in result.trace] == list(range(0, 5001, 100))
    assert result.trace[-1][2] == 0.0


def test_time_dependent_level_never_drops_during_run():
    config = HotMonotoneConfig(n=40, c=2.5, alpha=0.25, beta=0.05, epsilon=0.1, level_cap=50, seed=2)
    f = HotMonotoneFitness(config, HotMode.TIME_DEPENDENT)
    result = run_ea(f, EAParams(40, 2.5), 'random', budget=3000, seed=3,
                    probes={'level': lambda p: f.current_level})
    levels = [v for _, _, v in result.trace]
    assert all(b >= a for a, b in zip(levels, levels[1:]))
    assert all(b - a <= 1 for a, b in zip(levels, levels[1:]))


def test_run_stops_when_level_cap_is_reached():
    config = HotMonotoneConfig(n=40, c=2.5, alpha=0.25, beta=0.05, epsilon=0.1, level_cap=1, seed=2)
    f = HotMonotoneFitness(config, HotMode.TIME_DEPENDENT)
    result = run_ea(f, EAParams(40, 2.5), 'random', budget=3000, seed=3)
    assert result.status == 'CAP_REACHED'
    assert 1 <= result.steps < 3000
    assert f.cap_reached
    assert f.level_log == [1]


def test_density():
    assert density(BitString.zeros(4), range(4)) == 1.0
    assert density(BitString.ones(4), range(4)) == 0.0
    assert density(BitString.from_string('0101'), [0, 1]) == 0.5
    with pytest.raises(EAError) as info:
        density(BitString.zeros(4), [])
    assert info.value.code == 'EMPTY_SET'
    with pytest.raises(EAError) as info:
        density(BitString.zeros(4), [4])
    assert info.value.code == 'BAD_RANGE'


def test_trace_to_csv(tmp_path):
    result = run_ea(onemax(8), EAParams(8, 1), 'zeros', budget=20, seed=1,
                    probes={'zeros': lambda p: p.zero_count}, stop_at_optimum=False)
    path = tmp_path / 'trace.csv'
    trace_to_csv(result.trace, path)
    frame = pd.read_csv(path)
    assert list(frame.columns) == ['t', 'probe_name', 'value']
    assert frame['t'].iloc[0] == 0


# ==============================================================================
# CHAÎNE DES ZÉROS DE ONEMAX
# ==============================================================================

def test_zero_chain_rows():
    chain = onemax_zero_chain(32, 1)
    assert check_rows(chain, range(33)) <= 1e-12
    for x in range(33):
        assert all(successor <= x for successor, _ in chain.row(x))
    row = onemax_zero_chain(2, 2).row(1)
    assert [s for s, _ in row] == [1]
    assert row[0][1] == pytest.approx(1.0)


def test_zero_chain_simulation_matches_solver():
    chain = onemax_zero_chain(32, 1)
    stats_ = replicate_hitting(chain, 32, 0, 1000, 100_000, master_seed=13)
    expected = onemax_expected_time(32, 1)
    assert abs(stats_.mean - expected) <= 4 * stats_.std_error


def test_bitstring_runs_match_zero_chain():
    n, c, runs = 16, 1.0, 500
    params = EAParams(n, c)
    steps = [run_ea(onemax(n), params, 'zeros', budget=100_000, seed=derive_seed(9, i)).steps
             for i in range(runs)]
    mean, error = sample_mean_and_error(steps)
    assert abs(mean - onemax_expected_time(n, c)) <= 4 * error


def test_ea_chain_wraps_runs():
    f = onemax(20)
    chain = make_ea_chain(f, EAParams(20, 1))
    series = trajectory_probe(chain, BitString.zeros(20), budget=500, probe=lambda p: p.one_count,
                              stride=10, seed=2)
    values = [v for _, v in series]
    assert all(b >= a for a, b in zip(values, values[1:]))


def test_ea_chain_refuses_stateful_fitness(small_hot_config):
    f = HotMonotoneFitness(small_hot_config, HotMode.TIME_DEPENDENT)
    with pytest.raises(EAError) as info:
        make_ea_chain(f, EAParams(10, 2.5))
    assert info.value.code == 'STATEFUL_FITNESS'
