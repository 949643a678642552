#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
SERVICE D'EXPÉRIENCES - DRIFTLAB
================================

Orchestration des expériences répliquées sur une grille de paramètres :
une ligne de résultats par cellule, superposition des valeurs théoriques
et résumé JSON. La réplication i de la cellule j utilise la graine
derive_seed(master_seed, j, i) : les sorties ne dépendent pas du nombre
de threads.

Version: 1.0.0
"""

import math
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import numpy as np
from scipy import stats as scipy_stats

from driftlab import __version__
from driftlab.errors import DriftLabError
from driftlab.services.chain_core import (
    HittingOutcome, HittingStats, Target, replicate_hitting, solve_expected_hitting, summarize_outcomes
)
from driftlab.services.drift_bounds import multiplicative_mean_bound, multiplicative_tail
from driftlab.services.ea_engine import EAParams, density, onemax_expected_time, onemax_zero_chain, run_ea
from driftlab.services.experiment_spec import ExperimentSpec, noise_from_grid
from driftlab.services.fitness_lib import (
    HotMode, default_hot_config, hot_monotone, make_fitness, onemax, random_linear
)
from driftlab.services.random_decline import choose_cutoff, exact_expected_time, make_random_decline
from driftlab.utils.helpers import binomial_std_error, derive_seed, parallel_map, to_fraction
from driftlab.utils.result_writer import write_result_set

logger = logging.getLogger(__name__)

COMMON_HEAD = ['kind']
COMMON_TAIL = ['replications', 'mean', 'std_error', 'median', 'censored',
               'theory_value', 'ratio', 'seed', 'status', 'error']

EXTRA_COLUMNS: Dict[str, List[str]] = {
    'DECLINE_SCAN': ['ln_n', 'ratio_mean_over_ln_n', 'below_e'],
    'LINEAR_CONSTANT': [],
    'MONOTONE_EASY': ['alpha', 'max_level_mean'],
    'MONOTONE_HARD': ['optimum_count', 'terminal_density_mean', 'fraction_density_above_half_eps',
                      'alpha', 'beta', 'epsilon', 'max_level_mean'],
    'BOUNDS_CHECK': ['mult_mean_bound', 'bound_holds',
                     'tail_t_k1', 'tail_emp_k1', 'tail_se_k1', 'tail_bound_k1',
                     'tail_t_k2', 'tail_emp_k2', 'tail_se_k2', 'tail_bound_k2',
                     'tail_t_k3', 'tail_emp_k3', 'tail_se_k3', 'tail_bound_k3'],
    'ORACLE_COMPARE': ['z_score'],
    'DENSITY_TRACK': ['ordered_fraction_mean', 'ordered_fraction_min', 'runs_meeting_99'],
}

EXACT_DECLINE_LIMIT = 10 ** 6


@dataclass
class ExperimentResult:
    """Lignes, colonnes, résumé et fichiers écrits d'une expérience"""
    spec: ExperimentSpec
    columns: List[str]
    rows: List[Dict[str, Any]]
    summary: Dict[str, Any]
    paths: Dict[str, Path] = field(default_factory=dict)

    @property
    def failed_cells(self) -> int:
        return sum(1 for row in self.rows if row.get('status') == 'ERROR')


def columns_for(spec: ExperimentSpec) -> List[str]:
    """Ordre fixe des colonnes pour un type d'expérience"""
    return COMMON_HEAD + spec.grid_columns() + COMMON_TAIL + EXTRA_COLUMNS[spec.kind]


class _CellContext:
    """Ce dont un exécuteur de cellule a besoin : spec, indices, budget, threads"""

    def __init__(self, spec: ExperimentSpec, index: int, cell: Dict[str, Any], threads: int,
                 solver_options: Optional[Dict[str, Any]] = None):
        self.spec = spec
        self.index = index
        self.cell = cell
        self.threads = threads
        self.solver_options = dict(solver_options or {})
        self.budget = spec.budget_formula(cell['n'])
        self.derived: Dict[str, Any] = {'budget': self.budget}

    def seed(self, replication: int) -> int:
        return derive_seed(self.spec.master_seed, self.index, replication)

    def replicate(self, run_one: Callable[[int], Any]) -> List[Any]:
        return parallel_map(run_one, self.spec.replications, self.threads)


def _stats_columns(stats: HittingStats) -> Dict[str, Any]:
    return {
        'mean': stats.mean,
        'std_error': stats.std_error,
        'median': stats.median,
        'censored': stats.censored_count,
        'status': stats.status,
    }


def _outcomes_from_runs(results, budget: int) -> List[HittingOutcome]:
    return [HittingOutcome(r.steps, r.status == 'CENSORED', budget) for r in results]


def _ratio(mean: float, theory: Optional[float], stats: HittingStats) -> Optional[float]:
    if theory is None or not theory or stats.all_censored or stats.censored_count:
        return None
    return mean / theory


# ==============================================================================
# EXÉCUTEURS PAR TYPE
# ==============================================================================

def _run_decline_scan(ctx: _CellContext) -> Dict[str, Any]:
    a, n = ctx.cell['a'], ctx.cell['n']
    factor = to_fraction(a)
    chain = make_random_decline(factor)
    stats = replicate_hitting(chain, n, Target.at_most(0), ctx.spec.replications, ctx.budget,
                              ctx.spec.master_seed, ctx.threads, seed_path=(ctx.index,))

    theory = exact_expected_time(factor, n) if factor <= 1 and n <= EXACT_DECLINE_LIMIT else None
    if factor < math.e:
        ctx.derived['cutoff_C'] = choose_cutoff(factor)

    ln_n = math.log(n)
    row = _stats_columns(stats)
    row.update(
        theory_value=theory,
        ratio=_ratio(stats.mean, theory, stats),
        ln_n=ln_n,
        ratio_mean_over_ln_n=stats.mean / ln_n if n > 1 and not stats.all_censored else None,
        below_e=bool(factor < math.e),
    )
    return row


def _run_linear_constant(ctx: _CellContext) -> Dict[str, Any]:
    n, c, kind = ctx.cell['n'], ctx.cell['c'], ctx.cell['fitness']
    weight_seed = derive_seed(ctx.spec.master_seed, ctx.index)
    if kind == 'random_linear':
        fitness = random_linear(n, ctx.spec.params.get('distribution', 'uniform'), weight_seed)
    else:
        fitness = make_fitness(kind, n, weight_seed)
    params = EAParams(n, c)
    noise = noise_from_grid(ctx.spec.noise, c)

    runs = ctx.replicate(lambda i: run_ea(fitness, params, ctx.spec.start_point, noise,
                                          ctx.budget, ctx.seed(i)))
    stats = summarize_outcomes(_outcomes_from_runs(runs, ctx.budget), ctx.spec.master_seed, ctx.budget)

    theory = math.exp(c) / c
    row = _stats_columns(stats)
    row['theory_value'] = theory
    scaled = stats.mean / (n * math.log(n)) if n > 1 else math.nan
    row['ratio'] = _ratio(scaled, theory, stats)
    return row


def _hot_runs(ctx: _CellContext, base_config):
    n, c = ctx.cell['n'], ctx.cell['c']
    params = EAParams(n, c)
    noise = noise_from_grid(ctx.spec.noise, c)

    def run_one(i: int):
        fitness = hot_monotone(replace(base_config, seed=derive_seed(ctx.spec.master_seed, ctx.index, i, 1)),
                               HotMode.TIME_DEPENDENT)
        result = run_ea(fitness, params, ctx.spec.start_point, noise, ctx.budget, ctx.seed(i))
        return result, fitness.current_level

    return ctx.replicate(run_one)


def _hot_config(ctx: _CellContext):
    config = default_hot_config(ctx.cell['n'], ctx.cell['c'], seed=0,
                                level_cap=ctx.spec.params.get('level_cap'))
    config.validate()
    ctx.derived.update(alpha=config.alpha, beta=config.beta, epsilon=config.epsilon,
                       level_cap=config.max_level, a_size=config.a_size, b_size=config.b_size)
    return config


def _run_monotone_easy(ctx: _CellContext) -> Dict[str, Any]:
    n, c = ctx.cell['n'], ctx.cell['c']
    config = _hot_config(ctx)
    pairs = _hot_runs(ctx, config)
    results = [result for result, _ in pairs]
    stats = summarize_outcomes(_outcomes_from_runs(results, ctx.budget), ctx.spec.master_seed, ctx.budget)

    # Drift multiplicatif c(1-c)/(n(1+c)) sur le nombre de zéros
    theory = multiplicative_mean_bound(n, c * (1 - c) / (n * (1 + c))).value
    row = _stats_columns(stats)
    row.update(
        theory_value=theory,
        ratio=_ratio(stats.mean, theory, stats),
        alpha=config.alpha,
        max_level_mean=float(np.mean([lvl for _, lvl in pairs])),
    )
    return row


def _run_monotone_hard(ctx: _CellContext) -> Dict[str, Any]:
    n = ctx.cell['n']
    config = _hot_config(ctx)
    pairs = _hot_runs(ctx, config)
    results = [result for result, _ in pairs]
    stats = summarize_outcomes(_outcomes_from_runs(results, ctx.budget), ctx.spec.master_seed, ctx.budget)

    densities = np.array([r.final_point.zero_count / n for r in results])
    row = _stats_columns(stats)
    row.update(
        optimum_count=sum(1 for r in results if r.status == 'OPTIMUM'),
        terminal_density_mean=float(densities.mean()),
        fraction_density_above_half_eps=float(np.mean(densities > config.epsilon / 2)),
        alpha=config.alpha,
        beta=config.beta,
        epsilon=config.epsilon,
        max_level_mean=float(np.mean([lvl for _, lvl in pairs])),
    )
    return row


def _run_bounds_check(ctx: _CellContext) -> Dict[str, Any]:
    a, n = ctx.cell['a'], ctx.cell['n']
    factor = to_fraction(a)
    chain = make_random_decline(factor)
    stats = replicate_hitting(chain, n, Target.at_most(0), ctx.spec.replications, ctx.budget,
                              ctx.spec.master_seed, ctx.threads, seed_path=(ctx.index,))

    # E[X'|x] = floor(ax)/2 <= (a/2) x : drift multiplicatif delta = 1 - a/2
    delta = 1.0 - float(factor) / 2.0
    theory = exact_expected_time(factor, n)
    bound = multiplicative_mean_bound(n, delta).value
    row = _stats_columns(stats)
    row.update(
        theory_value=theory,
        ratio=_ratio(stats.mean, theory, stats),
        mult_mean_bound=bound,
        bound_holds=bool(theory <= bound),
    )

    ks = ctx.spec.params.get('ks', [1, 2, 3])
    for slot, k in enumerate(ks[:3], start=1):
        threshold, probability = multiplicative_tail(n, delta, k).bound_value
        row[f'tail_t_k{slot}'] = threshold
        exceedance = stats.exceedance(threshold)
        row[f'tail_emp_k{slot}'] = exceedance
        row[f'tail_se_k{slot}'] = binomial_std_error(exceedance, stats.replication_count)
        row[f'tail_bound_k{slot}'] = probability
    ctx.derived['delta'] = delta
    return row


def _run_oracle_compare(ctx: _CellContext) -> Dict[str, Any]:
    n, c = ctx.cell['n'], ctx.cell['c']
    fitness = onemax(n)
    params = EAParams(n, c)
    start = ctx.spec.start_point

    runs = ctx.replicate(lambda i: run_ea(fitness, params, start, None, ctx.budget, ctx.seed(i)))
    stats = summarize_outcomes(_outcomes_from_runs(runs, ctx.budget), ctx.spec.master_seed, ctx.budget)

    if start == 'zeros':
        theory = onemax_expected_time(n, c, **ctx.solver_options)
    else:
        # Départ aléatoire : moyenne exacte sur la loi Bin(n, 1/2) du nombre de zéros
        solution = solve_expected_hitting(onemax_zero_chain(n, c), 0, range(n + 1), **ctx.solver_options)
        weights = scipy_stats.binom.pmf(np.arange(n + 1), n, 0.5)
        theory = float(sum(weights[x] * solution[x] for x in range(n + 1)))

    row = _stats_columns(stats)
    row.update(theory_value=theory, ratio=_ratio(stats.mean, theory, stats))
    row['z_score'] = (stats.mean - theory) / stats.std_error if stats.std_error else None
    return row


def _run_density_track(ctx: _CellContext) -> Dict[str, Any]:
    n, c = ctx.cell['n'], ctx.cell['c']
    params_spec = ctx.spec.params
    block = params_spec.get('block', max(1, n // 10))
    tolerance = params_spec.get('tolerance', 0.05)
    stride = params_spec.get('stride', n)
    window_start = params_spec.get('window_start', 10) * n
    window_end = min(params_spec.get('window_end', 100) * n, ctx.budget)

    first = np.arange(block)
    last = np.arange(n - block, n)
    fitness = make_fitness(ctx.cell.get('fitness', 'binval'), n, derive_seed(ctx.spec.master_seed, ctx.index))
    params = EAParams(n, c)
    noise = noise_from_grid(ctx.spec.noise, c)
    probes = {'d_I': lambda p: density(p, first), 'd_J': lambda p: density(p, last)}

    def run_one(i: int):
        result = run_ea(fitness, params, ctx.spec.start_point, noise, ctx.budget, ctx.seed(i),
                        probes=probes, probe_stride=stride, stop_at_optimum=False)
        series: Dict[int, Dict[str, float]] = {}
        for t, name, value in result.trace:
            series.setdefault(t, {})[name] = value
        window = [v for t, v in sorted(series.items()) if window_start <= t <= window_end]
        ordered = [v['d_I'] <= v['d_J'] + tolerance for v in window]
        fraction = float(np.mean(ordered)) if ordered else math.nan
        hit = result.hit_optimum_at
        outcome = HittingOutcome(hit if hit is not None else ctx.budget, hit is None, ctx.budget)
        return outcome, fraction

    pairs = ctx.replicate(run_one)
    stats = summarize_outcomes([o for o, _ in pairs], ctx.spec.master_seed, ctx.budget)
    fractions = np.array([f for _, f in pairs], dtype=float)

    ctx.derived.update(block=block, tolerance=tolerance, stride=stride,
                       window=[window_start, window_end])
    row = _stats_columns(stats)
    row.update(
        ordered_fraction_mean=float(np.nanmean(fractions)) if np.any(~np.isnan(fractions)) else None,
        ordered_fraction_min=float(np.nanmin(fractions)) if np.any(~np.isnan(fractions)) else None,
        runs_meeting_99=int(np.sum(fractions >= 0.99)),
    )
    return row


RUNNERS: Dict[str, Callable[[_CellContext], Dict[str, Any]]] = {
    'DECLINE_SCAN': _run_decline_scan,
    'LINEAR_CONSTANT': _run_linear_constant,
    'MONOTONE_EASY': _run_monotone_easy,
    'MONOTONE_HARD': _run_monotone_hard,
    'BOUNDS_CHECK': _run_bounds_check,
    'ORACLE_COMPARE': _run_oracle_compare,
    'DENSITY_TRACK': _run_density_track,
}


# ==============================================================================
# ORCHESTRATION
# ==============================================================================

def run_experiment(spec: ExperimentSpec, threads: int = 1, out_dir: Optional[str] = None,
                   write: bool = True, float_format: Optional[str] = None,
                   line_terminator: Optional[str] = None,
                   solver_options: Optional[Dict[str, Any]] = None) -> ExperimentResult:
    """
    Exécute toutes les cellules de la grille et écrit <prefix>.csv / <prefix>.json

    Un échec de cellule est consigné dans la ligne (status ERROR, error)
    sans interrompre la grille.

    Args:
        spec: Spécification validée
        threads: Nombre de workers (sans effet sur les résultats)
        out_dir: Dossier de sortie (prioritaire sur spec.output.dir)
        write: False pour ne rien écrire
        solver_options: dense_limit et tolerance du solveur exact

    Returns:
        ExperimentResult
    """
    runner = RUNNERS[spec.kind]
    columns = columns_for(spec)
    rows: List[Dict[str, Any]] = []
    derived: List[Dict[str, Any]] = []

    logger.info(f"🚀 Expérience {spec.kind}: {len(spec.cells())} cellules, {spec.replications} réplications")

    for index, cell in enumerate(spec.cells()):
        row = {'kind': spec.kind, **cell, 'replications': spec.replications,
               'seed': spec.master_seed, 'error': None}
        ctx = None
        try:
            ctx = _CellContext(spec, index, cell, threads, solver_options)
            row.update(runner(ctx))
            if row.get('status') == 'ALL_CENSORED':
                logger.warning(f"⚠️ cellule {cell}: toutes les réplications sont censurées")
        except DriftLabError as e:
            logger.error(f"❌ cellule {cell}: {e}")
            row.update(status='ERROR', error=e.code)
        except (ArithmeticError, ValueError, MemoryError) as e:
            logger.error(f"❌ cellule {cell}: {e}")
            row.update(status='ERROR', error=type(e).__name__)
        rows.append(row)
        derived.append({'cell': cell, **(ctx.derived if ctx is not None else {})})

    summary = {
        'tool': 'driftlab',
        'version': __version__,
        'spec': spec.to_dict(),
        'columns': columns,
        'derived': derived,
        'cells': len(rows),
        'failed_cells': sum(1 for row in rows if row.get('status') == 'ERROR'),
    }
    result = ExperimentResult(spec, columns, rows, summary)

    if write:
        target_dir = out_dir or spec.out_dir or 'results'
        result.paths = write_result_set(rows, columns, summary, target_dir, spec.prefix,
                                        float_format, line_terminator)

    logger.info(f"✅ Expérience {spec.kind} terminée ({result.failed_cells} cellule(s) en erreur)")
    return result
