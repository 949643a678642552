#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
SERVICE DÉCLIN ALÉATOIRE - DRIFTLAB
===================================

Chaîne de déclin aléatoire : depuis x > 0, saut uniforme dans
{0, 1, ..., floor(a*x)}. Solveur exact pour a <= 1, balayage du seuil
a < e et constantes de l'analyse en deux phases.

Version: 1.0.0
"""

import math
import logging
from dataclasses import dataclass, asdict
from fractions import Fraction
from typing import Any, Callable, Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from driftlab.errors import ChainError
from driftlab.services.chain_core import (
    ChainKernel, Target, replicate_hitting, solve_expected_hitting
)
from driftlab.utils.helpers import to_fraction, uniform_int
from driftlab.utils.result_writer import write_csv

logger = logging.getLogger(__name__)

Number = Union[int, float, str, Fraction]
Budget = Union[int, Callable[[int], int]]

NEAR_THRESHOLD = (Fraction(5, 2), Fraction(3))
SCAN_COLUMNS = ['a', 'n', 'replications', 'mean', 'std_error', 'censored', 'ratio_mean_over_ln_n']


@dataclass(frozen=True)
class RandomDeclineParams:
    """Paramètres validés de la chaîne : facteur rationnel exact et état initial"""
    a: Fraction
    n: int = 0

    def __post_init__(self):
        if self.a <= 0:
            raise ChainError('BAD_A', f"le facteur de déclin doit être > 0, reçu {self.a}")
        if self.n < 0:
            raise ChainError('BAD_STATE', f"état initial négatif: {self.n}")

    @classmethod
    def parse(cls, a: Number, n: int = 0) -> 'RandomDeclineParams':
        """
        Lit un facteur (float, texte ou rationnel) et un état initial

        Raises:
            ChainError: BAD_A si le facteur est illisible ou <= 0, BAD_STATE si n < 0
        """
        try:
            factor = to_fraction(a)
        except (ValueError, ZeroDivisionError) as e:
            raise ChainError('BAD_A', f"facteur de déclin illisible: {a!r}") from e
        return cls(factor, int(n))


def _decline_factor(a: Number) -> Fraction:
    return RandomDeclineParams.parse(a).a


def decline_top(a: Fraction, x: int) -> int:
    """floor(a*x) en arithmétique entière exacte"""
    return (a.numerator * x) // a.denominator


def make_random_decline(a: Number) -> ChainKernel:
    """
    Construit la chaîne de déclin aléatoire de facteur a

    Args:
        a: Facteur de déclin (> 0), converti en rationnel exact

    Returns:
        ChainKernel: 0 absorbant, lignes exactes pour tout x
    """
    factor = _decline_factor(a)

    def step(x, rng):
        if x == 0:
            return 0
        return uniform_int(rng, decline_top(factor, x))

    def row(x):
        if x == 0:
            return [(0, 1.0)]
        top = decline_top(factor, x)
        probability = 1.0 / (top + 1)
        return [(m, probability) for m in range(top + 1)]

    return ChainKernel(
        f'random_decline(a={factor})', step, row,
        enumerable=factor <= 1,
        parameters={'a': factor}
    )


def exact_expected_time(a: Number, n: int) -> float:
    """
    E[T] exact depuis n par récurrence avant (a <= 1)

    E[T|x] = 1 + (1/(k+1)) * sum_{m=0..k} E[T|m] avec k = floor(a*x) ;
    lorsque k = x le terme autoréférent est isolé.

    Raises:
        ChainError: UNSUPPORTED_A pour a > 1
    """
    params = RandomDeclineParams.parse(a, n)
    factor, n = params.a, params.n
    if factor > 1:
        raise ChainError('UNSUPPORTED_A', f"espace d'états non borné pour a={factor} > 1 (utiliser Monte Carlo)")
    if n == 0:
        return 0.0

    expected = np.zeros(n + 1)
    prefix = np.zeros(n + 1)  # prefix[m] = sum_{i<=m} E[T|i]
    for x in range(1, n + 1):
        top = decline_top(factor, x)
        if top == x:
            expected[x] = (x + 1 + prefix[x - 1]) / x
        else:
            expected[x] = 1.0 + prefix[top] / (top + 1)
        prefix[x] = prefix[x - 1] + expected[x]
    return float(expected[n])


def solve_decline_by_matrix(a: Number, n: int) -> Dict[int, float]:
    """Même quantité par le solveur générique (contrôle croisé, petits n)"""
    chain = make_random_decline(a)
    if not chain.enumerable:
        raise ChainError('UNSUPPORTED_A', f"espace d'états non borné pour a={a}")
    return solve_expected_hitting(chain, 0, range(n + 1))


# ==============================================================================
# BALAYAGE DU SEUIL
# ==============================================================================

@dataclass
class ScanRow:
    """Ligne du balayage (a, n)"""
    a: float
    n: int
    replications: int
    mean: float
    std_error: float
    censored: int
    ratio_mean_over_ln_n: float
    status: str = 'OK'
    median: float = math.nan
    seed: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _budget_for(budget: Budget, n: int) -> int:
    value = budget(n) if callable(budget) else budget
    value = int(math.ceil(value))
    if value < 0:
        raise ChainError('BAD_BUDGET', f"budget négatif pour n={n}: {value}")
    return value


def threshold_scan(a_values: Sequence[Number], n_values: Sequence[int], replications: int,
                   budget: Budget, master_seed: int, threads: int = 1) -> List[ScanRow]:
    """
    Balayage Monte Carlo de E[T]/ln n sur une grille (a, n)

    Les réplications d'un même n partagent leurs graines d'un a à
    l'autre (nombres aléatoires communs).

    Args:
        a_values: Facteurs de déclin
        n_values: États initiaux (>= 1)
        replications: Réplications par cellule
        budget: Budget de pas (entier ou fonction de n)
        master_seed: Graine maîtresse
        threads: Nombre de workers

    Returns:
        List[ScanRow]: Une ligne par (a, n), ALL_CENSORED reporté dans status
    """
    factors = [_decline_factor(a) for a in a_values]
    if any(n < 1 for n in n_values):
        raise ChainError('BAD_STATE', f"tous les n doivent être >= 1: {list(n_values)}")

    rows = []
    for factor in factors:
        if NEAR_THRESHOLD[0] < factor < NEAR_THRESHOLD[1]:
            logger.warning(f"⚠️ a={float(factor)} proche du seuil e : convergence trop lente pour conclure")

        chain = make_random_decline(factor)
        for j, n in enumerate(n_values):
            stats = replicate_hitting(chain, n, Target.at_most(0), replications, _budget_for(budget, n),
                                      master_seed, threads, seed_path=(j,))
            ratio = stats.mean / math.log(n) if n > 1 and not stats.all_censored else math.nan
            rows.append(ScanRow(
                a=float(factor), n=n, replications=replications,
                mean=stats.mean, std_error=stats.std_error, censored=stats.censored_count,
                ratio_mean_over_ln_n=ratio, status=stats.status, median=stats.median,
                seed=master_seed
            ))
        logger.info(f"✅ Balayage a={float(factor)} terminé ({len(n_values)} valeurs de n)")
    return rows


def threshold_scan_to_csv(rows: Sequence[ScanRow], path: str) -> pd.DataFrame:
    """Écrit le CSV a,n,replications,mean,std_error,censored,ratio_mean_over_ln_n"""
    frame = pd.DataFrame([row.to_dict() for row in rows], columns=SCAN_COLUMNS)
    write_csv(frame, path)
    return frame


# ==============================================================================
# ANALYSE EN DEUX PHASES
# ==============================================================================

def log_drift_margin(a: Number, C: int) -> float:
    """Marge de g-drift 1 - ln a - 1/(floor(a*C)+1) pour g = ln au-dessus de C"""
    factor = _decline_factor(a)
    return 1.0 - math.log(factor) - 1.0 / (decline_top(factor, C) + 1)


def choose_cutoff(a: Number, max_cutoff: int = 10 ** 9) -> int:
    """
    Plus petit entier C >= 1 de marge >= (1 - ln a)/2

    Raises:
        ChainError: UNSUPPORTED_A pour a >= e (aucune marge positive)
    """
    factor = _decline_factor(a)
    if factor >= math.e:
        raise ChainError('UNSUPPORTED_A', f"aucune marge de drift logarithmique pour a={float(factor)} >= e")

    wanted = (1.0 - math.log(factor)) / 2.0
    # 1/(floor(aC)+1) <= wanted  <=>  floor(aC) >= ceil(1/wanted) - 1
    needed_top = math.ceil(1.0 / wanted) - 1
    C = max(1, math.ceil(Fraction(needed_top) / factor))
    while log_drift_margin(factor, C) < wanted:
        C += 1
        if C > max_cutoff:
            raise ChainError('UNSUPPORTED_A', f"seuil C introuvable pour a={float(factor)}")
    return C


def log_potential(C: int) -> Callable[[float], float]:
    """g(x) = ln x pour x > C, 0 sinon"""
    def g(x):
        return math.log(x) if x > C else 0.0
    g.__name__ = f'ln_above_{C}'
    return g


def exact_log_drift(a: Number, C: int, x: int) -> float:
    """E[g(X')|x] - g(x) calculé exactement par sommation"""
    factor = _decline_factor(a)
    top = decline_top(factor, x)
    g = log_potential(C)
    if top <= C:
        expected = 0.0
    else:
        # sum_{m=C+1..top} ln m = lgamma(top+1) - lgamma(C+1)
        expected = (math.lgamma(top + 1) - math.lgamma(C + 1)) / (top + 1)
    return expected - g(x)


@dataclass
class TwoPhaseConstants:
    a: float
    C: int
    margin: float
    p0: float
    B: float
    B_std_error: float = 0.0
    method: str = 'exact'

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def two_phase_constants(a: Number, C: Optional[int] = None, replications: int = 2000,
                        budget: int = 100_000, master_seed: int = 0) -> TwoPhaseConstants:
    """
    Constantes p0 et B de la borne en deux phases

    p0 = 1/(floor(aC)+1) minore la probabilité de sauter en 0 depuis un état
    <= C. B majore le temps moyen de retour sous C après un saut au-dessus :
    nul pour a <= 1 (la chaîne ne remonte jamais), estimé par Monte Carlo
    depuis le pire état atteignable floor(aC) sinon.
    """
    factor = _decline_factor(a)
    if C is None:
        C = choose_cutoff(factor)
    top = decline_top(factor, C)
    p0 = 1.0 / (top + 1)
    margin = log_drift_margin(factor, C)

    if factor <= 1 or top <= C:
        return TwoPhaseConstants(float(factor), C, margin, p0, 0.0)

    stats = replicate_hitting(make_random_decline(factor), top, Target.at_most(C),
                              replications, budget, master_seed)
    if stats.all_censored:
        raise ChainError('ALL_CENSORED', f"retour sous C={C} jamais observé pour a={float(factor)}")
    return TwoPhaseConstants(float(factor), C, margin, p0, stats.mean, stats.std_error, 'monte_carlo')
