#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
SERVICE CHAÎNES DE MARKOV - DRIFTLAB
====================================

Moteur générique de simulation de chaînes de Markov, estimation
répliquée des temps d'atteinte et solveur exact des temps d'atteinte
moyens pour les chaînes finies (oracle de référence du laboratoire).

Version: 1.0.0
"""

import math
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterable, List, Mapping, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
import scipy.stats
import scipy.sparse as sparse
import scipy.sparse.linalg as sla

from driftlab.errors import ChainError
from driftlab.utils.helpers import SeedLike, derive_seed, make_rng, parallel_map

logger = logging.getLogger(__name__)

State = Any
Row = List[Tuple[Any, float]]

ROW_SUM_TOLERANCE = 1e-12
QUANTILE_LEVELS = (0.5, 0.9, 0.99)
BLOCK_LENGTH = 65536


# ==============================================================================
# TYPES
# ==============================================================================

@dataclass(frozen=True)
class ChainKernel:
    """
    Processus de Markov : échantillonneur à un pas et lignes exactes optionnelles

    Le noyau est immuable après construction et peut être partagé
    entre workers ; chaque réplication possède son propre générateur.
    """
    name: str
    sample_next: Callable[[State, np.random.Generator], State]
    exact_transitions: Optional[Callable[[State], Row]] = None
    enumerable: bool = True
    state_kind: str = 'integer'
    sample_block: Optional[Callable[[State, int, np.random.Generator], np.ndarray]] = None
    parameters: Mapping[str, Any] = field(default_factory=dict)

    @property
    def has_exact_rows(self) -> bool:
        return self.exact_transitions is not None

    def row(self, state: State) -> Row:
        """
        Ligne exacte de transition depuis state, validée

        Raises:
            ChainError: NO_EXACT_ROWS ou BAD_ROW
        """
        if self.exact_transitions is None:
            raise ChainError('NO_EXACT_ROWS', f"la chaîne {self.name} n'expose pas de lignes exactes")
        row = self.exact_transitions(state)
        for successor, probability in row:
            if probability < 0:
                raise ChainError('BAD_ROW', f"probabilité négative {probability} depuis {state!r}")
        total = math.fsum(p for _, p in row)
        if abs(total - 1.0) > ROW_SUM_TOLERANCE:
            raise ChainError('BAD_ROW', f"la ligne de {state!r} somme à {total!r}")
        return row


class Target:
    """Prédicat d'arrivée, avec version vectorisée optionnelle pour les trajectoires par blocs"""

    def __init__(self, predicate: Callable[[State], bool],
                 array_predicate: Optional[Callable[[np.ndarray], np.ndarray]] = None,
                 description: str = 'predicate'):
        self._predicate = predicate
        self._array_predicate = array_predicate
        self.description = description

    def __call__(self, state: State) -> bool:
        return bool(self._predicate(state))

    @property
    def vectorized(self) -> bool:
        return self._array_predicate is not None

    def first_index(self, path: np.ndarray) -> Optional[int]:
        """Premier indice de path satisfaisant la cible, None sinon"""
        hits = np.flatnonzero(self._array_predicate(path))
        return int(hits[0]) if hits.size else None

    @classmethod
    def at_most(cls, threshold: float) -> 'Target':
        return cls(lambda x: x <= threshold, lambda arr: arr <= threshold, f"X <= {threshold}")

    @classmethod
    def at_least(cls, threshold: float) -> 'Target':
        return cls(lambda x: x >= threshold, lambda arr: arr >= threshold, f"X >= {threshold}")

    @classmethod
    def equal_to(cls, *states: State) -> 'Target':
        members = frozenset(states)
        return cls(lambda x: x in members, lambda arr: np.isin(arr, list(members)),
                   f"X in {sorted(members, key=repr)}")

    @classmethod
    def where(cls, predicate: Callable[[State], bool], description: str = 'predicate') -> 'Target':
        return cls(predicate, None, description)

    def __repr__(self) -> str:
        return f"Target({self.description})"


def as_target(target: Any) -> Target:
    """Normalise une cible : Target, prédicat, ensemble d'états ou état isolé"""
    if isinstance(target, Target):
        return target
    if callable(target):
        return Target.where(target)
    if isinstance(target, (set, frozenset, list, tuple)):
        return Target.equal_to(*target)
    return Target.equal_to(target)


@dataclass(frozen=True)
class HittingOutcome:
    """Résultat d'une simulation : steps <= budget, censure explicite"""
    steps: int
    censored: bool
    budget: int
    first_state_in_target: Optional[State] = None

    def __post_init__(self):
        if self.steps > self.budget:
            raise ChainError('BAD_BUDGET', f"steps={self.steps} dépasse le budget {self.budget}")


@dataclass(frozen=True)
class HittingStats:
    """Résumé répliqué des temps d'atteinte (moyenne sur les runs non censurés)"""
    replication_count: int
    censored_count: int
    mean: float
    std_error: float
    median: float
    quantiles: Tuple[Tuple[float, float], ...]
    master_seed: int
    budget: int
    status: str = 'OK'
    steps: Tuple[int, ...] = ()

    @property
    def all_censored(self) -> bool:
        return self.status == 'ALL_CENSORED'

    def quantile(self, level: float) -> float:
        return dict(self.quantiles)[level]

    def exceedance(self, threshold: int) -> float:
        """Fraction des réplications avec T > threshold (les censurées comptent si budget > threshold)"""
        steps = np.asarray(self.steps)
        return float(np.mean(steps > threshold)) if steps.size else math.nan

    def to_dict(self) -> Dict[str, Any]:
        return {
            'replication_count': self.replication_count,
            'censored_count': self.censored_count,
            'mean': self.mean,
            'std_error': self.std_error,
            'median': self.median,
            'quantiles': {str(level): value for level, value in self.quantiles},
            'master_seed': self.master_seed,
            'budget': self.budget,
            'status': self.status,
        }


class DriftEstimate(NamedTuple):
    mean: float
    half_width: float


# ==============================================================================
# SIMULATION
# ==============================================================================

def simulate_hitting(chain: ChainKernel, start: State, target: Any, budget: int,
                     seed: SeedLike) -> HittingOutcome:
    """
    Simule la chaîne jusqu'au premier t <= budget avec target(X_t) vrai

    Avec un échantillonneur par blocs et une cible vectorisée (Target.at_most,
    Target.at_least, ...), la trajectoire est tirée par blocs : le flux
    aléatoire consommé diffère alors du chemin pas à pas. Deux cibles
    équivalentes, l'une vectorisée et l'autre simple prédicat, donnent la
    même loi de T mais pas la même trajectoire pour une graine donnée.
    Chaque chemin reste reproductible à graine fixée.

    Args:
        chain: Noyau de la chaîne
        start: État initial X_0
        target: Cible (Target, prédicat, ensemble d'états)
        budget: Nombre maximal de pas
        seed: Graine ou générateur de la trajectoire

    Returns:
        HittingOutcome: steps, ou censure au budget
    """
    if budget < 0:
        raise ChainError('BAD_BUDGET', f"budget négatif: {budget}")

    target = as_target(target)
    rng = make_rng(seed)

    if target(start):
        return HittingOutcome(0, False, budget, start)

    if chain.sample_block is not None and target.vectorized:
        return _simulate_by_blocks(chain, start, target, budget, rng)

    state = start
    for t in range(1, budget + 1):
        state = chain.sample_next(state, rng)
        if target(state):
            return HittingOutcome(t, False, budget, state)

    return HittingOutcome(budget, True, budget, None)


def _simulate_by_blocks(chain: ChainKernel, start: State, target: Target, budget: int,
                        rng: np.random.Generator) -> HittingOutcome:
    """Variante par blocs vectorisés pour les chaînes qui savent tirer des trajectoires"""
    t = 0
    state = start
    while t < budget:
        length = min(BLOCK_LENGTH, budget - t)
        path = chain.sample_block(state, length, rng)
        hit = target.first_index(path)
        if hit is not None:
            return HittingOutcome(t + hit + 1, False, budget, path[hit].item())
        t += length
        state = path[-1].item()
    return HittingOutcome(budget, True, budget, None)


def summarize_outcomes(outcomes: Sequence[HittingOutcome], master_seed: int, budget: int) -> HittingStats:
    """
    Agrège des réplications en HittingStats

    La moyenne, l'erreur standard et les quantiles portent sur les runs
    non censurés ; le nombre de runs censurés est reporté à part.
    """
    steps = np.array([o.steps for o in outcomes], dtype=np.int64)
    censored = np.array([o.censored for o in outcomes], dtype=bool)
    finished = steps[~censored].astype(float)
    censored_count = int(censored.sum())

    if finished.size == 0:
        nan_quantiles = tuple((level, math.nan) for level in QUANTILE_LEVELS)
        return HittingStats(len(outcomes), censored_count, math.nan, math.nan, math.nan,
                            nan_quantiles, master_seed, budget, 'ALL_CENSORED', tuple(steps.tolist()))

    mean = float(finished.mean())
    std_error = float(finished.std(ddof=1) / math.sqrt(finished.size)) if finished.size > 1 else 0.0
    quantiles = tuple((level, float(np.quantile(finished, level))) for level in QUANTILE_LEVELS)

    return HittingStats(
        replication_count=len(outcomes),
        censored_count=censored_count,
        mean=mean,
        std_error=std_error,
        median=float(np.median(finished)),
        quantiles=quantiles,
        master_seed=master_seed,
        budget=budget,
        status='OK',
        steps=tuple(steps.tolist())
    )


def replicate_hitting(chain: ChainKernel, start: State, target: Any, replications: int,
                      budget: int, master_seed: int, threads: int = 1,
                      seed_path: Tuple[int, ...] = ()) -> HittingStats:
    """
    Estimation Monte Carlo de E[T] par réplications indépendantes

    La réplication i utilise la graine derive_seed(master_seed, *seed_path, i) :
    le résultat est identique quel que soit le nombre de threads.

    Args:
        chain: Noyau de la chaîne
        start: État initial
        target: Cible
        replications: Nombre de réplications (>= 1)
        budget: Budget de pas par réplication
        master_seed: Graine maîtresse
        threads: Nombre de workers
        seed_path: Préfixe d'indices (cellule de grille) inséré dans la dérivation

    Returns:
        HittingStats: Résumé (status ALL_CENSORED si tout est censuré)
    """
    if replications < 1:
        raise ChainError('BAD_REPLICATIONS', f"au moins une réplication requise, reçu {replications}")

    target = as_target(target)

    def run(i: int) -> HittingOutcome:
        return simulate_hitting(chain, start, target, budget, derive_seed(master_seed, *seed_path, i))

    outcomes = parallel_map(run, replications, threads)
    stats = summarize_outcomes(outcomes, master_seed, budget)

    if stats.all_censored:
        logger.warning(f"⚠️ {chain.name}: les {replications} réplications sont censurées (budget {budget})")
    else:
        logger.debug(f"{chain.name}: E[T] ≈ {stats.mean:.4g} ± {stats.std_error:.2g} "
                     f"({stats.censored_count} censurées)")
    return stats


def empirical_drift(chain: ChainKernel, state: State, samples: int, seed: SeedLike,
                    confidence: float = 0.95) -> DriftEstimate:
    """
    Drift empirique E[X_{t+1} - x | X_t = x] et demi-largeur de l'IC

    Args:
        chain: Noyau de la chaîne (états numériques)
        state: État x
        samples: Nombre de tirages indépendants (>= 2)
        seed: Graine
        confidence: Niveau de l'intervalle (0.95 par défaut)

    Returns:
        DriftEstimate: (moyenne, demi-largeur de l'IC par approximation normale)
    """
    if samples < 2:
        raise ChainError('BAD_SAMPLES', f"au moins 2 tirages requis, reçu {samples}")
    if not 0 < confidence < 1:
        raise ChainError('BAD_CONFIDENCE', f"niveau de confiance hors de (0,1): {confidence}")

    rng = make_rng(seed)
    changes = np.fromiter(
        (float(chain.sample_next(state, rng) - state) for _ in range(samples)),
        dtype=float, count=samples
    )
    z = scipy.stats.norm.ppf(0.5 + confidence / 2)
    half_width = z * changes.std(ddof=1) / math.sqrt(samples)
    return DriftEstimate(float(changes.mean()), float(half_width))


def exact_drift(chain: ChainKernel, state: State) -> float:
    """Drift exact E[X' - x | X = x] calculé depuis la ligne de transition"""
    return float(sum(p * (successor - state) for successor, p in chain.row(state)))


def trajectory_probe(chain: ChainKernel, start: State, budget: int, probe: Callable[[State], float],
                     stride: int, seed: SeedLike) -> List[Tuple[int, float]]:
    """
    Enregistre probe(X_t) aux instants t = 0, stride, 2*stride, ... <= budget

    Returns:
        List[Tuple[int, float]]: Série (t, valeur)
    """
    if stride < 1:
        raise ChainError('BAD_STRIDE', f"stride doit être >= 1, reçu {stride}")
    if budget < 0:
        raise ChainError('BAD_BUDGET', f"budget négatif: {budget}")

    rng = make_rng(seed)
    state = start
    series = [(0, float(probe(state)))]
    for t in range(1, budget + 1):
        state = chain.sample_next(state, rng)
        if t % stride == 0:
            series.append((t, float(probe(state))))
    return series


# ==============================================================================
# SOLVEUR EXACT
# ==============================================================================

def transition_matrix(chain: ChainKernel, states: Sequence[State],
                      include: Optional[np.ndarray] = None) -> sparse.csr_matrix:
    """
    Empile les lignes exactes sur une énumération finie

    Les états hors du masque include (s'il est fourni) reçoivent une ligne nulle.

    Raises:
        ChainError: NOT_CLOSED si une transition sort de l'énumération
    """
    index = {state: i for i, state in enumerate(states)}
    rows, cols, values = [], [], []
    for i, state in enumerate(states):
        if include is not None and not include[i]:
            continue
        for successor, probability in chain.row(state):
            if probability == 0:
                continue
            j = index.get(successor)
            if j is None:
                raise ChainError('NOT_CLOSED', f"transition {state!r} -> {successor!r} hors énumération")
            rows.append(i)
            cols.append(j)
            values.append(probability)
    size = len(states)
    return sparse.coo_matrix((values, (rows, cols)), shape=(size, size)).tocsr()


def check_rows(chain: ChainKernel, states: Iterable[State]) -> float:
    """Vérifie l'invariant de somme des lignes ; renvoie l'écart maximal observé"""
    worst = 0.0
    for state in states:
        total = math.fsum(p for _, p in chain.row(state))
        worst = max(worst, abs(total - 1.0))
    return worst


def _states_reaching(matrix: sparse.csr_matrix, sources: np.ndarray) -> np.ndarray:
    """États depuis lesquels un ensemble d'états est atteignable (parcours inverse)"""
    reverse = matrix.T.tocsr()
    reached = np.zeros(matrix.shape[0], dtype=bool)
    reached[sources] = True
    queue = deque(int(s) for s in sources)
    while queue:
        j = queue.popleft()
        for i in reverse.indices[reverse.indptr[j]:reverse.indptr[j + 1]]:
            if not reached[i]:
                reached[i] = True
                queue.append(int(i))
    return reached


def solve_expected_hitting(chain: ChainKernel, target: Any, states: Sequence[State],
                           dense_limit: int = 5000, tolerance: float = 1e-10) -> Dict[State, float]:
    """
    Temps d'atteinte moyens exacts par analyse au premier pas

    Résout E[T|s] = 1 + sum_s' P(s,s') E[T|s'] avec E[T|cible] = 0 :
    élimination directe dense jusqu'à dense_limit états transitoires,
    factorisation creuse au-delà, puis raffinement itératif jusqu'au
    résidu relatif demandé.

    Args:
        chain: Chaîne avec lignes exactes
        target: Ensemble d'états cible ou prédicat
        states: Énumération finie fermée
        dense_limit: Seuil dense / creux
        tolerance: Résidu relatif maximal

    Returns:
        Dict: état -> E[T | X_0 = état]

    Raises:
        ChainError: NOT_CLOSED, SINGULAR
    """
    target = as_target(target)
    states = list(states)
    in_target = np.array([target(s) for s in states], dtype=bool)
    if not in_target.any():
        raise ChainError('SINGULAR', "aucun état de l'énumération n'appartient à la cible")

    matrix = transition_matrix(chain, states, include=~in_target)

    reaching = _states_reaching(matrix, np.flatnonzero(in_target))
    if not reaching.all():
        stuck = [states[i] for i in np.flatnonzero(~reaching)[:10]]
        raise ChainError('SINGULAR', f"cible inatteignable depuis {stuck}")

    transient = np.flatnonzero(~in_target)
    result = {s: 0.0 for s, hit in zip(states, in_target) if hit}
    if transient.size == 0:
        return result

    q = matrix[transient][:, transient]
    system = (sparse.identity(transient.size, format='csr') - q).tocsc()
    rhs = np.ones(transient.size)

    if transient.size <= dense_limit:
        dense = system.toarray()
        solution = scipy.linalg.solve(dense, rhs)
        solve = lambda b: scipy.linalg.solve(dense, b)
    else:
        lu = sla.splu(system)
        solution = lu.solve(rhs)
        solve = lu.solve

    residual = _relative_residual(system, solution, rhs)
    for _ in range(5):
        if residual <= tolerance:
            break
        solution = solution + solve(rhs - system @ solution)
        residual = _relative_residual(system, solution, rhs)

    if not np.all(np.isfinite(solution)):
        raise ChainError('SINGULAR', "solution non finie")
    if residual > tolerance:
        logger.warning(f"⚠️ {chain.name}: résidu relatif {residual:.2e} > {tolerance:.0e}")

    logger.debug(f"{chain.name}: système de {transient.size} états résolu (résidu {residual:.1e})")
    for i, value in zip(transient, solution):
        result[states[i]] = float(value)
    return result


def _relative_residual(system: sparse.spmatrix, solution: np.ndarray, rhs: np.ndarray) -> float:
    residual = np.abs(system @ solution - rhs).max()
    scale = sla.norm(system, np.inf) * np.abs(solution).max() + np.abs(rhs).max()
    return float(residual / scale)


# ==============================================================================
# CHAÎNES DE RÉFÉRENCE
# ==============================================================================

def make_decrement_chain() -> ChainKernel:
    """Chaîne déterministe x -> x-1, absorbée en 0"""
    def step(x, rng):
        return x - 1 if x > 0 else 0

    def row(x):
        return [(x - 1 if x > 0 else 0, 1.0)]

    return ChainKernel('decrement', step, row)


def make_constant_chain(state: State) -> ChainKernel:
    """Chaîne figée : chaque état reste sur place"""
    return ChainKernel(f'constant({state})', lambda x, rng: x, lambda x: [(x, 1.0)],
                       parameters={'state': state})


def make_two_state_chain(p: float) -> ChainKernel:
    """Depuis 1 aller en 0 avec probabilité p, sinon rester ; 0 absorbant"""
    if not 0 < p <= 1:
        raise ChainError('BAD_PROBABILITY', f"p doit être dans (0,1], reçu {p}")

    def step(x, rng):
        if x == 0:
            return 0
        return 0 if rng.random() < p else x

    def row(x):
        if x == 0:
            return [(0, 1.0)]
        return [(0, p), (x, 1.0 - p)] if p < 1 else [(0, 1.0)]

    return ChainKernel('two_state', step, row, parameters={'p': p})


def make_biased_walk(p_down: float, cap: Optional[int] = None, floor: str = 'absorb') -> ChainKernel:
    """
    Marche ±1 : -1 avec probabilité p_down, +1 sinon

    Args:
        p_down: Probabilité de descendre
        cap: Plafond réfléchissant (reste sur place au lieu de monter), None = non borné
        floor: 'absorb' (0 absorbant) ou 'reflect' (en 0, un pas vers le bas reste en 0)
    """
    if not 0 <= p_down <= 1:
        raise ChainError('BAD_PROBABILITY', f"p_down doit être dans [0,1], reçu {p_down}")
    if floor not in ('absorb', 'reflect'):
        raise ChainError('BAD_FLOOR', f"comportement en 0 inconnu: {floor}")
    absorbing = floor == 'absorb'

    def step(x, rng):
        if x == 0 and absorbing:
            return 0
        if rng.random() < p_down:
            return max(x - 1, 0)
        return x if cap is not None and x >= cap else x + 1

    def row(x):
        if x == 0 and absorbing:
            return [(0, 1.0)]
        up = x if cap is not None and x >= cap else x + 1
        down = max(x - 1, 0)
        if up == down:
            return [(up, 1.0)]
        return [(down, p_down), (up, 1.0 - p_down)]

    block = None
    if cap is None:
        def block(x, length, rng):
            increments = np.where(rng.random(length) < p_down, -1, 1)
            path = x + np.cumsum(increments)
            if absorbing:
                hits = np.flatnonzero(path <= 0)
                if hits.size:
                    path[hits[0]:] = 0
            else:
                # Réflexion paresseuse en 0 (formule de Skorokhod discrète)
                path = path - np.minimum(np.minimum.accumulate(path), 0)
            return path

    return ChainKernel(
        f'biased_walk(p_down={p_down})', step, row,
        enumerable=cap is not None,
        sample_block=block,
        parameters={'p_down': p_down, 'cap': cap, 'floor': floor}
    )


def make_doubling_or_zero_chain() -> ChainKernel:
    """
    Depuis x > 0 : 0 ou 2x avec probabilité 1/2 chacun

    E[T] = 2 alors que E[X_t] = X_0 pour tout t : la borne inverse naïve
    n/c échoue et le terme limite de la borne inverse est indispensable.
    """
    def step(x, rng):
        if x == 0:
            return 0
        return 0 if rng.random() < 0.5 else 2 * x

    def row(x):
        return [(0, 1.0)] if x == 0 else [(0, 0.5), (2 * x, 0.5)]

    return ChainKernel('doubling_or_zero', step, row, enumerable=False)
