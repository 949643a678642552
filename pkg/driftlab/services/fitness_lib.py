#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
SERVICE FONCTIONS DE FITNESS - DRIFTLAB
=======================================

Fonctions pseudo-booléennes : OneMax, fonctions linéaires (BinVal,
poids aléatoires), vérification exhaustive de stricte monotonie,
recherche de alpha et fonction monotone difficile à niveaux, en
version statique et dépendante du temps.

Les positions sont indexées à partir de 0.

Version: 1.0.0
"""

import math
import logging
from dataclasses import dataclass, asdict, replace
from enum import Enum
from typing import Any, Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from driftlab.errors import FitnessError
from driftlab.utils.helpers import make_rng, to_fraction

logger = logging.getLogger(__name__)

EXHAUSTIVE_LIMIT = 16
STATIC_SIZE_LIMIT = 10 ** 8
DEFAULT_LEVEL_CAP = 10 ** 6
INT64_WEIGHT_LIMIT = 62


def _bits(point: Any) -> np.ndarray:
    """Accepte une BitString ou un tableau de bits"""
    return np.asarray(getattr(point, 'bits', point), dtype=np.uint8)


# ==============================================================================
# BASE
# ==============================================================================

class FitnessFunction:
    """
    Fonction de fitness sur {0,1}^n

    Les sous-classes implémentent evaluate ; compare peut être spécialisée
    pour évaluer une descendance en O(nombre de bits modifiés).
    """

    name = 'fitness'
    stateful = False

    def __init__(self, n: int):
        if n < 1:
            raise FitnessError('BAD_RANGE', f"n doit être >= 1, reçu {n}")
        self.n = n

    @property
    def has_optimum(self) -> bool:
        return True

    def evaluate(self, bits: np.ndarray):
        raise NotImplementedError

    def __call__(self, point: Any):
        return self.evaluate(_bits(point))

    def compare(self, parent: np.ndarray, parent_value, child: np.ndarray,
                positions: np.ndarray) -> Tuple[Any, Any]:
        """
        Valeur de la descendance et différence f(enfant) - f(parent)

        Args:
            parent: Bits du parent
            parent_value: f(parent) déjà connu
            child: Bits de la descendance
            positions: Positions basculées

        Returns:
            Tuple: (f(enfant), f(enfant) - f(parent))
        """
        child_value = self.evaluate(child)
        return child_value, child_value - parent_value

    def is_optimal(self, bits: np.ndarray) -> bool:
        """Prédicat de maximum global (tous les bits à 1 par défaut)"""
        return bool(np.all(bits == 1))

    def notify_accept(self, bits: np.ndarray) -> None:
        """Notification d'acceptation (utile aux fonctions à état)"""

    def clone(self, seed: Optional[int] = None) -> 'FitnessFunction':
        return self

    def to_dict(self) -> Dict[str, Any]:
        return {'name': self.name, 'n': self.n}

    def __repr__(self) -> str:
        return f"{type(self).__name__}(n={self.n})"


class OneMax(FitnessFunction):
    """f(x) = nombre de bits à 1"""

    name = 'onemax'

    def evaluate(self, bits: np.ndarray) -> int:
        return int(np.count_nonzero(bits))

    def compare(self, parent, parent_value, child, positions):
        difference = int(positions.size) - 2 * int(np.count_nonzero(parent[positions]))
        return parent_value + difference, difference


class CallableFitness(FitnessFunction):
    """Enveloppe une fonction Python ; le prédicat d'optimum est optionnel"""

    def __init__(self, n: int, func: Callable[[np.ndarray], Any],
                 optimum: Optional[Callable[[np.ndarray], bool]] = None, name: str = 'callable'):
        super().__init__(n)
        self._func = func
        self._optimum = optimum
        self.name = name

    @property
    def has_optimum(self) -> bool:
        return self._optimum is not None

    def evaluate(self, bits):
        return self._func(bits)

    def is_optimal(self, bits):
        if self._optimum is None:
            raise FitnessError('NO_OPTIMUM_PREDICATE', f"{self.name} ne sait pas reconnaître son maximum")
        return bool(self._optimum(bits))


class LinearFitness(FitnessFunction):
    """
    f(x) = sum_i w_i x_i avec w_1 >= w_2 >= ... >= w_n > 0

    Les poids entiers trop grands pour int64 sont gardés en entiers Python
    (arithmétique exacte) ; les poids non triés sont triés.
    """

    name = 'linear'

    def __init__(self, weights: Sequence[Any], name: str = 'linear'):
        super().__init__(len(weights))
        self.name = name

        if any(w <= 0 for w in weights):
            bad = next(w for w in weights if w <= 0)
            raise FitnessError('NONPOSITIVE_WEIGHT', f"poids non positif: {bad}")

        ordered = sorted(weights, reverse=True)
        if list(weights) != ordered:
            logger.debug(f"{name}: poids triés par ordre décroissant")

        if all(isinstance(w, (int, np.integer)) for w in ordered):
            big = max(int(w) for w in ordered) >= 2 ** INT64_WEIGHT_LIMIT // len(ordered)
            self.weights = np.array([int(w) for w in ordered], dtype=object if big else np.int64)
            self.exact = True
        else:
            self.weights = np.array(ordered, dtype=float)
            self.exact = False

    def _cast(self, value):
        return int(value) if self.exact else float(value)

    def evaluate(self, bits: np.ndarray):
        mask = bits.astype(bool)
        return self._cast(self.weights[mask].sum()) if mask.any() else self._cast(0)

    def compare(self, parent, parent_value, child, positions):
        if positions.size == 0:
            return parent_value, self._cast(0)
        signs = 1 - 2 * parent[positions].astype(np.int64)
        difference = self._cast((self.weights[positions] * signs).sum())
        return parent_value + difference, difference

    def to_dict(self) -> Dict[str, Any]:
        data = super().to_dict()
        data['weights'] = [self._cast(w) for w in self.weights] if self.n <= 64 else None
        return data


def onemax(n: int) -> OneMax:
    return OneMax(n)


def linear(weights: Sequence[Any]) -> LinearFitness:
    return LinearFitness(weights)


def binval(n: int) -> LinearFitness:
    """Poids 2^{n-1-i} (entiers exacts, quel que soit n)"""
    if n < 1:
        raise FitnessError('BAD_RANGE', f"n doit être >= 1, reçu {n}")
    return LinearFitness([2 ** (n - 1 - i) for i in range(n)], name='binval')


def random_linear(n: int, distribution: str = 'uniform', seed: int = 0) -> LinearFitness:
    """
    Poids i.i.d. strictement positifs, triés

    Args:
        n: Dimension
        distribution: 'uniform' (sur (0,1]), 'exponential' ou 'integer' (1..n)
        seed: Graine
    """
    rng = make_rng(seed)
    if distribution == 'uniform':
        weights = 1.0 - rng.random(n)
    elif distribution == 'exponential':
        weights = rng.exponential(1.0, n) + np.finfo(float).tiny
    elif distribution == 'integer':
        weights = rng.integers(1, n + 1, n).tolist()
    else:
        raise FitnessError('BAD_RANGE', f"distribution inconnue: {distribution}")
    fitness = LinearFitness(list(weights), name='random_linear')
    fitness.distribution = distribution
    return fitness


def make_fitness(kind: str, n: int, seed: int = 0) -> FitnessFunction:
    """Fabrique par nom ('onemax', 'binval', 'random_linear')"""
    factories = {
        'onemax': lambda: onemax(n),
        'binval': lambda: binval(n),
        'random_linear': lambda: random_linear(n, seed=seed),
    }
    if kind not in factories:
        raise FitnessError('BAD_RANGE', f"fitness inconnue: {kind}")
    return factories[kind]()


# ==============================================================================
# MONOTONIE
# ==============================================================================

class MonotonicityVerdict(NamedTuple):
    holds: bool
    witness: Optional[Tuple[str, str]] = None

    def __bool__(self) -> bool:
        return self.holds


def is_strictly_monotone(f: Callable, n: int) -> MonotonicityVerdict:
    """
    Vérifie exhaustivement la stricte monotonie de f sur {0,1}^n

    Par transitivité il suffit de contrôler les paires couvrantes
    (x, x + e_i) : n * 2^{n-1} comparaisons.

    Returns:
        MonotonicityVerdict: (holds, témoin (x, y) avec y >= x et f(y) <= f(x))

    Raises:
        FitnessError: TOO_LARGE pour n > 16
    """
    if n > EXHAUSTIVE_LIMIT:
        raise FitnessError('TOO_LARGE', f"vérification exhaustive limitée à n <= {EXHAUSTIVE_LIMIT}, reçu {n}")

    masks = np.arange(2 ** n, dtype=np.int64)
    table = ((masks[:, None] >> np.arange(n)) & 1).astype(np.uint8)
    evaluate = f.evaluate if isinstance(f, FitnessFunction) else f
    values = np.empty(masks.size, dtype=object)
    for m in range(masks.size):
        values[m] = evaluate(table[m])

    for i in range(n):
        lower = masks[(masks >> i) & 1 == 0]
        upper = lower | (1 << i)
        failing = np.flatnonzero(~(values[upper] > values[lower]).astype(bool))
        if failing.size:
            x, y = table[lower[failing[0]]], table[upper[failing[0]]]
            return MonotonicityVerdict(False, (''.join(map(str, x)), ''.join(map(str, y))))
    return MonotonicityVerdict(True)


# ==============================================================================
# CHOIX DE ALPHA
# ==============================================================================

def eq7_margin(alpha, c: float):
    """Marge de faisabilité alpha*c - e^{-(1-alpha)c} - alpha/(1-alpha)"""
    alpha = np.asarray(alpha, dtype=float)
    margin = alpha * c - np.exp(-(1.0 - alpha) * c) - alpha / (1.0 - alpha)
    return float(margin) if margin.ndim == 0 else margin


def find_alpha(c: float, grid_step: float = 1e-4) -> Optional[float]:
    """
    alpha dans (0, 1/2) de marge maximale, None si aucun n'est faisable

    Args:
        c: Paramètre de mutation (> 0)
        grid_step: Pas de la grille, dans (0, 0.01]
    """
    if not c > 0:
        raise FitnessError('BAD_RANGE', f"c doit être > 0, reçu {c}")
    if not 0 < grid_step <= 0.01:
        raise FitnessError('BAD_RANGE', f"pas de grille hors de (0, 0.01]: {grid_step}")

    grid = np.arange(1, int(math.ceil(0.5 / grid_step))) * grid_step
    grid = grid[grid < 0.5]
    margins = eq7_margin(grid, c)
    if not np.any(margins > 0):
        return None
    return float(grid[int(np.argmax(margins))])


# ==============================================================================
# FONCTION MONOTONE À NIVEAUX
# ==============================================================================

class HotMode(str, Enum):
    STATIC = 'STATIC'
    TIME_DEPENDENT = 'TIME_DEPENDENT'


class LevelAgreement(NamedTuple):
    """Niveau statique (ensembles déjà tirés) face au niveau suivi l~"""
    static_level: int
    tracked_level: int

    @property
    def agrees(self) -> bool:
        return self.static_level == self.tracked_level


@dataclass(frozen=True)
class HotMonotoneConfig:
    """Paramètres de la fonction à niveaux (tailles |A| = ceil(alpha n), |B| = ceil(beta n))"""
    n: int
    c: float
    alpha: float
    beta: float
    epsilon: float
    mu: Optional[float] = None
    level_cap: Optional[int] = None
    seed: int = 0

    @property
    def a_size(self) -> int:
        return math.ceil(to_fraction(self.alpha) * self.n)

    @property
    def b_size(self) -> int:
        return math.ceil(to_fraction(self.beta) * self.n)

    @property
    def zero_threshold(self) -> int:
        """Nombre maximal de zéros dans B : floor(epsilon * |B|), exact"""
        return math.floor(to_fraction(self.epsilon) * self.b_size)

    @property
    def max_level(self) -> int:
        if self.level_cap is not None:
            return int(self.level_cap)
        if self.mu is None:
            return DEFAULT_LEVEL_CAP
        exponent = self.mu * self.n
        if exponent >= math.log(DEFAULT_LEVEL_CAP):
            return DEFAULT_LEVEL_CAP
        return min(math.ceil(math.exp(exponent)), DEFAULT_LEVEL_CAP)

    def validate(self) -> None:
        problems = []
        if self.n < 1:
            problems.append(f"n={self.n} < 1")
        if self.b_size < 1:
            problems.append(f"ceil(beta n) = {self.b_size} < 1")
        if self.beta > self.alpha:
            problems.append(f"beta={self.beta} > alpha={self.alpha}")
        if not 0 < self.alpha < 0.5:
            problems.append(f"alpha={self.alpha} hors de (0, 1/2)")
        if self.a_size > self.n:
            problems.append(f"ceil(alpha n) = {self.a_size} > n")
        if not 0 < self.epsilon < 1:
            problems.append(f"epsilon={self.epsilon} hors de (0,1)")
        if self.max_level < 1:
            problems.append(f"plafond de niveaux {self.max_level} < 1")
        if problems:
            raise FitnessError('CONFIG_INFEASIBLE', "; ".join(problems))

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data.update(a_size=self.a_size, b_size=self.b_size, max_level=self.max_level)
        return data


class HotMonotoneFitness(FitnessFunction):
    """
    Fonction strictement monotone à niveaux

    f(x) = l(x) n^2 + n * sum_{i in A_{l+1}} x_i + sum_{i hors A_{l+1}} x_i,
    où l(x) est le plus grand niveau dont l'ensemble témoin B_l contient
    au plus epsilon |B_l| zéros (0 si aucun).

    En mode STATIC tous les ensembles sont tirés à la construction. En mode
    TIME_DEPENDENT seuls les niveaux <= l~ + 1 sont considérés, les
    ensembles A_{i+1}, B_{i+1} sont tirés au premier besoin (dans l'ordre,
    donc indépendamment du moment du tirage) et l~ ne décroît jamais.
    """

    name = 'hot_monotone'

    def __init__(self, config: HotMonotoneConfig, mode: HotMode = HotMode.TIME_DEPENDENT):
        config.validate()
        super().__init__(config.n)
        self.config = config
        self.mode = HotMode(mode)
        self.stateful = self.mode is HotMode.TIME_DEPENDENT
        self.max_level = config.max_level
        self._rng = make_rng(config.seed)
        self._a_sets: List[np.ndarray] = []
        self._b_sets: List[np.ndarray] = []
        self.current_level = 0
        self.level_log: List[int] = []

        if self.mode is HotMode.STATIC:
            if self.max_level * self.n > STATIC_SIZE_LIMIT:
                raise FitnessError('CONFIG_INFEASIBLE',
                                   f"mode STATIC: L_max * n = {self.max_level * self.n} > {STATIC_SIZE_LIMIT}")
            self._draw_until(self.max_level + 1)
            self._b_matrix = np.stack(self._b_sets[:self.max_level])
        else:
            self._draw_until(1)

    # --- ensembles ---------------------------------------------------------

    def _draw_until(self, level: int) -> None:
        """Tire A_i, B_i (indices 1-based dans le texte, 0-based ici) jusqu'à i = level"""
        a_size, b_size = self.config.a_size, self.config.b_size
        while len(self._a_sets) < level:
            a_set = np.sort(self._rng.choice(self.n, a_size, replace=False))
            b_set = np.sort(self._rng.choice(a_set, b_size, replace=False))
            self._a_sets.append(a_set)
            self._b_sets.append(b_set)

    def a_set(self, level: int) -> np.ndarray:
        """A_level (niveaux numérotés à partir de 1)"""
        return self._a_sets[level - 1]

    def b_set(self, level: int) -> np.ndarray:
        return self._b_sets[level - 1]

    @property
    def drawn_levels(self) -> int:
        return len(self._a_sets)

    @property
    def cap_reached(self) -> bool:
        return self.current_level >= self.max_level

    # --- niveaux -----------------------------------------------------------

    def _satisfies(self, bits: np.ndarray, level: int) -> bool:
        b_set = self._b_sets[level - 1]
        zeros = b_set.size - int(np.count_nonzero(bits[b_set]))
        return zeros <= self.config.zero_threshold

    def _static_level(self, bits: np.ndarray) -> int:
        zeros = self.config.b_size - bits[self._b_matrix].sum(axis=1, dtype=np.int64)
        satisfied = np.flatnonzero(zeros <= self.config.zero_threshold)
        return int(satisfied[-1]) + 1 if satisfied.size else 0

    def _bounded_level(self, bits: np.ndarray, highest: int) -> int:
        for level in range(highest, 0, -1):
            if self._satisfies(bits, level):
                return level
        return 0

    def level_of(self, bits: np.ndarray) -> int:
        if self.mode is HotMode.STATIC:
            return self._static_level(bits)
        highest = min(self.current_level + 1, self.max_level)
        self._draw_until(highest)
        return self._bounded_level(bits, highest)

    def static_level_agreement(self, point: Any) -> LevelAgreement:
        """
        Compare le niveau que la fonction statique donnerait à point, calculé
        sur les ensembles déjà tirés, au niveau suivi par la fonction

        Args:
            point: BitString ou tableau de bits

        Returns:
            LevelAgreement: (niveau statique, niveau suivi)
        """
        bits = _bits(point)
        if self.mode is HotMode.STATIC:
            level = self._static_level(bits)
            return LevelAgreement(level, level)
        static = self._bounded_level(bits, min(self.drawn_levels, self.max_level))
        return LevelAgreement(static, self.current_level)

    # --- évaluation --------------------------------------------------------

    def _value(self, bits: np.ndarray, level: int) -> int:
        self._draw_until(level + 1)
        a_set = self._a_sets[level]  # A_{level+1}
        ones_in_a = int(np.count_nonzero(bits[a_set]))
        return level * self.n * self.n + (self.n - 1) * ones_in_a + int(np.count_nonzero(bits))

    def evaluate(self, bits: np.ndarray) -> int:
        return self._value(bits, self.level_of(bits))

    def notify_accept(self, bits: np.ndarray) -> None:
        if self.mode is HotMode.STATIC:
            return
        new_level = self.level_of(bits)
        if new_level > self.current_level:
            self.current_level = new_level
            self.level_log.append(new_level)
            if self.cap_reached:
                logger.warning(f"⚠️ hot_monotone: plafond de niveaux {self.max_level} atteint")

    def clone(self, seed: Optional[int] = None) -> 'HotMonotoneFitness':
        if self.mode is HotMode.STATIC and seed is None:
            return self
        config = self.config if seed is None else replace(self.config, seed=int(seed))
        return HotMonotoneFitness(config, self.mode)

    def to_dict(self) -> Dict[str, Any]:
        data = {
            'name': self.name,
            'mode': self.mode.value,
            'config': self.config.to_dict(),
            'current_level': self.current_level,
            'drawn_levels': self.drawn_levels,
        }
        if self.n <= 64:
            data['a_sets'] = [a.tolist() for a in self._a_sets]
            data['b_sets'] = [b.tolist() for b in self._b_sets]
        return data


def hot_monotone(config: HotMonotoneConfig, mode: HotMode = HotMode.TIME_DEPENDENT) -> HotMonotoneFitness:
    return HotMonotoneFitness(config, mode)


def level(point: Any, fitness: FitnessFunction) -> int:
    """
    Niveau l (STATIC) ou l~ (TIME_DEPENDENT) du point

    Raises:
        FitnessError: WRONG_FITNESS_KIND
    """
    if not isinstance(fitness, HotMonotoneFitness):
        raise FitnessError('WRONG_FITNESS_KIND', f"{fitness!r} n'est pas une fonction à niveaux")
    return fitness.level_of(_bits(point))


def default_hot_config(n: int, c: float, seed: int = 0, level_cap: Optional[int] = None,
                       grid_step: float = 1e-4) -> HotMonotoneConfig:
    """
    alpha = find_alpha(c), beta = alpha/20, epsilon = alpha/10

    Hors de la plage faisable (c petit), alpha = 0.25 avec un avertissement.
    """
    alpha = find_alpha(c, grid_step)
    if alpha is None:
        alpha = 0.25
        logger.warning(f"⚠️ aucun alpha faisable pour c={c} : alpha=0.25 par défaut")
    return HotMonotoneConfig(
        n=n, c=c, alpha=alpha, beta=alpha / 20, epsilon=alpha / 10,
        level_cap=level_cap, seed=seed
    )
