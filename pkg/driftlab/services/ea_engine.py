#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
SERVICE MOTEUR EA - DRIFTLAB
============================

Algorithme (1+1)-EA : mutation bit à bit au taux c/n, acceptation si
f(enfant) >= f(parent), canaux de bruit de type 1 (verdict imposé) et
de type 2 (pénalité positive), sondes de densité de zéros et chaîne
exacte du nombre de zéros pour OneMax.

Ordre de consommation de l'aléa dans un pas : bits de la descendance,
pièce de type 1, pièce de type 2, tirages de l'adversaire.

Version: 1.0.0
"""

import math
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import stats

from driftlab.errors import EAError
from driftlab.services.chain_core import ChainKernel, solve_expected_hitting
from driftlab.services.fitness_lib import FitnessFunction
from driftlab.utils.helpers import SeedLike, make_rng
from driftlab.utils.result_writer import write_csv

logger = logging.getLogger(__name__)


# ==============================================================================
# TYPES
# ==============================================================================

class BitString:
    """Chaîne de bits immuable de longueur fixe (positions 0-based)"""

    __slots__ = ('bits',)

    def __init__(self, bits: Iterable[int]):
        array = np.array(bits, dtype=np.uint8)
        if array.ndim != 1 or np.any(array > 1):
            raise EAError('BAD_RANGE', "une BitString est un vecteur de 0 et de 1")
        array.flags.writeable = False
        object.__setattr__(self, 'bits', array)

    def __setattr__(self, key, value):
        raise AttributeError("BitString est immuable")

    @classmethod
    def zeros(cls, n: int) -> 'BitString':
        return cls(np.zeros(n, dtype=np.uint8))

    @classmethod
    def ones(cls, n: int) -> 'BitString':
        return cls(np.ones(n, dtype=np.uint8))

    @classmethod
    def from_string(cls, text: str) -> 'BitString':
        if any(ch not in '01' for ch in text):
            raise EAError('BAD_RANGE', f"caractères invalides dans {text!r}")
        return cls([int(ch) for ch in text])

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> 'BitString':
        return cls(rng.integers(0, 2, n, dtype=np.uint8))

    def flipped(self, positions: Iterable[int]) -> 'BitString':
        bits = self.bits.copy()
        index = np.asarray(list(positions) if not isinstance(positions, np.ndarray) else positions, dtype=np.int64)
        bits[index] ^= 1
        return BitString(bits)

    @property
    def n(self) -> int:
        return int(self.bits.size)

    @property
    def zero_count(self) -> int:
        return self.n - self.one_count

    @property
    def one_count(self) -> int:
        return int(np.count_nonzero(self.bits))

    def density(self, index_set: Iterable[int]) -> float:
        return density(self, index_set)

    def __len__(self) -> int:
        return self.n

    def __eq__(self, other) -> bool:
        return isinstance(other, BitString) and np.array_equal(self.bits, other.bits)

    def __hash__(self) -> int:
        return hash(self.bits.tobytes())

    def __str__(self) -> str:
        return ''.join('1' if b else '0' for b in self.bits)

    def __repr__(self) -> str:
        text = str(self) if self.n <= 32 else f"{str(self)[:32]}..."
        return f"BitString({text})"


@dataclass(frozen=True)
class EAParams:
    """Paramètres de mutation : chaque bit bascule avec probabilité c/n"""
    n: int
    c: float

    def __post_init__(self):
        if self.n < 1:
            raise EAError('BAD_RANGE', f"n doit être >= 1, reçu {self.n}")
        if not 0 < self.c <= self.n:
            raise EAError('BAD_RANGE', f"c doit être dans (0, n], reçu {self.c}")

    @property
    def flip_probability(self) -> float:
        return self.c / self.n


class Adversary1(str, Enum):
    NONE = 'NONE'
    ALWAYS_ACCEPT = 'ALWAYS_ACCEPT'
    ALWAYS_REJECT = 'ALWAYS_REJECT'


class Adversary2(str, Enum):
    ZERO = 'ZERO'
    INFINITE = 'INFINITE'
    CONSTANT = 'CONSTANT'


@dataclass(frozen=True)
class NoiseConfig:
    """
    Bruit par tour

    Type 1 : avec probabilité delta1 le verdict de l'adversaire remplace la
    comparaison (NONE : la comparaison ordinaire s'applique).
    Type 2 : avec probabilité 1 - delta2 une pénalité >= 0, fixée avant de
    consulter la descendance, est retranchée à f(enfant).
    """
    delta1: float = 0.0
    delta2: float = 1.0
    adversary1: Adversary1 = Adversary1.NONE
    adversary2: Adversary2 = Adversary2.ZERO
    penalty: float = 0.0
    notes: Dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for name in ('delta1', 'delta2'):
            value = getattr(self, name)
            if not 0 <= value <= 1:
                raise EAError('BAD_PROBABILITY', f"{name} doit être dans [0,1], reçu {value}")
        if self.penalty < 0:
            raise EAError('BAD_RANGE', f"pénalité négative: {self.penalty}")
        object.__setattr__(self, 'adversary1', Adversary1(self.adversary1))
        object.__setattr__(self, 'adversary2', Adversary2(self.adversary2))

    @property
    def noiseless(self) -> bool:
        return self.delta1 == 0 and self.delta2 == 1

    def penalty_value(self) -> float:
        if self.adversary2 is Adversary2.INFINITE:
            return math.inf
        if self.adversary2 is Adversary2.CONSTANT:
            return float(self.penalty)
        return 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            'delta1': self.delta1,
            'delta2': self.delta2,
            'adversary1': self.adversary1.value,
            'adversary2': self.adversary2.value,
            'penalty': self.penalty,
            'notes': dict(self.notes),
        }


NOISELESS = NoiseConfig()


class NoiseEvents(NamedTuple):
    type1: bool = False
    type2: bool = False
    penalty: float = 0.0
    verdict: Optional[bool] = None


class EAStep(NamedTuple):
    next: BitString
    accepted: bool
    noise_events: NoiseEvents


@dataclass
class OptimizationResult:
    """Résultat d'un run : steps <= budget, status OPTIMUM / CENSORED / CAP_REACHED"""
    steps: int
    budget: int
    status: str
    final_point: BitString
    final_value: Any
    accepted_count: int
    trace: List[Tuple[int, str, float]] = field(default_factory=list)
    hit_optimum_at: Optional[int] = None

    @property
    def censored(self) -> bool:
        return self.status == 'CENSORED'

    @property
    def reached_optimum(self) -> bool:
        return self.hit_optimum_at is not None


# ==============================================================================
# MUTATION ET PAS
# ==============================================================================

def _flip_positions(n: int, p: float, rng: np.random.Generator) -> np.ndarray:
    """k ~ Bin(n, p) puis un k-sous-ensemble uniforme : même loi que n pièces indépendantes"""
    k = int(rng.binomial(n, p))
    if k == 0:
        return np.empty(0, dtype=np.int64)
    if k == n:
        return np.arange(n, dtype=np.int64)
    return rng.choice(n, k, replace=False).astype(np.int64)


def _check_length(point: BitString, params: EAParams):
    if point.n != params.n:
        raise EAError('LENGTH_MISMATCH', f"longueur {point.n} différente de n={params.n}")


def mutate(parent: BitString, params: EAParams, rng: SeedLike) -> BitString:
    """
    Bascule chaque bit indépendamment avec probabilité c/n

    Raises:
        EAError: LENGTH_MISMATCH
    """
    _check_length(parent, params)
    rng = make_rng(rng)
    return parent.flipped(_flip_positions(params.n, params.flip_probability, rng))


def _coin(probability: float, rng: np.random.Generator) -> bool:
    """Pièce de probabilité donnée ; aucun tirage si la probabilité vaut 0 ou 1"""
    if probability <= 0:
        return False
    if probability >= 1:
        return True
    return bool(rng.random() < probability)


def _advance(bits: np.ndarray, value: Any, f: FitnessFunction, params: EAParams,
             noise: NoiseConfig, rng: np.random.Generator):
    """Un tour de l'EA sur des bits bruts ; renvoie (bits, valeur, accepté, événements)"""
    positions = _flip_positions(params.n, params.flip_probability, rng)
    child = bits.copy()
    child[positions] ^= 1
    child_value, difference = f.compare(bits, value, child, positions)

    if noise.noiseless:
        accepted = difference >= 0
        events = NoiseEvents()
    else:
        type1 = _coin(noise.delta1, rng)
        type2 = not _coin(noise.delta2, rng)
        if type1:
            if noise.adversary1 is Adversary1.ALWAYS_ACCEPT:
                accepted = True
            elif noise.adversary1 is Adversary1.ALWAYS_REJECT:
                accepted = False
            else:
                accepted = difference >= 0
            events = NoiseEvents(True, type2, 0.0, accepted)
        elif type2:
            penalty = noise.penalty_value()
            accepted = difference >= penalty
            events = NoiseEvents(False, True, penalty, accepted)
        else:
            accepted = difference >= 0
            events = NoiseEvents(False, False, 0.0, accepted)

    if not accepted:
        return bits, value, False, events

    f.notify_accept(child)
    if f.stateful:
        child_value = f.evaluate(child)
    return child, child_value, True, events


def ea_step(current: BitString, f: FitnessFunction, params: EAParams, noise: NoiseConfig,
            rng: SeedLike) -> EAStep:
    """
    Un tour : mutation, bruit éventuel, acceptation si f(enfant) >= f(parent)

    Returns:
        EAStep: (next, accepted, noise_events)
    """
    _check_length(current, params)
    rng = make_rng(rng)
    bits, _, accepted, events = _advance(current.bits.copy(), f.evaluate(current.bits), f,
                                         params, noise, rng)
    return EAStep(BitString(bits) if accepted else current, bool(accepted), events)


# ==============================================================================
# RUNS
# ==============================================================================

Probe = Callable[[BitString], float]


def run_ea(f: FitnessFunction, params: EAParams, start: Union[BitString, str] = 'random',
           noise: Optional[NoiseConfig] = None, budget: int = 0, seed: SeedLike = 0,
           probes: Optional[Dict[str, Probe]] = None, probe_stride: int = 1,
           stop_at_optimum: bool = True, allow_no_optimum: bool = False) -> OptimizationResult:
    """
    Itère l'EA jusqu'à l'optimum ou l'épuisement du budget

    Une fonction à état (f~) est modifiée en place : cloner avant chaque run.

    Args:
        f: Fonction de fitness
        params: Paramètres de mutation
        start: BitString, 'random' (tiré du même flux) ou 'zeros'
        noise: Bruit (aucun par défaut)
        budget: Nombre maximal de tours
        seed: Graine du run
        probes: Sondes nommées enregistrées tous les probe_stride tours
        probe_stride: Pas d'enregistrement
        stop_at_optimum: False pour continuer à sonder après l'optimum
        allow_no_optimum: Autorise un run sondé censuré sans prédicat d'optimum

    Returns:
        OptimizationResult

    Raises:
        EAError: NO_OPTIMUM_PREDICATE, LENGTH_MISMATCH, BAD_BUDGET
    """
    if budget < 0:
        raise EAError('BAD_BUDGET', f"budget négatif: {budget}")
    if probe_stride < 1:
        raise EAError('BAD_STRIDE', f"probe_stride doit être >= 1, reçu {probe_stride}")
    if not f.has_optimum and not allow_no_optimum:
        raise EAError('NO_OPTIMUM_PREDICATE', f"{f.name} ne sait pas reconnaître son maximum")

    noise = noise or NOISELESS
    rng = make_rng(seed)
    point = _start_point(start, params, rng)
    _check_length(point, params)

    bits = point.bits.copy()
    value = f.evaluate(bits)
    optimum_known = f.has_optimum
    probes = probes or {}
    trace: List[Tuple[int, str, float]] = []
    accepted_count = 0
    hit_at = 0 if optimum_known and f.is_optimal(bits) else None

    def record(t: int, current: np.ndarray):
        snapshot = BitString(current)
        for name, probe in probes.items():
            trace.append((t, name, float(probe(snapshot))))

    if probes:
        record(0, bits)

    if hit_at is not None and stop_at_optimum:
        return OptimizationResult(0, budget, 'OPTIMUM', BitString(bits), value, 0, trace, 0)

    status = 'CENSORED'
    steps = budget
    for t in range(1, budget + 1):
        bits, value, accepted, _ = _advance(bits, value, f, params, noise, rng)
        if accepted:
            accepted_count += 1
            if hit_at is None and optimum_known and f.is_optimal(bits):
                hit_at = t
            if getattr(f, 'cap_reached', False):
                status, steps = 'CAP_REACHED', t
                break
        if probes and t % probe_stride == 0:
            record(t, bits)
        if hit_at is not None:
            if stop_at_optimum:
                status, steps = 'OPTIMUM', t
                break
            if noise.noiseless and not f.stateful:
                # L'optimum est absorbant : on complète la trace sans simuler
                _pad_trace(trace, probes, bits, t, budget, probe_stride)
                status, steps = 'OPTIMUM', hit_at
                break
    else:
        if hit_at is not None:
            status, steps = 'OPTIMUM', hit_at

    if status == 'CENSORED':
        logger.debug(f"run censuré au budget {budget} ({f.name}, n={params.n}, c={params.c})")

    final = BitString(bits)
    if not f.stateful and isinstance(value, float):
        value = f.evaluate(bits)
    return OptimizationResult(steps, budget, status, final, value, accepted_count, trace, hit_at)


def _start_point(start: Union[BitString, str], params: EAParams, rng: np.random.Generator) -> BitString:
    if isinstance(start, BitString):
        return start
    if start == 'random':
        return BitString.random(params.n, rng)
    if start == 'zeros':
        return BitString.zeros(params.n)
    if start == 'ones':
        return BitString.ones(params.n)
    raise EAError('BAD_RANGE', f"point de départ inconnu: {start!r}")


def _pad_trace(trace: list, probes: Dict[str, Probe], bits: np.ndarray, t: int, budget: int, stride: int):
    if not probes:
        return
    snapshot = BitString(bits)
    values = {name: float(probe(snapshot)) for name, probe in probes.items()}
    first = (t // stride + 1) * stride
    for moment in range(first, budget + 1, stride):
        for name in probes:
            trace.append((moment, name, values[name]))


def density(point: BitString, index_set: Iterable[int]) -> float:
    """
    Fraction de zéros aux positions données

    Raises:
        EAError: EMPTY_SET, BAD_RANGE
    """
    index = np.fromiter(index_set, dtype=np.int64) if not isinstance(index_set, np.ndarray) \
        else index_set.astype(np.int64)
    if index.size == 0:
        raise EAError('EMPTY_SET', "ensemble d'indices vide")
    bits = getattr(point, 'bits', point)
    if index.min() < 0 or index.max() >= len(bits):
        raise EAError('BAD_RANGE', f"positions hors de [0, {len(bits)})")
    return float(np.count_nonzero(np.asarray(bits)[index] == 0) / index.size)


def trace_to_csv(trace: Sequence[Tuple[int, str, float]], path: str) -> pd.DataFrame:
    """Écrit une trace de sondes au format t,probe_name,value"""
    frame = pd.DataFrame(list(trace), columns=['t', 'probe_name', 'value'])
    write_csv(frame, path)
    return frame


# ==============================================================================
# CHAÎNES
# ==============================================================================

def onemax_zero_chain(n: int, c: float) -> ChainKernel:
    """
    Processus exact du nombre de zéros de l'EA sur OneMax

    Depuis x zéros : r ~ Bin(x, p) zéros basculés, s ~ Bin(n-x, p) uns
    basculés ; la descendance compte x - r + s zéros et n'est acceptée que
    si s <= r. Les mouvements rejetés restent en x.
    """
    params = EAParams(n, c)
    p = params.flip_probability

    def step(x, rng):
        r = int(rng.binomial(x, p)) if x else 0
        s = int(rng.binomial(n - x, p)) if x < n else 0
        return x - r + s if s <= r else x

    def row(x):
        zeros_flipped = stats.binom.pmf(np.arange(x + 1), x, p)
        ones_flipped = stats.binom.pmf(np.arange(n - x + 1), n - x, p)
        joint = np.outer(zeros_flipped, ones_flipped)  # joint[r, s]
        moves = {}
        for d in range(1, x + 1):
            # r - s = d, 0 <= s <= n - x
            probability = float(np.trace(joint, offset=-d))
            if probability > 0:
                moves[x - d] = probability
        stay = float(np.triu(joint).sum())
        return sorted(moves.items()) + [(x, stay)]

    return ChainKernel(f'onemax_zeros(n={n}, c={c})', step, row,
                       parameters={'n': n, 'c': c})


def onemax_expected_time(n: int, c: float, start_zeros: Optional[int] = None, **solver_options) -> float:
    """E[T] exact de OneMax depuis start_zeros zéros (tous zéros par défaut)"""
    chain = onemax_zero_chain(n, c)
    solution = solve_expected_hitting(chain, 0, range(n + 1), **solver_options)
    return solution[n if start_zeros is None else start_zeros]


def make_ea_chain(fitness: FitnessFunction, params: EAParams,
                  noise: Optional[NoiseConfig] = None) -> ChainKernel:
    """
    L'EA vu comme chaîne sur les BitString (fitness sans état uniquement)

    Raises:
        EAError: STATEFUL_FITNESS
    """
    if fitness.stateful:
        raise EAError('STATEFUL_FITNESS', "la chaîne EA exige une fitness sans état")
    noise = noise or NOISELESS

    def step(point, rng):
        bits, _, accepted, _ = _advance(point.bits.copy(), fitness.evaluate(point.bits),
                                        fitness, params, noise, rng)
        return BitString(bits) if accepted else point

    return ChainKernel(
        f'ea({fitness.name}, n={params.n}, c={params.c})', step,
        enumerable=False, state_kind='bitstring',
        parameters={'n': params.n, 'c': params.c, 'noise': noise.to_dict()}
    )
