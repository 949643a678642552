#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
SERVICE BORNES DE DRIFT - DRIFTLAB
==================================

Bornes fermées sur les temps d'atteinte (drift additif, inverse,
deux phases, rééchelonné, variable, multiplicatif en moyenne et en
queue, drift négatif) et inégalité binomiale, sous forme de rapports
comparables aux temps exacts ou empiriques.

Les logarithmes sont naturels partout.

Version: 1.0.0
"""

import json
import math
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import stats

from driftlab.errors import BoundError
from driftlab.services.chain_core import ChainKernel, as_target, empirical_drift, exact_drift
from driftlab.utils.helpers import derive_seed

logger = logging.getLogger(__name__)


class TheoremId(str, Enum):
    ADDITIVE = 'ADDITIVE'
    ADDITIVE_REVERSE = 'ADDITIVE_REVERSE'
    TWO_PHASE = 'TWO_PHASE'
    RESCALED = 'RESCALED'
    VARIABLE = 'VARIABLE'
    MULTIPLICATIVE_MEAN = 'MULTIPLICATIVE_MEAN'
    MULTIPLICATIVE_TAIL = 'MULTIPLICATIVE_TAIL'
    NEGATIVE_DRIFT = 'NEGATIVE_DRIFT'


class Direction(str, Enum):
    UPPER = 'UPPER'
    LOWER = 'LOWER'


BoundValue = Union[float, Tuple[int, float]]


@dataclass(frozen=True)
class DriftBoundReport:
    """Rapport de borne : théorème, paramètres utilisés, valeur, sens"""
    theorem_id: TheoremId
    inputs: Dict[str, Any]
    bound_value: BoundValue
    direction: Direction = Direction.UPPER

    def __post_init__(self):
        values = self.bound_value if isinstance(self.bound_value, tuple) else (self.bound_value,)
        if any(v < 0 for v in values):
            raise BoundError('NEGATIVE_BOUND', f"borne négative: {self.bound_value}")

    @property
    def value(self) -> float:
        """Valeur scalaire (seuil t pour les bornes de queue)"""
        if isinstance(self.bound_value, tuple):
            return float(self.bound_value[0])
        return float(self.bound_value)

    def holds_for(self, observed: float) -> bool:
        """La valeur observée respecte-t-elle la borne dans son sens ?"""
        if self.direction is Direction.UPPER:
            return observed <= self.value
        return observed >= self.value

    def to_dict(self) -> Dict[str, Any]:
        bound = list(self.bound_value) if isinstance(self.bound_value, tuple) else self.bound_value
        return {
            'theorem_id': self.theorem_id.value,
            'inputs': dict(self.inputs),
            'bound_value': bound,
            'direction': self.direction.value
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def _require_margin(c: float):
    if not c > 0:
        raise BoundError('NONPOSITIVE_MARGIN', f"la marge de drift doit être > 0, reçu {c}")


def _require_delta(delta: float):
    if not 0 < delta < 1:
        raise BoundError('BAD_DELTA', f"delta doit être dans (0,1), reçu {delta}")


def _function_name(func: Callable) -> str:
    return getattr(func, '__name__', None) or repr(func)


# ==============================================================================
# BORNES
# ==============================================================================

def additive_bound(n: float, c: float) -> DriftBoundReport:
    """
    Drift additif : E[T] <= n/c

    Args:
        n: État initial (>= 0)
        c: Marge de drift (> 0)
    """
    _require_margin(c)
    if n < 0:
        raise BoundError('BAD_STATE', f"état initial négatif: {n}")
    return DriftBoundReport(TheoremId.ADDITIVE, {'n': n, 'c': c}, n / c, Direction.UPPER)


def reverse_additive_lower(n: float, c: float, limit_term: float = 0.0) -> DriftBoundReport:
    """
    Version inverse : E[T] >= (n - liminf E[X_t]) / c

    Le terme limite est fourni par l'appelant (0 pour une chaîne absorbée en 0).
    """
    _require_margin(c)
    value = max(0.0, (n - limit_term) / c)
    return DriftBoundReport(
        TheoremId.ADDITIVE_REVERSE,
        {'n': n, 'c': c, 'limit_term': limit_term},
        value,
        Direction.LOWER
    )


def two_phase_bound(expected_T_C: float, p0: float, B: float) -> DriftBoundReport:
    """
    Deux phases : E[T] <= E[T_C] + (B+1)/p0

    Args:
        expected_T_C: Temps moyen pour passer sous C
        p0: Probabilité minimale de sauter en 0 depuis un état <= C
        B: Borne sur le temps moyen de retour sous C
    """
    if not 0 < p0 <= 1:
        raise BoundError('BAD_PROBABILITY', f"p0 doit être dans (0,1], reçu {p0}")
    if B < 0 or expected_T_C < 0:
        raise BoundError('BAD_RANGE', f"B et E[T_C] doivent être >= 0 (B={B}, E[T_C]={expected_T_C})")
    return DriftBoundReport(
        TheoremId.TWO_PHASE,
        {'expected_T_C': expected_T_C, 'p0': p0, 'B': B},
        expected_T_C + (B + 1) / p0,
        Direction.UPPER
    )


def rescaled_bound(g: Callable[[float], float], n: float, c: float) -> DriftBoundReport:
    """
    Drift rééchelonné : E[T_C] <= g(n)/c

    Énoncé pour des états entiers ; appliqué tel quel aux états fournis.
    """
    _require_margin(c)
    g_n = float(g(n))
    if g_n < 0:
        raise BoundError('BAD_POTENTIAL', f"g(n) doit être >= 0, reçu {g_n}")
    return DriftBoundReport(
        TheoremId.RESCALED,
        {'g': _function_name(g), 'g_n': g_n, 'n': n, 'c': c},
        g_n / c,
        Direction.UPPER
    )


def _as_array_function(func: Callable) -> Callable[[np.ndarray], np.ndarray]:
    """Rend une fonction scalaire applicable à un tableau numpy"""
    probe = np.array([1.0, 2.0])
    try:
        out = np.asarray(func(probe), dtype=float)
        if out.shape == probe.shape:
            return lambda xs: np.asarray(func(xs), dtype=float)
    except (TypeError, ValueError):
        pass
    vectorized = np.vectorize(func, otypes=[float])
    return lambda xs: vectorized(xs)


def _check_h_samples(values: np.ndarray, xs: np.ndarray):
    if np.any(~np.isfinite(values)) or np.any(values <= 0):
        bad = xs[np.flatnonzero(~(values > 0))[0]]
        raise BoundError('NONPOSITIVE_H', f"h doit être > 0 sur [1,n] ; échec en x={bad}")
    drops = np.flatnonzero(np.diff(values) < -1e-12 * np.abs(values[1:]))
    if drops.size:
        i = drops[0]
        raise BoundError('NOT_INCREASING',
                         f"h n'est pas croissante : h({xs[i]})={values[i]} > h({xs[i + 1]})={values[i + 1]}")


def variable_drift_bound(h: Callable[[float], float], n: float, quadrature_step: float = 1.0,
                         antiderivative: Optional[Callable[[float], float]] = None,
                         tolerance: float = 1e-8, max_refinements: int = 24) -> DriftBoundReport:
    """
    Drift variable : E[T] <= 1/h(1) + intégrale de 1/h sur [1,n]

    L'intégrale est une méthode des trapèzes composite au pas quadrature_step,
    raffinée par dichotomie (avec extrapolation de Richardson) jusqu'à ce que
    deux estimations successives diffèrent de moins de tolerance en relatif.
    Si une primitive de 1/h est fournie, la forme close est utilisée.

    Args:
        h: Fonction positive croissante sur [1,n]
        n: État initial (>= 1)
        quadrature_step: Pas initial de la quadrature
        antiderivative: Primitive de 1/h (optionnelle)
    """
    if n < 1:
        raise BoundError('BAD_STATE', f"n doit être >= 1, reçu {n}")
    if quadrature_step <= 0:
        raise BoundError('BAD_RANGE', f"pas de quadrature invalide: {quadrature_step}")

    h_arr = _as_array_function(h)
    intervals = max(1, int(math.ceil((n - 1) / quadrature_step))) if n > 1 else 1
    xs = np.linspace(1.0, float(n), intervals + 1)
    values = h_arr(xs)
    _check_h_samples(values, xs)

    inputs = {'h': _function_name(h), 'n': n, 'quadrature_step': quadrature_step}
    h_one = float(values[0])

    if n == 1:
        integral = 0.0
    elif antiderivative is not None:
        integral = float(antiderivative(n) - antiderivative(1.0))
        inputs['closed_form'] = True
    else:
        integral = _refined_trapezoid(h_arr, xs, values, tolerance, max_refinements)

    return DriftBoundReport(TheoremId.VARIABLE, inputs, 1.0 / h_one + integral, Direction.UPPER)


def _refined_trapezoid(h_arr: Callable, xs: np.ndarray, values: np.ndarray,
                       tolerance: float, max_refinements: int) -> float:
    """Trapèzes composites raffinés par dichotomie, estimations de Richardson comparées"""
    width = xs[1] - xs[0]
    inverse = 1.0 / values
    trapezoid = width * (inverse.sum() - 0.5 * (inverse[0] + inverse[-1]))
    previous_extrapolated = None

    for _ in range(max_refinements):
        midpoints = xs[:-1] + 0.5 * width
        mid_values = h_arr(midpoints)
        _check_h_samples(np.column_stack([values[:-1], mid_values]).ravel(),
                         np.column_stack([xs[:-1], midpoints]).ravel())
        refined = 0.5 * trapezoid + 0.5 * width * (1.0 / mid_values).sum()
        extrapolated = refined + (refined - trapezoid) / 3.0

        if previous_extrapolated is not None:
            if abs(extrapolated - previous_extrapolated) <= tolerance * abs(extrapolated):
                return float(extrapolated)

        previous_extrapolated = extrapolated
        trapezoid = refined
        merged = np.empty(xs.size + midpoints.size)
        merged[0::2], merged[1::2] = xs, midpoints
        merged_values = np.empty_like(merged)
        merged_values[0::2], merged_values[1::2] = values, mid_values
        xs, values, width = merged, merged_values, 0.5 * width

    logger.warning(f"⚠️ Quadrature non convergée après {max_refinements} raffinements")
    return float(previous_extrapolated)


def multiplicative_mean_bound(n: float, delta: float) -> DriftBoundReport:
    """Drift multiplicatif : E[T] <= (1 + ln n)/delta"""
    _require_delta(delta)
    if n < 1:
        raise BoundError('BAD_STATE', f"n doit être >= 1, reçu {n}")
    return DriftBoundReport(
        TheoremId.MULTIPLICATIVE_MEAN,
        {'n': n, 'delta': delta},
        (1.0 + math.log(n)) / delta,
        Direction.UPPER
    )


def multiplicative_tail(n: float, delta: float, k: float) -> DriftBoundReport:
    """
    Queue multiplicative : Pr[T > ceil((ln n + k)/|ln(1-delta)|)] <= e^{-k}

    Returns:
        DriftBoundReport: bound_value = (t_threshold, prob_bound)
    """
    _require_delta(delta)
    if not k > 0:
        raise BoundError('BAD_K', f"k doit être > 0, reçu {k}")
    if n < 1:
        raise BoundError('BAD_STATE', f"n doit être >= 1, reçu {n}")
    threshold = int(math.ceil((math.log(n) + k) / abs(math.log1p(-delta))))
    return DriftBoundReport(
        TheoremId.MULTIPLICATIVE_TAIL,
        {'n': n, 'delta': delta, 'k': k},
        (threshold, math.exp(-k)),
        Direction.UPPER
    )


def negative_drift_thresholds(a: float, b: float, epsilon: float, gamma: float, n: float) -> DriftBoundReport:
    """
    Drift négatif (a) : seuil (1+gamma)(b-a)n/epsilon dépassé avec probabilité exponentiellement faible

    La constante de l'exposant n'est pas calculée ; le volet (b)
    se valide empiriquement.
    """
    if not 0 < a < b:
        raise BoundError('BAD_INTERVAL', f"il faut 0 < a < b, reçu a={a}, b={b}")
    if not epsilon > 0:
        raise BoundError('NONPOSITIVE_MARGIN', f"epsilon doit être > 0, reçu {epsilon}")
    if gamma < 0:
        raise BoundError('BAD_RANGE', f"gamma doit être >= 0, reçu {gamma}")
    if n < 1:
        raise BoundError('BAD_STATE', f"n doit être >= 1, reçu {n}")
    return DriftBoundReport(
        TheoremId.NEGATIVE_DRIFT,
        {'a': a, 'b': b, 'epsilon': epsilon, 'gamma': gamma, 'n': n},
        (1.0 + gamma) * (b - a) * n / epsilon,
        Direction.UPPER
    )


def binomial_positive_lb(n: int, p: float) -> float:
    """Pr[Bin(n,p) > 0] >= np/(1+np)"""
    if n < 0:
        raise BoundError('BAD_RANGE', f"n doit être >= 0, reçu {n}")
    if not 0 <= p <= 1:
        raise BoundError('BAD_PROBABILITY', f"p doit être dans [0,1], reçu {p}")
    mean = n * p
    return mean / (1.0 + mean)


def binomial_positive_exact(n: int, p: float) -> float:
    """Probabilité exacte 1 - (1-p)^n"""
    return -math.expm1(n * math.log1p(-p)) if p < 1 else (1.0 if n > 0 else 0.0)


# ==============================================================================
# VÉRIFICATION DES HYPOTHÈSES
# ==============================================================================

@dataclass
class DriftConditionCheck:
    """Résultat d'une vérification de condition de drift sur un ensemble d'états"""
    kind: str
    holds: bool
    worst_slack: float
    checked_states: int
    violations: List[Any] = field(default_factory=list)
    method: str = 'exact'


def _required_change(kind: str, parameter: Any, x: float) -> float:
    """Variation moyenne maximale autorisée depuis x"""
    if kind == 'additive':
        return -parameter
    if kind == 'multiplicative':
        return -parameter * x
    if kind == 'variable':
        return -float(parameter(x))
    raise BoundError('BAD_RANGE', f"type de drift inconnu: {kind}")


def check_drift_condition(chain: ChainKernel, states: Sequence[Any], kind: str, parameter: Any,
                          target: Any = 0, samples: int = 2000, seed: int = 0,
                          tolerance: float = 1e-12) -> DriftConditionCheck:
    """
    Vérifie une condition de drift sur chaque état non cible

    Lignes exactes si la chaîne en expose, sinon drift empirique avec
    intervalles de confiance corrigés de Bonferroni sur tous les états sondés.

    Args:
        chain: Chaîne
        states: États à sonder
        kind: 'additive' (c), 'multiplicative' (delta) ou 'variable' (h)
        parameter: c, delta ou h
        target: Cible (états exclus de la vérification)
    """
    target = as_target(target)
    probed = [s for s in states if not target(s)]
    violations = []
    worst = math.inf

    if chain.has_exact_rows:
        for x in probed:
            slack = _required_change(kind, parameter, x) - exact_drift(chain, x)
            worst = min(worst, slack)
            if slack < -tolerance:
                violations.append(x)
        method = 'exact'
    else:
        z = stats.norm.ppf(1.0 - 0.05 / (2 * max(1, len(probed))))
        for i, x in enumerate(probed):
            estimate = empirical_drift(chain, x, samples, derive_seed(seed, i))
            half_width = estimate.half_width * z / 1.959963984540054
            slack = _required_change(kind, parameter, x) - estimate.mean
            worst = min(worst, slack)
            if slack + half_width < 0:
                violations.append(x)
        method = 'empirical_bonferroni'

    return DriftConditionCheck(kind, not violations, worst, len(probed), violations, method)


def negative_drift_conditions(chain: ChainKernel, states: Sequence[int], a: float, n: float,
                              epsilon: float, r: float, delta: float,
                              tolerance: float = 1e-12) -> Dict[str, Any]:
    """
    Hypothèses du théorème de drift négatif sur lignes exactes

    (1) E[X' - x | x] <= -epsilon pour tout x > a*n ;
    (2) Pr[|X' - x| >= j] <= r (1+delta)^{-j} pour tout j >= 0.
    """
    drift_ok, tail_ok = True, True
    worst_drift, worst_tail = -math.inf, -math.inf

    for x in states:
        row = chain.row(x)
        if x > a * n:
            change = exact_drift(chain, x)
            worst_drift = max(worst_drift, change)
            drift_ok &= change <= -epsilon + tolerance

        jumps = np.array([abs(successor - x) for successor, _ in row], dtype=float)
        probabilities = np.array([p for _, p in row], dtype=float)
        for j in range(int(jumps.max()) + 1 if jumps.size else 1):
            excess = probabilities[jumps >= j].sum() - r * (1.0 + delta) ** (-j)
            worst_tail = max(worst_tail, excess)
            tail_ok &= excess <= tolerance

    return {
        'drift_condition': bool(drift_ok),
        'jump_condition': bool(tail_ok),
        'worst_drift_above_an': worst_drift,
        'worst_jump_excess': worst_tail
    }
