#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
UTILITAIRES ET HELPERS - DRIFTLAB
=================================

Logging, dérivation des graines, tirages entiers exacts et
statistiques élémentaires partagées par les services

Version: 1.0.0
"""

import math
import logging
from fractions import Fraction
from pathlib import Path
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Sequence, TypeVar, Union

import numpy as np

T = TypeVar("T")
SeedLike = Union[int, np.random.SeedSequence, np.random.Generator]
DEFAULT_LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

# Au-delà, rng.integers ne couvre plus l'intervalle (int64)
_INT64_SAFE = 2 ** 62


def setup_driftlab_logging(log_level: str = 'INFO', log_file: Optional[str] = None,
                           log_format: str = DEFAULT_LOG_FORMAT) -> logging.Logger:
    """
    Configure le système de logging du laboratoire

    Args:
        log_level: Niveau de log (DEBUG, INFO, WARNING, ERROR)
        log_file: Fichier de log (optionnel)
        log_format: Format des messages

    Returns:
        logging.Logger: Logger configuré
    """
    date_format = '%Y-%m-%d %H:%M:%S'

    numeric_level = getattr(logging, str(log_level).upper(), logging.INFO)

    logging.basicConfig(
        level=numeric_level,
        format=log_format,
        datefmt=date_format
    )

    logger = logging.getLogger('driftlab')
    logger.setLevel(numeric_level)

    if log_file:
        log_path = Path(log_file)
        log_path.parent.mkdir(parents=True, exist_ok=True)

        file_handler = logging.FileHandler(log_path, encoding='utf-8')
        file_handler.setLevel(numeric_level)
        file_handler.setFormatter(logging.Formatter(log_format, date_format))
        logger.addHandler(file_handler)

    logger.debug("✅ Système de logging initialisé")
    return logger


def derive_seed(master_seed: int, *indices: int) -> int:
    """
    Dérive une graine 64 bits à partir de (master_seed, indices)

    La dérivation ne dépend que des arguments, jamais de l'ordre
    d'exécution : c'est la base du déterminisme parallèle.

    Args:
        master_seed: Graine maîtresse
        *indices: Indices (cellule, réplication, ...)

    Returns:
        int: Graine dérivée dans [0, 2^64)
    """
    seq = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(i) for i in indices))
    low, high = seq.generate_state(2, dtype=np.uint32)
    return (int(high) << 32) | int(low)


def make_rng(seed: SeedLike) -> np.random.Generator:
    """Construit un générateur PCG64 à partir d'une graine, d'une SeedSequence ou d'un générateur"""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def uniform_int(rng: np.random.Generator, upper: int) -> int:
    """
    Tire un entier uniforme dans {0, ..., upper}, exact même pour upper >= 2^62

    Args:
        rng: Générateur
        upper: Borne supérieure incluse

    Returns:
        int: Entier uniforme
    """
    if upper < _INT64_SAFE:
        return int(rng.integers(0, upper + 1))

    # Rejet sur des octets bruts
    span = upper + 1
    n_bits = span.bit_length()
    n_bytes = (n_bits + 7) // 8
    excess = n_bytes * 8 - n_bits
    while True:
        candidate = int.from_bytes(rng.bytes(n_bytes), 'big') >> excess
        if candidate < span:
            return candidate


def to_fraction(value: Union[int, float, str, Fraction]) -> Fraction:
    """
    Convertit une valeur en Fraction exacte

    Les flottants passent par leur représentation décimale la plus courte,
    de sorte que 0.1 devient exactement 1/10.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(repr(value))
    return Fraction(str(value).strip())


def sample_mean_and_error(values: Sequence[float]) -> tuple:
    """
    Moyenne et erreur standard (variance corrigée n-1)

    Returns:
        tuple: (mean, std_error); std_error = 0 pour un seul échantillon
    """
    data = np.asarray(values, dtype=float)
    if data.size == 0:
        return math.nan, math.nan
    mean = float(data.mean())
    if data.size < 2:
        return mean, 0.0
    return mean, float(data.std(ddof=1) / math.sqrt(data.size))


def binomial_std_error(p: float, count: int) -> float:
    """Erreur standard d'une proportion estimée sur count tirages"""
    if count <= 0:
        return math.nan
    return math.sqrt(max(p * (1.0 - p), 0.0) / count)


def format_number(number: Optional[float], decimals: int = 3) -> str:
    """
    Formate un nombre pour l'affichage console

    Args:
        number: Nombre à formater
        decimals: Nombre de décimales

    Returns:
        str: Nombre formaté ('N/A' si absent)
    """
    if number is None or (isinstance(number, float) and math.isnan(number)):
        return 'N/A'
    if abs(number) >= 1_000_000:
        return f"{number / 1_000_000:.{decimals}f}M"
    if abs(number) >= 1_000:
        return f"{number / 1_000:.{decimals}f}k"
    return f"{number:.{decimals}f}"


def parallel_map(func: Callable[[int], T], count: int, threads: int = 1) -> List[T]:
    """
    Applique func à 0..count-1 et renvoie les résultats indexés

    Les résultats sont rangés par indice : l'agrégation ne dépend
    jamais de l'ordre de terminaison des workers.

    Args:
        func: Tâche indexée (doit posséder son propre flux aléatoire)
        count: Nombre de tâches
        threads: Nombre de workers

    Returns:
        List: Résultats dans l'ordre des indices
    """
    if threads <= 1 or count <= 1:
        return [func(i) for i in range(count)]

    with ThreadPoolExecutor(max_workers=min(threads, count)) as executor:
        return list(executor.map(func, range(count)))
