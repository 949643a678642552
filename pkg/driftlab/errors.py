#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
ERREURS - DRIFTLAB
==================

Hiérarchie d'exceptions du laboratoire. Chaque erreur porte un code
machine (NONPOSITIVE_MARGIN, SINGULAR, ...) et un message lisible.

Version: 1.0.0
"""

from typing import List, Optional


class DriftLabError(Exception):
    """Erreur de base du laboratoire"""

    def __init__(self, code: str, message: str = ""):
        self.code = code
        self.message = message or code
        super().__init__(f"[{code}] {self.message}")

    def to_dict(self) -> dict:
        return {'code': self.code, 'message': self.message}


class ChainError(DriftLabError):
    """Erreurs des chaînes de Markov et du solveur exact"""


class BoundError(DriftLabError):
    """Paramètres invalides pour une borne de drift"""


class FitnessError(DriftLabError):
    """Erreurs des fonctions de fitness"""


class EAError(DriftLabError):
    """Erreurs du moteur EA"""


class SpecValidationError(DriftLabError):
    """Spécification d'expérience invalide (liste agrégée d'erreurs)"""

    def __init__(self, errors: List[str], message: Optional[str] = None):
        self.errors = list(errors)
        super().__init__(
            'CONFIG_INVALID',
            message or "; ".join(self.errors) or "spécification invalide"
        )


__all__ = [
    'DriftLabError',
    'ChainError',
    'BoundError',
    'FitnessError',
    'EAError',
    'SpecValidationError',
]
