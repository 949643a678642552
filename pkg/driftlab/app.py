#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
DRIFTLAB - APPLICATION PRINCIPALE
=================================

Commandes du laboratoire (run, validate, bounds). Les services lèvent
des DriftLabError ; l'application les intercepte, les journalise et les
traduit en codes de sortie : 0 succès, 1 configuration invalide,
2 échec d'exécution.

Version: 1.0.0
"""

import json
import math
import logging
from pathlib import Path
from typing import Any, Callable, Dict, Optional

from driftlab.config_file import Config, load_config
from driftlab.errors import BoundError, DriftLabError, SpecValidationError
from driftlab.services import drift_bounds
from driftlab.services.experiment_service import run_experiment
from driftlab.services.experiment_spec import ExperimentSpec, load_spec, validate_spec
from driftlab.utils.helpers import format_number
from driftlab.utils.result_writer import read_json, to_jsonable

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


# ==============================================================================
# BORNES EN LIGNE DE COMMANDE
# ==============================================================================

def _potential(name: str) -> Callable[[float], float]:
    potentials = {'identity': lambda x: float(x), 'ln': lambda x: math.log(x) if x > 1 else 0.0}
    if name not in potentials:
        raise BoundError('BAD_RANGE', f"potentiel inconnu: {name} (identity, ln)")
    func = potentials[name]
    func.__name__ = name
    return func


def _drift_function(name: str, params: Dict[str, float]) -> Callable[[float], float]:
    if name == 'constant':
        delta = params['delta']
        func = lambda x: delta + 0.0 * x
    elif name == 'linear':
        delta = params['delta']
        func = lambda x: delta * x
    elif name == 'onemax':
        n, c = params['n'], params['c']
        rate = c * (1 - c) / (n * (1 + c))
        func = lambda x: rate * x
    else:
        raise BoundError('BAD_RANGE', f"fonction de drift inconnue: {name} (constant, linear, onemax)")
    func.__name__ = name
    return func


def _number(params: Dict[str, str], key: str) -> float:
    if key not in params:
        raise BoundError('BAD_RANGE', f"paramètre manquant: {key}")
    try:
        value = float(params[key])
    except ValueError as e:
        raise BoundError('BAD_RANGE', f"{key}: nombre attendu, reçu {params[key]!r}") from e
    return int(value) if value.is_integer() and key in ('n',) else value


def compute_bound(theorem: str, params: Dict[str, str], tolerance: float = 1e-8,
                  max_refinements: int = 24) -> Dict[str, Any]:
    """
    Calcule une borne nommée à partir de paramètres texte clé=valeur

    Args:
        theorem: Nom du théorème
        params: Paramètres clé=valeur
        tolerance: Tolérance relative de la quadrature (drift variable)
        max_refinements: Nombre maximal de raffinements de la quadrature

    Returns:
        Dict: Rapport sérialisable
    """
    num = lambda key: _number(params, key)
    if theorem == 'additive':
        report = drift_bounds.additive_bound(num('n'), num('c'))
    elif theorem == 'reverse_additive':
        limit = num('limit_term') if 'limit_term' in params else 0.0
        report = drift_bounds.reverse_additive_lower(num('n'), num('c'), limit)
    elif theorem == 'two_phase':
        report = drift_bounds.two_phase_bound(num('expected_T_C'), num('p0'), num('B'))
    elif theorem == 'rescaled':
        report = drift_bounds.rescaled_bound(_potential(params.get('g', 'identity')), num('n'), num('c'))
    elif theorem == 'variable':
        numeric = {k: _number(params, k) for k in params if k != 'h'}
        h = _drift_function(params.get('h', 'linear'), numeric)
        report = drift_bounds.variable_drift_bound(h, num('n'), numeric.get('quadrature_step', 1.0),
                                                   tolerance=tolerance, max_refinements=max_refinements)
    elif theorem == 'multiplicative_mean':
        report = drift_bounds.multiplicative_mean_bound(num('n'), num('delta'))
    elif theorem == 'multiplicative_tail':
        report = drift_bounds.multiplicative_tail(num('n'), num('delta'), num('k'))
    elif theorem == 'negative_drift':
        gamma = num('gamma') if 'gamma' in params else 0.0
        report = drift_bounds.negative_drift_thresholds(num('a'), num('b'), num('epsilon'), gamma, num('n'))
    elif theorem == 'binomial':
        n, p = int(num('n')), num('p')
        return {
            'theorem_id': 'BINOMIAL',
            'inputs': {'n': n, 'p': p},
            'bound_value': drift_bounds.binomial_positive_lb(n, p),
            'exact_value': drift_bounds.binomial_positive_exact(n, p),
            'direction': 'LOWER',
        }
    else:
        raise BoundError('BAD_RANGE', f"théorème inconnu: {theorem}")
    return report.to_dict()


# ==============================================================================
# APPLICATION
# ==============================================================================

class DriftLabApp:
    """Application principale du laboratoire"""

    def __init__(self, config: Optional[Config] = None):
        """
        Initialise l'application

        Args:
            config: Configuration (chargée depuis config.json si absente)
        """
        self.config = config or load_config('config.json')
        self.config_validation = self.config.validate()
        for warning in self.config_validation['warnings']:
            logger.warning(f"⚠️ {warning}")
        for error in self.config_validation['errors']:
            logger.error(f"❌ Configuration: {error}")
        logger.debug("✅ DriftLab App initialisée")

    @property
    def config_valid(self) -> bool:
        return bool(self.config_validation['valid'])

    def _emit(self, payload: Dict[str, Any]):
        print(json.dumps(to_jsonable(payload), indent=2, sort_keys=True, ensure_ascii=False))

    def validate(self, spec_path: str) -> int:
        """Valide une spécification ; imprime les erreurs champ par champ"""
        try:
            spec = load_spec(spec_path)
        except SpecValidationError as e:
            for message in e.errors:
                logger.error(f"❌ {message}")
            self._emit({'valid': False, 'errors': e.errors})
            return EXIT_CONFIG
        except OSError as e:
            logger.error(f"❌ Lecture impossible: {e}")
            return EXIT_CONFIG

        self._emit({'valid': True, 'kind': spec.kind, 'cells': len(spec.cells())})
        return EXIT_OK

    def run(self, spec_path: Optional[str] = None, from_summary: Optional[str] = None,
            threads: Optional[int] = None, out_dir: Optional[str] = None) -> int:
        """
        Exécute une expérience depuis une spécification ou un résumé JSON

        Args:
            spec_path: Fichier de spécification
            from_summary: Résumé JSON d'une exécution précédente
            threads: Nombre de workers (prioritaire sur la configuration)
            out_dir: Dossier de sortie (prioritaire sur la spécification)
        """
        if not self.config_valid:
            logger.error("❌ Configuration invalide, expérience non lancée")
            return EXIT_CONFIG
        try:
            spec = self._load(spec_path, from_summary)
        except SpecValidationError as e:
            for message in e.errors:
                logger.error(f"❌ {message}")
            return EXIT_CONFIG
        except (OSError, ValueError) as e:
            logger.error(f"❌ Lecture impossible: {e}")
            return EXIT_CONFIG

        workers = threads or self.config.simulation.threads
        target_dir = out_dir or spec.out_dir or self.config.output.out_dir
        try:
            result = run_experiment(
                spec, threads=workers, out_dir=target_dir,
                float_format=self.config.output.float_format,
                line_terminator=self.config.output.line_terminator,
                solver_options={
                    'dense_limit': self.config.simulation.dense_solver_limit,
                    'tolerance': self.config.simulation.residual_tolerance,
                }
            )
        except DriftLabError as e:
            logger.error(f"❌ Expérience interrompue: {e}")
            return EXIT_RUNTIME
        except OSError as e:
            logger.error(f"❌ Écriture impossible: {e}")
            return EXIT_RUNTIME

        for row in result.rows:
            logger.info(f"📊 {self._describe(row)}")

        if result.failed_cells:
            logger.warning(f"⚠️ {result.failed_cells} cellule(s) en erreur")
            return EXIT_RUNTIME
        return EXIT_OK

    def bounds(self, theorem: str, params: Dict[str, str]) -> int:
        """Imprime un rapport de borne en JSON"""
        try:
            self._emit(compute_bound(
                theorem, params,
                tolerance=self.config.simulation.quadrature_tolerance,
                max_refinements=self.config.simulation.max_quadrature_refinements
            ))
        except DriftLabError as e:
            logger.error(f"❌ {e}")
            return EXIT_CONFIG
        return EXIT_OK

    def _load(self, spec_path: Optional[str], from_summary: Optional[str]) -> ExperimentSpec:
        if from_summary:
            summary = read_json(from_summary)
            if 'spec' not in summary:
                raise SpecValidationError([f"{from_summary}: pas de champ 'spec'"])
            return validate_spec(summary['spec'])
        if not spec_path:
            raise SpecValidationError(["aucune spécification fournie"])
        if not Path(spec_path).exists():
            raise SpecValidationError([f"fichier introuvable: {spec_path}"])
        return load_spec(spec_path)

    @staticmethod
    def _describe(row: Dict[str, Any]) -> str:
        coords = ", ".join(f"{k}={row[k]}" for k in ('a', 'n', 'c', 'fitness') if k in row)
        return (f"{coords}: mean={format_number(row.get('mean'))} "
                f"theory={format_number(row.get('theory_value'))} status={row.get('status')}")
