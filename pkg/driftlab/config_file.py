#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
CONFIGURATION - DRIFTLAB
========================

Configuration centralisée du laboratoire (threads, solveurs, sorties, logging)

La configuration n'influence jamais les résultats numériques : le nombre
de threads ne change que le temps de calcul.

Version: 1.0.0
"""

import os
import json
from pathlib import Path
from dataclasses import dataclass, asdict
from typing import Dict, Any

from driftlab import __version__
from driftlab.utils.helpers import DEFAULT_LOG_FORMAT


@dataclass
class AppConfig:
    """Configuration de l'application"""
    name: str = "driftlab"
    version: str = __version__


@dataclass
class SimulationConfig:
    """Configuration des simulations et solveurs"""
    threads: int = 1
    dense_solver_limit: int = 5000
    residual_tolerance: float = 1e-10
    quadrature_tolerance: float = 1e-8
    max_quadrature_refinements: int = 24


@dataclass
class OutputConfig:
    """Configuration des fichiers de résultats"""
    out_dir: str = "results"
    float_format: str = "%.17g"
    line_terminator: str = "\r\n"  # RFC-4180


@dataclass
class LoggingConfig:
    """Configuration du logging"""
    level: str = "INFO"
    file: str = ""
    format: str = DEFAULT_LOG_FORMAT


class Config:
    """Configuration principale du laboratoire"""

    def __init__(self, config_dict: Dict[str, Any] = None):
        """
        Initialise la configuration

        Args:
            config_dict: Configuration personnalisée optionnelle
        """
        self.app = AppConfig()
        self.simulation = SimulationConfig()
        self.output = OutputConfig()
        self.logging = LoggingConfig()

        if config_dict:
            self._apply_custom_config(config_dict)

        self._load_from_env()

    def _apply_custom_config(self, config_dict: Dict[str, Any]):
        """Applique une configuration personnalisée"""
        for section, values in config_dict.items():
            if hasattr(self, section) and isinstance(values, dict):
                section_config = getattr(self, section)
                for key, value in values.items():
                    if hasattr(section_config, key):
                        setattr(section_config, key, value)

    def _load_from_env(self):
        """Charge la configuration depuis les variables d'environnement"""
        self.simulation.threads = int(os.getenv('DRIFTLAB_THREADS', self.simulation.threads))
        self.output.out_dir = os.getenv('DRIFTLAB_OUT_DIR', self.output.out_dir)
        self.logging.level = os.getenv('DRIFTLAB_LOG_LEVEL', self.logging.level)
        self.logging.file = os.getenv('DRIFTLAB_LOG_FILE', self.logging.file)

    def to_dict(self) -> Dict[str, Any]:
        """Convertit la configuration en dictionnaire"""
        return {
            'app': asdict(self.app),
            'simulation': asdict(self.simulation),
            'output': asdict(self.output),
            'logging': asdict(self.logging)
        }

    def validate(self) -> Dict[str, Any]:
        """Valide la configuration"""
        validation_result = {
            'valid': True,
            'errors': [],
            'warnings': []
        }

        if self.simulation.threads < 1:
            validation_result['errors'].append(f"Nombre de threads invalide: {self.simulation.threads}")
            validation_result['valid'] = False

        if self.simulation.dense_solver_limit < 1:
            validation_result['errors'].append(
                f"Limite du solveur dense invalide: {self.simulation.dense_solver_limit}"
            )
            validation_result['valid'] = False

        if not (0 < self.simulation.residual_tolerance < 1):
            validation_result['errors'].append(
                f"Tolérance de résidu invalide: {self.simulation.residual_tolerance}"
            )
            validation_result['valid'] = False

        if self.simulation.threads > (os.cpu_count() or 1):
            validation_result['warnings'].append(
                f"Plus de threads ({self.simulation.threads}) que de coeurs ({os.cpu_count()})"
            )

        if not Path(self.output.out_dir).exists():
            validation_result['warnings'].append(f"Dossier de sortie manquant: {self.output.out_dir}")

        return validation_result


# Configuration globale par défaut
default_config = Config()

__all__ = [
    'Config',
    'AppConfig',
    'SimulationConfig',
    'OutputConfig',
    'LoggingConfig',
    'default_config',
    'load_config',
    'save_config',
]


def load_config(config_file: str = None) -> Config:
    """
    Charge la configuration depuis un fichier ou utilise les défauts

    Args:
        config_file: Chemin vers le fichier de configuration (optionnel)

    Returns:
        Config: Configuration chargée
    """
    if config_file and Path(config_file).exists():
        with open(config_file, 'r', encoding='utf-8') as f:
            config_dict = json.load(f)
        return Config(config_dict)
    return Config()


def save_config(config: Config, config_file: str):
    """
    Sauvegarde la configuration dans un fichier

    Args:
        config: Configuration à sauvegarder
        config_file: Chemin du fichier de destination
    """
    with open(config_file, 'w', encoding='utf-8') as f:
        json.dump(config.to_dict(), f, indent=2)
