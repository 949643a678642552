#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
DRIFTLAB - LIGNE DE COMMANDE
============================

Lancement : python -m driftlab <commande> (ou python run_driftlab.py).

driftlab run <spec.json> [--threads K] [--out DIR] [--from-summary S.json]
driftlab validate <spec.json>
driftlab bounds <théorème> --params clé=valeur ...

Version: 1.0.0
"""

import argparse
import sys
from typing import Dict, List, Optional

from driftlab import __version__
from driftlab.app import EXIT_CONFIG, DriftLabApp
from driftlab.config_file import load_config
from driftlab.utils.helpers import setup_driftlab_logging

THEOREMS = (
    'additive', 'reverse_additive', 'two_phase', 'rescaled', 'variable',
    'multiplicative_mean', 'multiplicative_tail', 'negative_drift', 'binomial',
)


def _parse_params(items: List[str]) -> Dict[str, str]:
    params = {}
    for item in items:
        key, sep, value = item.partition('=')
        if not sep or not key:
            raise argparse.ArgumentTypeError(f"paramètre clé=valeur attendu, reçu {item!r}")
        params[key.strip()] = value.strip()
    return params


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='driftlab', description='Laboratoire de drift et (1+1)-EA')
    parser.add_argument('--version', action='version', version=f'driftlab {__version__}')
    parser.add_argument('--config', default='config.json', help='Fichier de configuration (défaut: config.json)')
    parser.add_argument('--log-level', default=None, help='Niveau de log (DEBUG, INFO, WARNING, ERROR)')
    sub = parser.add_subparsers(dest='command', required=True)

    run = sub.add_parser('run', help='Exécuter une expérience')
    run.add_argument('spec', nargs='?', help='Spécification JSON')
    run.add_argument('--threads', type=int, default=None, help='Nombre de workers')
    run.add_argument('--out', default=None, help='Dossier de sortie')
    run.add_argument('--from-summary', default=None, help='Rejouer depuis un résumé JSON')

    validate = sub.add_parser('validate', help='Valider une spécification')
    validate.add_argument('spec', help='Spécification JSON')

    bounds = sub.add_parser('bounds', help='Calculer une borne de drift')
    bounds.add_argument('theorem', choices=THEOREMS)
    bounds.add_argument('--params', nargs='*', default=[], help='Paramètres clé=valeur')

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Point d'entrée ; renvoie le code de sortie"""
    parser = build_parser()
    args = parser.parse_args(argv)

    config = load_config(args.config)
    setup_driftlab_logging(args.log_level or config.logging.level, config.logging.file or None,
                           config.logging.format)

    app = DriftLabApp(config)
    if args.command == 'validate':
        return app.validate(args.spec)
    if args.command == 'bounds':
        try:
            params = _parse_params(args.params)
        except argparse.ArgumentTypeError as e:
            parser.error(str(e))
            return EXIT_CONFIG
        return app.bounds(args.theorem, params)

    if args.threads is not None and args.threads < 1:
        parser.error("--threads doit être >= 1")
    if not args.spec and not args.from_summary:
        parser.error("une spécification ou --from-summary est requis")
    return app.run(args.spec, args.from_summary, args.threads, args.out)


if __name__ == '__main__':
    sys.exit(main())
