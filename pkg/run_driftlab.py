#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
DRIFTLAB - SCRIPT DE LANCEMENT
==============================

Script de lancement du laboratoire avec vérification des prérequis.
Accepte les mêmes commandes que `python -m driftlab`.

Version: 1.0.0
"""

import sys
import importlib.util


def check_python_version():
    """Vérifie la version Python"""
    if sys.version_info < (3, 9):
        print("❌ Python 3.9 ou supérieur requis")
        print(f"   Version actuelle: {sys.version}")
        return False
    return True


def check_dependencies():
    """Vérifie la présence des dépendances scientifiques"""
    missing = [name for name in ('numpy', 'scipy', 'pandas', 'mpmath')
               if importlib.util.find_spec(name) is None]
    if missing:
        print(f"❌ Dépendances manquantes: {', '.join(missing)}")
        print("💡 Installez avec: pip install -r requirements.txt")
        return False
    return True


def main():
    """Fonction principale"""
    if not check_python_version() or not check_dependencies():
        return 1

    from driftlab.cli import main as cli_main
    return cli_main(sys.argv[1:])


if __name__ == '__main__':
    sys.exit(main())
