#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
ÉCRITURE DES RÉSULTATS - DRIFTLAB
=================================

Tables CSV (RFC-4180, UTF-8, 17 chiffres significatifs) et résumés JSON.
Aucun horodatage n'est écrit : deux exécutions identiques produisent
des fichiers identiques octet par octet.

Version: 1.0.0
"""

import json
import math
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

DEFAULT_FLOAT_FORMAT = '%.17g'
DEFAULT_LINE_TERMINATOR = '\r\n'


def rows_to_frame(rows: Sequence[Dict[str, Any]], columns: Sequence[str]) -> pd.DataFrame:
    """
    Construit une table aux colonnes fixes (colonnes manquantes laissées vides)

    Args:
        rows: Lignes de résultats
        columns: Ordre des colonnes

    Returns:
        pd.DataFrame: Table ordonnée
    """
    frame = pd.DataFrame(list(rows), columns=list(columns))
    return frame.astype(object).where(pd.notna(frame), None)


def write_csv(frame: pd.DataFrame, path: PathLike, float_format: str = DEFAULT_FLOAT_FORMAT,
              line_terminator: str = DEFAULT_LINE_TERMINATOR) -> Path:
    """
    Écrit une table CSV déterministe

    Args:
        frame: Table à écrire
        path: Fichier de destination (dossiers créés au besoin)
        float_format: Format des flottants
        line_terminator: Fin de ligne

    Returns:
        Path: Chemin écrit
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    formatted = frame.copy()
    for column in formatted.columns:
        formatted[column] = formatted[column].map(lambda v: _format_cell(v, float_format))

    formatted.to_csv(path, index=False, encoding='utf-8', lineterminator=line_terminator)
    logger.debug(f"Table écrite: {path} ({len(frame)} lignes)")
    return path


def _format_cell(value: Any, float_format: str) -> str:
    """Les flottants ont un format fixe, les booléens s'écrivent en minuscules"""
    if value is None:
        return ''
    if isinstance(value, (bool, np.bool_)):
        return 'true' if value else 'false'
    if isinstance(value, (float, np.floating)):
        if math.isnan(value):
            return ''
        return float_format % float(value)
    return str(value)


def to_jsonable(value: Any) -> Any:
    """Convertit récursivement en types JSON (NaN et infinis deviennent null)"""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    if hasattr(value, 'value') and hasattr(value, 'name'):
        return value.value
    return value


def write_json(payload: Dict[str, Any], path: PathLike) -> Path:
    """Écrit un résumé JSON trié, sans horodatage"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        json.dump(to_jsonable(payload), f, indent=2, sort_keys=True, ensure_ascii=False)
        f.write('\n')
    logger.debug(f"Résumé écrit: {path}")
    return path


def read_json(path: PathLike) -> Dict[str, Any]:
    with open(path, 'r', encoding='utf-8') as f:
        return json.load(f)


def write_result_set(rows: List[Dict[str, Any]], columns: Sequence[str], summary: Dict[str, Any],
                     out_dir: PathLike, prefix: str, float_format: Optional[str] = None,
                     line_terminator: Optional[str] = None) -> Dict[str, Path]:
    """
    Écrit <prefix>.csv et <prefix>.json dans out_dir

    Returns:
        Dict: {'csv': chemin, 'json': chemin}
    """
    out_dir = Path(out_dir)
    frame = rows_to_frame(rows, columns)
    csv_path = write_csv(
        frame, out_dir / f"{prefix}.csv",
        float_format or DEFAULT_FLOAT_FORMAT,
        line_terminator or DEFAULT_LINE_TERMINATOR
    )
    json_path = write_json(summary, out_dir / f"{prefix}.json")
    logger.info(f"✅ Résultats écrits: {csv_path} / {json_path}")
    return {'csv': csv_path, 'json': json_path}
