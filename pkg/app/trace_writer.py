"""
Écriture des traces d'itérations (CSV ou JSON) et du résumé de résolution.
Sans --timing, la colonne wall_ms reste vide et deux résolutions identiques
produisent des fichiers identiques octet pour octet.
"""

import csv
import json
import logging
import math
from pathlib import Path
from typing import List, Optional

from app.schemas import RunSummary, TraceRow
from core.models import IterateTrace, IterationRecord

logger = logging.getLogger(__name__)

TRACE_COLUMNS = (
    "n",
    "active_index",
    "x_norm_change",
    "anchor_dist",
    "max_y_residual",
    "max_z_residual",
    "fejer_slack",
    "containment_ok",
    "wall_ms",
)


def _finite_or_none(value: Optional[float]) -> Optional[float]:
    if value is None or not math.isfinite(value):
        return None
    return value


def to_row(record: IterationRecord, timing: bool = False, with_point: bool = False) -> TraceRow:
    return TraceRow(
        n=record.n,
        active_index=record.active_index,
        x_norm_change=record.step_norm,
        anchor_dist=record.anchor_dist,
        max_y_residual=record.max_y_residual,
        max_z_residual=record.max_z_residual,
        fejer_slack=_finite_or_none(record.fejer_slack),
        containment_ok=record.containment_ok,
        wall_ms=record.wall_ms if timing else None,
        x=[float(v) for v in record.x] if with_point else None,
    )


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_trace(trace: IterateTrace, path: Path, fmt: str = "csv", timing: bool = False) -> Path:
    """Écrit une ligne par itération externe, dans l'ordre des itérations."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        with open(path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(TRACE_COLUMNS)
            for record in trace:
                row = to_row(record, timing=timing)
                writer.writerow([_cell(getattr(row, column)) for column in TRACE_COLUMNS])
    elif fmt == "json":
        rows: List[dict] = [to_row(record, timing=timing, with_point=True).model_dump() for record in trace]
        document = {"algorithm": trace.algorithm, "rows": rows}
        path.write_text(json.dumps(document, indent=2) + "\n", encoding="utf-8")
    else:
        raise ValueError(f"format de trace inconnu: {fmt}")
    logger.info(f"Trace {trace.algorithm} écrite dans {path} ({len(trace)} lignes, {fmt})")
    return path


def write_summary(summary: RunSummary, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(summary.model_dump_json(indent=2) + "\n", encoding="utf-8")
    logger.info(f"Résumé écrit dans {path}")
    return path
