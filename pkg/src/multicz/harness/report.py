"""CSV and JSON output for campaign reports."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Sequence

from .checks import RatioReport

__all__ = ["HEADER", "emit_report", "report_rows"]

HEADER = ["check_id", "instance_id", "lhs", "rhs", "ratio", "G", "params_json", "refinement_factor", "pass"]


def _num(x) -> str:
    return repr(float(x))


def _jsonable(x):
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if hasattr(x, "item") and callable(x.item):  # numpy scalars
        return _jsonable(x.item())
    return x


def params_json(rep: RatioReport) -> str:
    return json.dumps(_jsonable(rep.params), sort_keys=True, separators=(",", ":"))


def report_rows(reports: Sequence[RatioReport]) -> list[list[str]]:
    """One summary row per check, at the argmax instance of the base grid."""
    return [[r.check_id, r.argmax, _num(r.lhs), _num(r.rhs), _num(r.max_ratio), str(r.G), params_json(r),
             _num(r.refinement_factor), "PASS" if r.passed else "FAIL"] for r in reports]


def emit_report(reports: Sequence[RatioReport], path, json_path=None) -> tuple[Path, Path]:
    """Write ``path`` (CSV) and its JSON mirror (default: same stem, ``.json``)."""
    path = Path(path)
    json_path = Path(json_path) if json_path is not None else path.with_suffix(".json")
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HEADER)
        w.writerows(report_rows(reports))
    doc = [_jsonable({
        "check_id": r.check_id, "instance_count": r.instance_count, "argmax": r.argmax, "lhs": r.lhs, "rhs": r.rhs,
        "max_ratio": r.max_ratio, "G": r.G, "refinement_factor": r.refinement_factor, "pass": r.passed,
        "skipped": r.skipped, "notes": list(r.notes), "params": r.params, "rows": r.rows,
    }) for r in reports]
    json_path.write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")
    return path, json_path
