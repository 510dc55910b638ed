from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Any, Dict, List, Mapping, Union

import numpy as np

from core.errors import InvalidRequest, IoError
from core.jsonstore import write_text_atomic

FORMATS = ("json", "csv")


def clean(value: Any) -> Any:
    """JSON-safe copy: non-finite floats become strings, numpy scalars plain numbers."""
    if isinstance(value, Mapping):
        return {str(k): clean(v) for k, v in value.items()}
    if isinstance(value, np.ndarray):
        return clean(value.tolist())
    if isinstance(value, (list, tuple)):
        return [clean(v) for v in value]
    if hasattr(value, "item") and not isinstance(value, (str, bytes)):
        try:
            value = value.item()
        except (TypeError, ValueError):
            pass
    if isinstance(value, bool) or value is None or isinstance(value, (int, str)):
        return value
    if isinstance(value, float):
        return value if math.isfinite(value) else str(value)
    return str(value)


def to_json(report: Mapping[str, Any]) -> str:
    return json.dumps(clean(report), ensure_ascii=False, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _flatten(obj: Any, prefix: str = "") -> Dict[str, Any]:
    out: Dict[str, Any] = {}
    if isinstance(obj, Mapping):
        for k, v in obj.items():
            out.update(_flatten(v, f"{prefix}.{k}" if prefix else str(k)))
    elif isinstance(obj, list) and obj and all(not isinstance(v, (Mapping, list)) for v in obj):
        out[prefix] = ";".join(str(v) for v in obj)
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            out.update(_flatten(v, f"{prefix}.{i}"))
    else:
        out[prefix] = obj
    return out


def csv_rows(report: Mapping[str, Any]) -> List[Dict[str, Any]]:
    """One row per grid cell when the result carries `rows`, one summary row otherwise."""
    report = clean(report)
    result = report.get("result", {})
    context = {k: report[k] for k in ("command", "seed") if k in report}
    if isinstance(result, Mapping) and isinstance(result.get("rows"), list) and result["rows"]:
        return [{**context, **_flatten(row)} for row in result["rows"]]
    return [{**context, **_flatten(result)}]


def to_csv(report: Mapping[str, Any]) -> str:
    rows = csv_rows(report)
    header: List[str] = []
    for row in rows:
        for key in row:
            if key not in header:
                header.append(key)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=header, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow(row)
    return buf.getvalue()


def render(report: Mapping[str, Any], fmt: str) -> str:
    if fmt == "json":
        return to_json(report)
    if fmt == "csv":
        return to_csv(report)
    raise InvalidRequest(f"unknown report format {fmt!r}; choose one of {FORMATS}")


def emit_report(report: Mapping[str, Any], fmt: str = "json", path: Union[str, Path, None] = None, overwrite: bool = True) -> str:
    """Render the report and, when `path` is given, write it atomically."""
    text = render(report, fmt)
    if path is None:
        return text
    p = Path(path)
    if p.exists() and not overwrite:
        raise IoError(f"report {p} exists and overwrite is disabled")
    try:
        write_text_atomic(str(p), text)
    except OSError as e:
        raise IoError(f"cannot write report {p}: {e}") from None
    return text
