"""JSON state files written through a sibling .tmp file."""
from __future__ import annotations

import contextlib
import json
import os
from typing import Any, Callable, Dict, Optional


def write_text_atomic(path: str, text: str) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    tmp = path + ".tmp"
    try:
        with open(tmp, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except OSError:
        with contextlib.suppress(OSError):
            os.remove(tmp)
        raise


def save_json(path: str, data: Any) -> None:
    write_text_atomic(path, json.dumps(data, ensure_ascii=False, indent=2, default=str))


def load_json(path: Optional[str], default: Callable[[], Dict[str, Any]]) -> Dict[str, Any]:
    """Mapping stored at `path`; `default()` when the file is missing, unreadable or not an object."""
    if not path or not os.path.exists(path):
        return default()
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except (OSError, ValueError):
        return default()
    return data if isinstance(data, dict) else default()
