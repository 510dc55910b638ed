from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple

from core.jsonstore import load_json, save_json


@dataclass
class Stat:
    total: int = 0
    passed: int = 0

    @property
    def rate(self) -> float:
        return (self.passed / self.total) if self.total > 0 else 0.0


class FindingsLedger:
    """Persisted verdicts of consistency experiments.
    Structure:
    {
      "experiments": { "capacity_bound": {"total": 3, "passed": 2}, ... },
      "findings":    [ {"experiment": "capacity_bound", "passed": false, "values": {...}}, ... ]
    }
    """

    def __init__(self, path: Optional[str] = "logs/findings.json"):
        self.path = path
        self.data: Dict[str, Any] = {"experiments": {}, "findings": []}
        self.load()

    @classmethod
    def in_memory(cls) -> "FindingsLedger":
        return cls(path=None)

    def load(self) -> None:
        self.data = load_json(self.path, lambda: {"experiments": {}, "findings": []})
        self.data.setdefault("experiments", {})
        self.data.setdefault("findings", [])

    def save(self) -> None:
        if self.path is None:
            return
        try:
            save_json(self.path, self.data)
        except Exception:
            # A lost verdict file must not abort a computation.
            pass

    def record(self, experiment: str, passed: bool, values: Optional[Dict[str, Any]] = None) -> None:
        if not experiment:
            return
        exps = self.data.setdefault("experiments", {})
        stat = exps.setdefault(experiment, {"total": 0, "passed": 0})
        stat["total"] += 1
        if passed:
            stat["passed"] += 1
        if not passed:
            self.data.setdefault("findings", []).append(
                {"experiment": experiment, "passed": False, "values": dict(values or {})}
            )
        self.save()

    def get_stat(self, experiment: str) -> Stat:
        v = self.data.get("experiments", {}).get(experiment, {"total": 0, "passed": 0})
        return Stat(total=int(v.get("total", 0) or 0), passed=int(v.get("passed", 0) or 0))

    def flagged(self) -> List[Dict[str, Any]]:
        return list(self.data.get("findings", []))

    def weakest(self, top_k: int = 3) -> List[Tuple[str, float, int]]:
        exps = self.data.get("experiments", {})
        stats: List[Tuple[str, float, int]] = []
        for name, v in exps.items():
            total = max(1, int(v.get("total", 0)))
            stats.append((name, int(v.get("passed", 0)) / total, int(v.get("total", 0))))
        stats.sort(key=lambda x: x[1])
        return stats[:top_k]
