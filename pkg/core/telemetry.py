from __future__ import annotations

import contextlib
import contextvars
import json
import math
import os
import re
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Any, Dict, Iterator, Optional

from core.jsonstore import load_json, save_json


def _safe_run_key(name: Optional[str]) -> str:
    u = (name or "run").strip()
    u = re.sub(r"[^A-Za-z0-9_\-]+", "_", u)[:40] or "run"
    return u


def _utc_iso(ts: Optional[float] = None) -> str:
    dt = datetime.fromtimestamp(float(ts or time.time()), tz=timezone.utc)
    # second resolution; event order comes from line order
    return dt.replace(microsecond=0, tzinfo=None).isoformat() + "Z"


def _finite(x: Any) -> Any:
    """JSON has no inf/nan; keep them readable as strings."""
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    return x


class EventLogger:
    """Append-only JSONL logger. A `None` path makes it a sink that drops everything."""

    def __init__(self, path: Optional[str]):
        self.path = path
        if self.path is None:
            return
        try:
            os.makedirs(os.path.dirname(self.path) or ".", exist_ok=True)
        except Exception:
            pass

    def log(self, event_type: str, payload: Dict[str, Any]) -> None:
        """Write one event line. Never raises."""
        if self.path is None:
            return
        try:
            obj = {
                "ts": _utc_iso(),
                "type": str(event_type),
                **{k: _finite(v) for k, v in (payload or {}).items()},
            }
            line = json.dumps(obj, ensure_ascii=False, default=str)
            with open(self.path, "a", encoding="utf-8") as f:
                f.write(line + "\n")
        except Exception:
            return


@dataclass
class _SolveAgg:
    solves: int = 0
    optimal: int = 0
    iterations: int = 0
    worst_residual: float = 0.0
    time_sum_sec: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "solves": int(self.solves),
            "optimal": int(self.optimal),
            "iterations": int(self.iterations),
            "worst_residual": float(self.worst_residual),
            "time_sum_sec": float(self.time_sum_sec),
        }


class SolverStats:
    """Aggregate solver statistics per problem family.

    Schema (v1):
    {
      "schema_version": 1,
      "run": "robustness",
      "updated_at": "...",
      "problems": {
         "generalized_robustness": {"solves":..., "optimal":..., "iterations":..., "worst_residual":..., "time_sum_sec":...},
         ...
      },
      "statuses": {"Optimal": 12, "Infeasible": 1}
    }
    """

    def __init__(self, path: Optional[str], run_key: str):
        self.path = path
        self.run_key = run_key
        self.data: Dict[str, Any] = {}
        self._load()

    @classmethod
    def for_run(cls, run_name: Optional[str], base_dir: str = "logs") -> "SolverStats":
        key = _safe_run_key(run_name)
        path = os.path.join(base_dir, f"stats_{key}.json")
        try:
            os.makedirs(base_dir, exist_ok=True)
        except Exception:
            pass
        return cls(path=path, run_key=key)

    def _default(self) -> Dict[str, Any]:
        return {
            "schema_version": 1,
            "run": self.run_key,
            "updated_at": _utc_iso(),
            "problems": {},
            "statuses": {},
        }

    def _load(self) -> None:
        self.data = load_json(self.path, self._default)
        self.data.setdefault("schema_version", 1)
        self.data.setdefault("run", self.run_key)
        self.data.setdefault("problems", {})
        self.data.setdefault("statuses", {})

    def save(self) -> None:
        if self.path is None:
            return
        try:
            self.data["updated_at"] = _utc_iso()
            save_json(self.path, self.data)
        except Exception:
            return

    # ---------- Helpers ----------
    def _problem_bucket(self, problem: str) -> Dict[str, Any]:
        p = self.data.setdefault("problems", {})
        b = p.setdefault(problem, _SolveAgg().to_dict())
        for k, v in _SolveAgg().to_dict().items():
            b.setdefault(k, v)
        return b

    # ---------- Public API ----------
    def record_solve(self, problem: str, status: str, iterations: int, residual: float, dt_sec: float) -> None:
        try:
            b = self._problem_bucket(str(problem))
            b["solves"] = int(b.get("solves", 0)) + 1
            if status == "Optimal":
                b["optimal"] = int(b.get("optimal", 0)) + 1
            b["iterations"] = int(b.get("iterations", 0)) + int(iterations or 0)
            if math.isfinite(float(residual)):
                b["worst_residual"] = max(float(b.get("worst_residual", 0.0)), float(residual))
            b["time_sum_sec"] = float(b.get("time_sum_sec", 0.0)) + float(dt_sec or 0.0)

            s = self.data.setdefault("statuses", {})
            s[status] = int(s.get(status, 0)) + 1
            self.save()
        except Exception:
            return


class Telemetry:
    """Convenience wrapper: EventLogger + SolverStats."""

    def __init__(self, events: EventLogger, stats: SolverStats, run_key: str):
        self.events = events
        self.stats = stats
        self.run_key = run_key

    @classmethod
    def for_run(cls, run_name: Optional[str], base_dir: str = "logs") -> "Telemetry":
        key = _safe_run_key(run_name)
        try:
            os.makedirs(base_dir, exist_ok=True)
        except Exception:
            pass
        events_path = os.path.join(base_dir, f"events_{key}.jsonl")
        return cls(events=EventLogger(events_path), stats=SolverStats.for_run(run_name, base_dir=base_dir), run_key=key)

    @classmethod
    def disabled(cls) -> "Telemetry":
        return cls(events=EventLogger(None), stats=SolverStats(None, "disabled"), run_key="disabled")

    # Every wrapper below is one event line
    def command_start(self, command: str, seed: int) -> None:
        self.events.log("command_start", {"run": self.run_key, "command": str(command), "seed": int(seed)})

    def command_end(self, command: str, exit_code: int, wall_time_sec: float) -> None:
        self.events.log(
            "command_end",
            {"run": self.run_key, "command": str(command), "exit_code": int(exit_code), "wall_time_sec": float(wall_time_sec)},
        )

    def sdp_solve(
        self,
        problem: str,
        status: str,
        primal_res: float,
        dual_res: float,
        gap: float,
        iterations: int,
        dt_sec: float,
    ) -> None:
        worst = max(float(primal_res), float(dual_res), float(gap))
        self.stats.record_solve(problem=problem, status=status, iterations=iterations, residual=worst, dt_sec=dt_sec)
        self.events.log(
            "sdp_solve",
            {
                "run": self.run_key,
                "problem": str(problem),
                "status": str(status),
                "primal_res": float(primal_res),
                "dual_res": float(dual_res),
                "gap": float(gap),
                "iterations": int(iterations or 0),
                "dt_sec": float(dt_sec or 0.0),
            },
        )

    def gap_logged(self, topic: str, detail: str, **values: Any) -> None:
        """Known discrepancy that is reported, not repaired."""
        self.events.log("gap_logged", {"run": self.run_key, "topic": str(topic), "detail": str(detail), **values})

    def finding(self, experiment: str, passed: bool, **values: Any) -> None:
        self.events.log("finding", {"run": self.run_key, "experiment": str(experiment), "passed": bool(passed), **values})


_ACTIVE: contextvars.ContextVar[Telemetry] = contextvars.ContextVar("rno_telemetry", default=Telemetry.disabled())


def current() -> Telemetry:
    return _ACTIVE.get()


@contextlib.contextmanager
def use_telemetry(telemetry: Telemetry) -> Iterator[Telemetry]:
    token = _ACTIVE.set(telemetry)
    try:
        yield telemetry
    finally:
        _ACTIVE.reset(token)
