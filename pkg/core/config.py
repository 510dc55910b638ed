from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

from core.errors import ValidationError

TOL_ENV = "RNO_TOL"


@dataclass(frozen=True)
class SdpConfig:
    tolerance: float = 1e-7
    max_iter: int = 200_000
    seed: int = 7


@dataclass
class RnoConfig:
    # Solver
    sdp_tolerance: float = 1e-7
    certify_tolerance: float = 1e-6
    psd_tol: float = 1e-9
    max_iter: int = 200_000
    seed: int = 7

    # Heuristics
    smoothing_restarts: int = 16
    smoothing_radius_step: float = 0.025
    seesaw_restarts: int = 8
    seesaw_rounds: int = 30
    seesaw_gain_tol: float = 1e-8
    free_samples: int = 500

    # Guards
    choi_guard: int = 4096
    state_guard: int = 16

    # Output
    log_dir: str = "logs"
    telemetry_enabled: bool = True
    report_wall_time: bool = False
    ledger_path: str = "logs/findings.json"

    def sdp(self) -> SdpConfig:
        return SdpConfig(tolerance=float(self.sdp_tolerance), max_iter=int(self.max_iter), seed=int(self.seed))

    def apply_env(self) -> "RnoConfig":
        raw = os.environ.get(TOL_ENV)
        if raw is None or not raw.strip():
            return self
        try:
            tol = float(raw)
        except ValueError:
            raise ValidationError(f"{TOL_ENV}={raw!r} is not a number") from None
        if not (0.0 < tol < 1.0):
            raise ValidationError(f"{TOL_ENV}={raw!r} must lie in (0, 1)")
        self.sdp_tolerance = tol
        return self

    @staticmethod
    def load(path: str | Path) -> "RnoConfig":
        p = Path(path)
        data = json.loads(p.read_text(encoding="utf-8"))

        cfg = RnoConfig()
        cfg.sdp_tolerance = float(data.get("sdp_tolerance", cfg.sdp_tolerance))
        cfg.certify_tolerance = float(data.get("certify_tolerance", cfg.certify_tolerance))
        cfg.psd_tol = float(data.get("psd_tol", cfg.psd_tol))
        cfg.max_iter = int(data.get("max_iter", cfg.max_iter))
        cfg.seed = int(data.get("seed", cfg.seed))

        cfg.smoothing_restarts = int(data.get("smoothing_restarts", cfg.smoothing_restarts))
        cfg.smoothing_radius_step = float(data.get("smoothing_radius_step", cfg.smoothing_radius_step))
        cfg.seesaw_restarts = int(data.get("seesaw_restarts", cfg.seesaw_restarts))
        cfg.seesaw_rounds = int(data.get("seesaw_rounds", cfg.seesaw_rounds))
        cfg.seesaw_gain_tol = float(data.get("seesaw_gain_tol", cfg.seesaw_gain_tol))
        cfg.free_samples = int(data.get("free_samples", cfg.free_samples))

        cfg.choi_guard = int(data.get("choi_guard", cfg.choi_guard))
        cfg.state_guard = int(data.get("state_guard", cfg.state_guard))

        cfg.log_dir = str(data.get("log_dir", cfg.log_dir))
        cfg.telemetry_enabled = bool(data.get("telemetry_enabled", cfg.telemetry_enabled))
        cfg.report_wall_time = bool(data.get("report_wall_time", cfg.report_wall_time))
        cfg.ledger_path = str(data.get("ledger_path", cfg.ledger_path))
        return cfg

    @staticmethod
    def load_or_default(path: str | Path) -> "RnoConfig":
        """Config file if present, defaults otherwise; `RNO_TOL` applied last."""
        p = Path(path)
        cfg = RnoConfig.load(p) if p.exists() else RnoConfig()
        return cfg.apply_env()

    def save(self, path: str | Path) -> None:
        p = Path(path)
        data = {
            "sdp_tolerance": float(self.sdp_tolerance),
            "certify_tolerance": float(self.certify_tolerance),
            "psd_tol": float(self.psd_tol),
            "max_iter": int(self.max_iter),
            "seed": int(self.seed),
            # Heuristics
            "smoothing_restarts": int(self.smoothing_restarts),
            "smoothing_radius_step": float(self.smoothing_radius_step),
            "seesaw_restarts": int(self.seesaw_restarts),
            "seesaw_rounds": int(self.seesaw_rounds),
            "seesaw_gain_tol": float(self.seesaw_gain_tol),
            "free_samples": int(self.free_samples),
            # Guards
            "choi_guard": int(self.choi_guard),
            "state_guard": int(self.state_guard),
            # Output
            "log_dir": str(self.log_dir),
            "telemetry_enabled": bool(self.telemetry_enabled),
            "report_wall_time": bool(self.report_wall_time),
            "ledger_path": str(self.ledger_path),
        }
        p.write_text(json.dumps(data, ensure_ascii=False, indent=2), encoding="utf-8")
