from __future__ import annotations

import os
import sys

import numpy as np
import pytest

ROOT = os.path.dirname(os.path.abspath(__file__))
if ROOT not in sys.path:
    sys.path.insert(0, ROOT)

from core import qmath  # noqa: E402
from core.config import RnoConfig  # noqa: E402


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def cfg(tmp_path) -> RnoConfig:
    # Lighter heuristics than the shipped defaults; solver tolerances unchanged.
    return RnoConfig(
        smoothing_restarts=4,
        seesaw_restarts=3,
        seesaw_rounds=15,
        free_samples=100,
        telemetry_enabled=False,
        log_dir=str(tmp_path / "logs"),
        ledger_path=str(tmp_path / "logs" / "findings.json"),
    )


@pytest.fixture
def bell() -> qmath.DensityMatrix:
    return qmath.bell_state()


@pytest.fixture
def plus() -> qmath.DensityMatrix:
    return qmath.plus_state(2)


@pytest.fixture
def werner():
    return qmath.werner_state
