import json
from pathlib import Path

import numpy as np
import pytest

from core import telemetry
from core.config import RnoConfig
from core.conic import SdpProblem, solve_sdp
from core.errors import ValidationError
from core.jsonstore import load_json, save_json
from core.ledger import FindingsLedger
from core.telemetry import Telemetry, use_telemetry
from export_findings_report import summarize_findings


def test_config_roundtrip(tmp_path, monkeypatch):
    monkeypatch.delenv("RNO_TOL", raising=False)
    cfg = RnoConfig(seesaw_rounds=4, state_guard=64, telemetry_enabled=False)
    cfg.save(tmp_path / "config.json")
    loaded = RnoConfig.load_or_default(tmp_path / "config.json")
    assert loaded == cfg
    assert RnoConfig.load_or_default(tmp_path / "absent.json") == RnoConfig()


def test_tolerance_from_environment(monkeypatch):
    monkeypatch.setenv("RNO_TOL", "1e-5")
    assert RnoConfig().apply_env().sdp_tolerance == 1e-5
    assert RnoConfig().apply_env().sdp().tolerance == 1e-5
    monkeypatch.setenv("RNO_TOL", "tight")
    with pytest.raises(ValidationError):
        RnoConfig().apply_env()
    monkeypatch.setenv("RNO_TOL", "2")
    with pytest.raises(ValidationError):
        RnoConfig().apply_env()


def _solve_once():
    p = SdpProblem("lambda_max", "min")
    t = p.scalar("t")
    p.add_psd(t * np.eye(2) - np.diag([1.0, 2.0]), "dominates")
    p.set_objective(t)
    return solve_sdp(p)


def test_telemetry_records_solves_and_findings(tmp_path):
    tel = Telemetry.for_run("robustness", str(tmp_path))
    with use_telemetry(tel):
        assert telemetry.current() is tel
        _solve_once()
        telemetry.current().gap_logged("demo", "reported only", value=float("inf"))
        telemetry.current().finding("demo_check", True)
    assert telemetry.current() is not tel

    events = [json.loads(line) for line in (tmp_path / "events_robustness.jsonl").read_text().splitlines()]
    assert [e["type"] for e in events] == ["sdp_solve", "gap_logged", "finding"]
    assert events[1]["value"] == "inf"

    stats = json.loads((tmp_path / "stats_robustness.json").read_text())
    assert stats["problems"]["lambda_max"]["solves"] == 1
    assert sum(stats["statuses"].values()) == 1


def test_disabled_telemetry_writes_nothing(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    with use_telemetry(Telemetry.disabled()):
        _solve_once()
    assert list(tmp_path.iterdir()) == []


def test_ledger_persists_and_ranks(tmp_path):
    path = tmp_path / "logs" / "findings.json"
    ledger = FindingsLedger(str(path))
    ledger.record("capacity_bound", True)
    ledger.record("capacity_bound", False, {"achieved_m": 2, "bound_on_m": 1.4})
    ledger.record("erasure_chain", True)

    again = FindingsLedger(str(path))
    assert again.get_stat("capacity_bound").total == 2
    assert again.get_stat("capacity_bound").rate == 0.5
    assert again.flagged() == [{"experiment": "capacity_bound", "passed": False, "values": {"achieved_m": 2, "bound_on_m": 1.4}}]
    assert again.weakest(1)[0][0] == "capacity_bound"
    assert again.get_stat("never_run").rate == 0.0


def test_corrupt_ledger_starts_over(tmp_path):
    path = tmp_path / "findings.json"
    path.write_text("not json", encoding="utf-8")
    assert FindingsLedger(str(path)).data == {"experiments": {}, "findings": []}


def test_findings_summary(tmp_path, capsys):
    ledger = FindingsLedger(str(tmp_path / "findings.json"))
    ledger.record("channel_axioms", True)
    ledger.record("capacity_bound", False, {"achieved_m": 2})
    with use_telemetry(Telemetry.for_run("seesaw", str(tmp_path))):
        _solve_once()

    summarize_findings(Path(tmp_path / "findings.json"))
    out = capsys.readouterr().out
    assert "EXPERIMENTS: 2  runs=2 passed=1 rate=50.00%" in out
    assert "capacity_bound: achieved_m=2" in out
    assert "SOLVER [seesaw]" in out


def test_json_store_roundtrip_and_fallbacks(tmp_path):
    path = str(tmp_path / "state" / "data.json")
    save_json(path, {"value": 1, "when": Path("x")})
    assert load_json(path, dict) == {"value": 1, "when": "x"}
    assert not (tmp_path / "state" / "data.json.tmp").exists()
    (tmp_path / "list.json").write_text("[1, 2]", encoding="utf-8")
    assert load_json(str(tmp_path / "list.json"), lambda: {"empty": True}) == {"empty": True}
    assert load_json(None, dict) == {}


def test_stats_survive_a_corrupt_file(tmp_path):
    (tmp_path / "stats_robustness.json").write_text("{", encoding="utf-8")
    with use_telemetry(Telemetry.for_run("robustness", str(tmp_path))):
        _solve_once()
    stats = json.loads((tmp_path / "stats_robustness.json").read_text())
    assert stats["schema_version"] == 1
    assert stats["problems"]["lambda_max"]["solves"] == 1
