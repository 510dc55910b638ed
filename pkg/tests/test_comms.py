import json
import math
from dataclasses import replace

import numpy as np
import pytest

from core import qmath
from core.errors import InvalidRequest, NotFreeComponent, TooLarge
from core.ledger import FindingsLedger
from core.telemetry import Telemetry, use_telemetry
from protocols import comms
from protocols.comms import (
    CapacityReport,
    ProtocolSpec,
    achievability_scan,
    best_decoder,
    capacity_bound,
    capacity_bound_value,
    classical_channel,
    protocol_simulate,
    relay_spec,
    seesaw_success_probability,
)

DEPOLARIZING = qmath.replacement_channel(qmath.maximally_mixed(2), 2)


def test_relay_protocol_on_identity():
    assert protocol_simulate(relay_spec(qmath.identity_channel(2), 2)) == pytest.approx(1.0, abs=1e-12)


def test_coherent_encoder_is_rejected():
    spec = relay_spec(qmath.identity_channel(2), 2)
    bad = ProtocolSpec(spec.N, 2, 1, qmath.unitary_channel(qmath.HADAMARD), spec.decoder, spec.W)
    with pytest.raises(NotFreeComponent):
        protocol_simulate(bad)


@pytest.mark.parametrize(
    "channel, expected",
    [(qmath.identity_channel(2), 1.0), (qmath.dephasing_channel(2), 1.0), (DEPOLARIZING, 0.5)],
    ids=["identity", "dephasing", "depolarizing"],
)
def test_seesaw_goldens(channel, expected, cfg):
    res = seesaw_success_probability(channel, 2, cfg=cfg, restarts=2, seed=0)
    assert res.f_hat == pytest.approx(expected, abs=1e-6)
    assert res.monotone
    assert res.to_dict()["is_lower_bound"]


def _events(path):
    return [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines()]


def test_seesaw_records_a_decreasing_half_step(cfg, tmp_path, monkeypatch):
    to_zero = classical_channel(np.array([[1.0, 1.0], [0.0, 0.0]]), 2, 2, "to_zero")
    monkeypatch.setattr(comms, "best_decoder", lambda spec, c: to_zero)
    with use_telemetry(Telemetry.for_run("seesaw", str(tmp_path))):
        res = seesaw_success_probability(qmath.identity_channel(2), 2, cfg=cfg, rounds=1, restarts=1)
    assert not res.monotone
    assert res.f_hat == pytest.approx(1.0, abs=1e-12)
    assert res.trajectory[1] == pytest.approx(0.5, abs=1e-12)
    failed = [e for e in _events(tmp_path / "events_seesaw.jsonl") if e["type"] == "finding"]
    assert failed[0]["experiment"] == "seesaw_monotone"
    assert not failed[0]["passed"]
    assert failed[0]["step"] == "decoder"


def test_seesaw_logs_a_skipped_non_mio_step(cfg, tmp_path, monkeypatch):
    monkeypatch.setattr(comms, "best_encoder", lambda spec, c: qmath.unitary_channel(qmath.HADAMARD))
    with use_telemetry(Telemetry.for_run("seesaw", str(tmp_path))):
        res = seesaw_success_probability(qmath.identity_channel(2), 2, cfg=cfg, rounds=1, restarts=1)
    assert res.monotone
    assert res.f_hat == pytest.approx(1.0, abs=1e-6)
    gaps = [e for e in _events(tmp_path / "events_seesaw.jsonl") if e["type"] == "gap_logged"]
    assert [(g["topic"], g["step"]) for g in gaps] == [("seesaw_step_skipped", "encoder")]


def test_success_probability_does_not_grow_with_message_count(cfg):
    N = qmath.mix_channels([0.5, 0.5], [qmath.identity_channel(2), DEPOLARIZING])
    f = {m: seesaw_success_probability(N, m, cfg=cfg, restarts=2, seed=0).f_hat for m in (2, 3, 4)}
    assert f[2] == pytest.approx(0.75, abs=1e-6)
    assert f[2] >= f[3] - 1e-6
    assert f[3] >= f[4] - 1e-6


def test_seesaw_argument_checks(cfg):
    I = qmath.identity_channel(2)
    with pytest.raises(InvalidRequest):
        seesaw_success_probability(I, 1, cfg=cfg)
    with pytest.raises(InvalidRequest):
        seesaw_success_probability(I, 2, ancilla_dim=0, cfg=cfg)
    with pytest.raises(TooLarge):
        seesaw_success_probability(I, 4, ancilla_dim=2, cfg=replace(cfg, choi_guard=8))


def test_achievability_scan_on_a_qubit(cfg):
    achieved, f_hats = achievability_scan(qmath.identity_channel(2), 0.3, ms=(2, 3), cfg=cfg, restarts=1, seed=0)
    assert achieved == 2
    assert f_hats[2] == pytest.approx(1.0, abs=1e-6)
    assert f_hats[3] == pytest.approx(2 / 3, abs=1e-5)


def test_capacity_bound_value_golden():
    value = capacity_bound_value(0.5, 0.3, 0.1)
    assert value == pytest.approx(10 / 3)
    report = CapacityReport(0.3, 0.1, 0.5, value, None, None, None)
    assert report.bound_bits == pytest.approx(1.737, abs=1e-3)
    assert math.isinf(capacity_bound_value(0.0, 0.3, 0.1))


def test_capacity_bound_is_recorded(cfg):
    ledger = FindingsLedger.in_memory()
    rep = capacity_bound(DEPOLARIZING, 0.3, 0.0, cfg, ms=(2,), restarts=1, seed=0, ledger=ledger, label="depol")
    assert rep.L_delta_estimate == 1.0
    assert rep.bound_on_m == pytest.approx(1 / 0.7)
    assert rep.achieved_m == 1
    assert rep.consistent
    assert ledger.get_stat("capacity_bound_depol").total == 1

    bare = capacity_bound(DEPOLARIZING, 0.3, 0.0, cfg, ms=None)
    assert bare.consistent is None and bare.f_hats == {}
    with pytest.raises(InvalidRequest):
        capacity_bound(DEPOLARIZING, 0.6, 0.5, cfg, ms=None)


@pytest.mark.slow
@pytest.mark.parametrize(
    "channel, expected",
    [(qmath.identity_channel(2), 1.0), (qmath.dephasing_channel(2), 1.0), (DEPOLARIZING, 0.5)],
    ids=["identity", "dephasing", "depolarizing"],
)
def test_capacity_experiment(channel, expected, cfg):
    ledger = FindingsLedger.in_memory()
    rep = capacity_bound(channel, 0.1, 0.05, cfg, ms=(2,), seed=0, ledger=ledger, label="experiment")
    assert rep.f_hats[2] == pytest.approx(expected, abs=1e-4)
    assert rep.consistent is not None
    assert ledger.get_stat("capacity_bound_experiment").total == 1


def test_decoder_sdp_is_optimal_for_fixed_encoder(rng, cfg):
    N = qmath.random_channel(2, 2, rng)
    base = relay_spec(N, 2)
    enc = classical_channel(rng.dirichlet([0.5, 0.5], size=2).T, 2, (2, 1), "encoder")
    spec = ProtocolSpec(N, 2, 1, enc, base.decoder, base.W)
    best = best_decoder(spec, cfg)
    f_best = protocol_simulate(ProtocolSpec(N, 2, 1, enc, best, base.W))
    for _ in range(5):
        other = classical_channel(rng.dirichlet([0.5, 0.5], size=2).T, (2, 1), 2, "decoder")
        for t in (0.3, 0.7):
            mixed = qmath.mix_channels([1 - t, t], [best, other])
            assert protocol_simulate(ProtocolSpec(N, 2, 1, enc, mixed, base.W)) <= f_best + 1e-6
