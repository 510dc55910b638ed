import math

import numpy as np
import pytest

from core import qmath
from core.errors import InvalidRequest, InvalidState
from core.freesets import IncoherentModel, SeparablePPTModel, Verdict
from core.ledger import FindingsLedger
from measures.static import (
    GENERALIZED,
    STANDARD,
    generalized_robustness,
    geometric_measure_pure,
    pure_state_robustness,
    quantifier_axiom_suite,
    robustness,
    robustness_profile,
    smoothed_log_robustness,
    standard_robustness,
)

INC = IncoherentModel(2)
SEP = SeparablePPTModel(2, 2)


def test_plus_state_generalized_robustness(plus, cfg):
    res = generalized_robustness(INC, plus, cfg)
    assert res.value == pytest.approx(1.0, abs=1e-5)
    assert res.log_value() == pytest.approx(1.0, abs=1e-5)
    assert INC.is_free_state(res.free_witness, 1e-6) == Verdict.FREE
    assert res.residuals["primal_res"] <= cfg.certify_tolerance


def test_coherent_state_has_infinite_standard_robustness(plus, cfg):
    res = standard_robustness(INC, plus, cfg)
    assert math.isinf(res.value)
    assert res.status == "Infeasible"
    assert not res.finite


def test_free_state_has_zero_robustness(cfg):
    rho = qmath.DensityMatrix(np.diag([0.3, 0.7]), (2,))
    for q in (GENERALIZED, STANDARD):
        assert robustness(INC, rho, q, cfg).value == pytest.approx(0.0, abs=1e-6)


def test_bell_robustness(bell, cfg):
    gen = generalized_robustness(SEP, bell, cfg)
    std = standard_robustness(SEP, bell, cfg)
    assert gen.value == pytest.approx(1.0, abs=1e-6)
    assert std.value == pytest.approx(1.0, abs=1e-5)
    assert SEP.violation(std.mixer) <= 1e-7


def test_pure_state_sdp_matches_closed_form(rng, cfg):
    for _ in range(3):
        psi = qmath.random_pure_state((2, 2), rng)
        sdp = generalized_robustness(SEP, psi, cfg).value
        assert sdp == pytest.approx(pure_state_robustness(SEP, psi), abs=1e-5)


def test_geometric_measure(plus, bell):
    assert geometric_measure_pure(INC, plus) == pytest.approx(1 - 1 / math.sqrt(2), abs=1e-12)
    assert geometric_measure_pure(SEP, bell) == pytest.approx(1 - 1 / math.sqrt(2), abs=1e-12)
    with pytest.raises(InvalidState):
        geometric_measure_pure(INC, qmath.maximally_mixed(2))


def test_smoothing_lowers_robustness(plus, cfg):
    values = [smoothed_log_robustness(INC, plus, eps, "R", cfg) for eps in (0.0, 0.05, 0.1, 0.2)]
    assert values[0] == pytest.approx(1.0, abs=1e-5)
    assert all(b <= a + 1e-6 for a, b in zip(values, values[1:]))
    assert 0.0 < values[2] < values[0]
    log_value = smoothed_log_robustness(INC, plus, 0.0, "LR", cfg)
    assert log_value == pytest.approx(1.0, abs=1e-5)


def test_request_validation(plus, cfg):
    with pytest.raises(InvalidRequest):
        robustness(INC, plus, "geometric", cfg)
    with pytest.raises(InvalidRequest):
        smoothed_log_robustness(INC, plus, 1.5, "R", cfg)
    with pytest.raises(InvalidRequest):
        smoothed_log_robustness(INC, plus, 0.1, "X", cfg)


def test_profile_collects_quantifiers(bell, cfg):
    prof = robustness_profile(SEP, bell, cfg)
    assert prof["verdict"] == "NotFree"
    assert prof["generalized"] == pytest.approx(1.0, abs=1e-5)
    assert prof["pure_closed_form"] == pytest.approx(1.0, abs=1e-9)
    assert "geometric" in prof


def test_axiom_suite_small_run(cfg):
    ledger = FindingsLedger.in_memory()
    rep = quantifier_axiom_suite(INC, GENERALIZED, trials=2, seed=3, cfg=cfg, ledger=ledger)
    assert rep.passed, rep.max_violation
    assert rep.checked["O1"] == 2
    assert ledger.get_stat(f"axioms_{GENERALIZED}_incoherent").total == 1


def test_separable_monotonicity_uses_transformation_channels(cfg):
    rep = quantifier_axiom_suite(SEP, GENERALIZED, trials=2, seed=4, cfg=cfg)
    assert rep.channels == {"transform": 1, "sampled": 1}
    assert rep.checked["O2"] == 2
    assert rep.max_violation["O2"] <= rep.tol
    assert quantifier_axiom_suite(INC, GENERALIZED, trials=1, seed=4, cfg=cfg).channels == {"sampled": 1}


@pytest.mark.slow
@pytest.mark.parametrize("model", [INC, SEP])
@pytest.mark.parametrize("quantifier", [GENERALIZED, STANDARD])
def test_axiom_suite_both_models(model, quantifier, cfg):
    rep = quantifier_axiom_suite(model, quantifier, trials=10, seed=11, cfg=cfg)
    assert rep.passed, rep.max_violation


def test_smoothed_log_robustness_does_not_grow_under_free_channels(rng, cfg):
    for _ in range(3):
        rho = qmath.random_state(2, rng)
        lam = INC.sample_free_channel(rng)
        before = smoothed_log_robustness(INC, rho, 0.05, "LR", cfg)
        after = smoothed_log_robustness(INC, qmath.apply_channel(lam, rho), 0.05, "LR", cfg)
        assert after <= before + 1e-5


def test_log_generalized_robustness_is_subadditive(rng, cfg):
    for rho in (qmath.random_state(2, rng), qmath.plus_state(2)):
        single = math.log2(1.0 + generalized_robustness(INC, rho, cfg).value)
        double = math.log2(1.0 + generalized_robustness(INC.power(2), rho.power(2), cfg).value)
        assert double <= 2.0 * single + 1e-5
