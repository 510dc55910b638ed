import math
from dataclasses import replace

import numpy as np
import pytest

from core import qmath
from core.errors import ConditionNotMet, InvalidState, TooLarge
from core.freesets import IncoherentModel, SeparablePPTModel
from protocols.transform import build_transform_channel, check_condition, corollary_condition_check, verify_transform

SEP = SeparablePPTModel(2, 2)
G_BELL = 1 - 1 / math.sqrt(2)


def test_bell_to_noisy_bell_is_feasible(bell, werner, cfg):
    # werner(0.5) has Bell fidelity 5/8, so its standard robustness is 1/4
    plan = check_condition(SEP, bell, werner(0.5), cfg=cfg)
    assert plan.feasible
    assert plan.robustness == pytest.approx(0.25, abs=1e-4)
    assert plan.condition_lhs == pytest.approx(0.8 + G_BELL, abs=1e-4)
    assert plan.max_free_overlap == pytest.approx(0.5)

    ch = build_transform_channel(plan)
    rep = verify_transform(SEP, ch, samples=50, seed=2, plan=plan, tol=1e-5)
    assert rep.all_free
    assert rep.target_error <= 1e-9
    assert rep.max_sampled_overlap <= rep.overlap_bound + 1e-6


def test_condition_failure_and_tight_mode(bell, werner, cfg):
    # robustness 1/2: the stated condition fails, the overlap condition holds
    plan = check_condition(SEP, bell, werner(2 / 3), cfg=cfg)
    assert not plan.feasible
    assert plan.reason == "ConditionNotMet"
    assert plan.condition_lhs == pytest.approx(2 / 3 + G_BELL, abs=1e-4)
    with pytest.raises(ConditionNotMet):
        build_transform_channel(plan)

    tight = check_condition(SEP, bell, werner(2 / 3), tight=True, cfg=cfg)
    assert tight.feasible
    assert tight.condition_lhs == pytest.approx(plan.condition_lhs, abs=1e-6)
    rep = verify_transform(SEP, build_transform_channel(tight), samples=30, seed=4, plan=tight, tol=1e-5)
    assert rep.all_free


def test_infinite_robustness_target_is_vacuous(plus, cfg):
    plan = check_condition(IncoherentModel(2), plus, plus, cfg=cfg)
    assert not plan.feasible
    assert plan.reason == "Vacuous"
    assert plan.overlap_bound == 0.0
    assert plan.to_dict()["robustness"] == math.inf


def test_source_must_be_pure(werner, cfg):
    with pytest.raises(InvalidState):
        check_condition(SEP, werner(0.5), werner(0.5), cfg=cfg)


def test_copies_condition(bell, werner, cfg):
    plans = corollary_condition_check(SEP, bell, werner(0.5), ns=(1,), cfg=cfg)
    assert len(plans) == 1 and plans[0].feasible
    with pytest.raises(TooLarge):
        corollary_condition_check(SEP, bell, werner(0.5), ns=(2,), cfg=replace(cfg, state_guard=4))


@pytest.mark.slow
def test_feasible_plans_certify(bell, werner, cfg):
    for w in np.linspace(0.34, 0.55, 10):
        plan = check_condition(SEP, bell, werner(float(w)), cfg=cfg)
        assert plan.feasible
        rep = verify_transform(SEP, build_transform_channel(plan), samples=100, seed=int(100 * w), plan=plan, tol=1e-6)
        assert rep.all_free
        assert rep.target_error <= 1e-9
