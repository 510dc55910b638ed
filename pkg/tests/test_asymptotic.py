import math

import pytest

from core import qmath
from core.errors import InvalidRequest, TooLarge, Vacuous
from core.freesets import IncoherentModel, SeparablePPTModel
from measures.static import smoothed_log_robustness
from protocols.asymptotic import build_cost_channel, cost_bounds, cost_lower_bound, cost_upper_bound

SEP = SeparablePPTModel(2, 2)
INC = IncoherentModel(2)


def test_bell_cost_bounds_meet(bell, cfg):
    rows = cost_bounds(SEP, bell, ns=(1, 2), cfg=cfg)
    assert [r.n for r in rows] == [1, 2]
    for r in rows:
        assert r.lower_bound == pytest.approx(1.0, abs=1e-4)
        assert r.upper_bound == 1.0
        assert not r.vacuous
        assert r.ordered


def test_coherent_state_upper_bound_is_vacuous(plus, cfg):
    (row,) = cost_bounds(INC, plus, ns=(1,), cfg=cfg)
    assert row.vacuous
    assert math.isinf(row.upper_bound)
    assert row.lower_bound == pytest.approx(1.0, abs=1e-5)
    assert row.ordered is None
    assert math.isinf(cost_upper_bound(INC, plus, 1, cfg))


def test_argument_checks(bell, cfg):
    with pytest.raises(InvalidRequest):
        cost_lower_bound(SEP, bell, 1, eps=0.5, cfg=cfg)
    with pytest.raises(InvalidRequest):
        cost_lower_bound(SEP, bell, 0, cfg=cfg)
    with pytest.raises(TooLarge):
        cost_upper_bound(SEP, bell, 3, cfg)


def test_cost_channel_for_bell(bell, cfg):
    rep = build_cost_channel(SEP, bell, n=1, samples=40, seed=3, cfg=cfg)
    assert rep.k == 1
    assert rep.target_error <= 1e-6
    assert rep.freeness_guaranteed
    assert rep.max_violation <= 1e-5
    assert rep.check == "exact"
    assert rep.max_overlap <= rep.overlap_bound + 1e-9


def test_cost_channel_needs_finite_robustness(plus, cfg):
    with pytest.raises(Vacuous):
        build_cost_channel(INC, plus, cfg=cfg)


def test_cost_channel_output_is_no_more_resourceful_than_its_input(bell, cfg):
    rep = build_cost_channel(SEP, bell, n=1, samples=10, seed=3, cfg=cfg)
    out = qmath.apply_channel(rep.channel, SEP.max_resource_state(rep.k))
    for eps in (0.0, 0.05, 0.1):
        assert smoothed_log_robustness(SEP, out, eps, "LR", cfg) <= rep.k + 1e-5
