import math
from dataclasses import replace

import pytest

from core import qmath
from core.errors import HypothesisViolated, InvalidRequest, TooLarge
from core.freesets import ChannelVerdict, IncoherentModel
from protocols.erasure import (
    binomial_pmf_bound,
    build_gamma_n,
    closed_form_bound,
    destruction_cost_bounds,
    destruction_upper_expression,
    erasure_sweep,
    exact_sum_bound,
    hadamard_pair,
    mixing_deviation_bound,
    sample_mixing_pair,
    threshold_n,
)


def test_binomial_pmf_bound_golden():
    b = binomial_pmf_bound(10, 0.5, 5)
    assert b.pmf == pytest.approx(252 / 1024, abs=1e-15)
    assert b.bound == pytest.approx(math.exp(1 / 12) / math.sqrt(3 * math.pi), abs=1e-12)
    assert b.pmf <= b.bound


def test_binomial_pmf_bound_domain():
    with pytest.raises(InvalidRequest):
        binomial_pmf_bound(4, 0.5, 1)
    with pytest.raises(InvalidRequest):
        binomial_pmf_bound(10, 0.5, 6)
    with pytest.raises(InvalidRequest):
        binomial_pmf_bound(10, 1.0, 0)


def test_exact_sum_and_threshold():
    assert exact_sum_bound(2, 0.5) == pytest.approx(0.5, abs=1e-15)
    assert threshold_n(0.1, 0.5) == 81
    assert exact_sum_bound(81, 0.5) <= 0.1
    closed = closed_form_bound(81, 0.5)
    assert exact_sum_bound(81, 0.5) <= closed <= 0.1
    assert closed_form_bound(2, 0.5) is None


def test_destruction_upper_expression_golden():
    assert destruction_upper_expression(0.5, 0.1) == pytest.approx(6.326, abs=1e-3)


def test_mixing_pairs_average_to_mio():
    inc = IncoherentModel(2)
    H, ZH = hadamard_pair()
    assert inc.is_rno_channel(qmath.mix_channels([0.5, 0.5], [H, ZH]), 1e-12) == ChannelVerdict.FREE
    for p in (0.3, 0.5, 0.7):
        psi, phi = sample_mixing_pair(p, rng=3)
        theta = qmath.mix_channels([p, 1 - p], [psi, phi])
        assert inc.is_rno_channel(theta, 1e-9) == ChannelVerdict.FREE
        assert inc.is_rno_channel(psi) == ChannelVerdict.NOT_FREE


def test_deviation_chain_on_hadamard_pair(cfg):
    H, ZH = hadamard_pair()
    rep = mixing_deviation_bound(H, ZH, 0.5, 2, compute_diamond=True, cfg=cfg)
    assert rep.measured_choi_trace_distance <= rep.exact_sum_bound + 1e-6
    assert rep.measured_diamond_distance <= 0.5 * rep.measured_choi_trace_distance_d_in + 1e-6
    assert rep.threshold_n == 81
    assert rep.flags["choi_le_exact"]


def test_non_mio_mixture_is_rejected(cfg):
    H, _ = hadamard_pair()
    with pytest.raises(HypothesisViolated):
        mixing_deviation_bound(H, H, 0.5, 2, cfg=cfg)


def test_gamma_n_shapes_and_guard(cfg):
    H, ZH = hadamard_pair()
    theta = qmath.mix_channels([0.5, 0.5], [H, ZH])
    assert build_gamma_n(H, theta, 1, cfg) is H
    g2 = build_gamma_n(H, theta, 2, cfg)
    assert g2.in_dims == (2, 2)
    with pytest.raises(TooLarge):
        build_gamma_n(H, theta, 3, replace(cfg, choi_guard=16))
    with pytest.raises(InvalidRequest):
        build_gamma_n(H, qmath.identity_channel(3), 2, cfg)


def test_small_sweep_holds(cfg):
    sweep = erasure_sweep(ps=(0.5,), ns=(2, 3), pairs=2, seed=1, cfg=cfg)
    assert len(sweep.rows) == 4
    assert sweep.all_chains_hold
    assert sweep.thresholds == [{"p": 0.5, "eps": 0.1, "threshold_n": 81}]


def test_destruction_cost_bounds(cfg):
    H = qmath.unitary_channel(qmath.HADAMARD)
    rep = destruction_cost_bounds(H, 0.3, 0.1, cfg, restarts=2, seed=0)
    assert rep.upper_radius == pytest.approx(0.2)
    assert rep.lower_radius == pytest.approx(math.sqrt(0.3 * 1.7))
    assert rep.L_lower_radius <= rep.L_upper_radius + 1e-6
    assert 0.0 < rep.upper < math.inf
    with pytest.raises(InvalidRequest):
        destruction_cost_bounds(H, 0.1, 0.2, cfg)


def test_binomial_pmf_bound_holds_on_small_grid():
    for p in [round(0.1 * j, 1) for j in range(1, 10)]:
        for n in range(2, 61):
            if n * p * (1 - p) <= 1:
                continue
            for k in range(0, math.floor(n * p) + 1):
                binomial_pmf_bound(n, p, k)


@pytest.mark.slow
def test_full_sweep_bound_chain(cfg):
    sweep = erasure_sweep(ps=(0.3, 0.5, 0.7), ns=(2, 3, 4, 5, 6), pairs=5, seed=0, cfg=cfg)
    assert len(sweep.rows) == 75
    assert sweep.all_chains_hold
    for row in sweep.rows:
        if row["diamond"] is not None:
            assert row["diamond"] <= row["choi_trace_one"] + 1e-6
