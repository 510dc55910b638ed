import numpy as np
import pytest

from core import qmath
from core.errors import InvalidRequest, InvalidShape
from core.freesets import IncoherentModel, SeparablePPTModel
from measures.dynamic import (
    channel_axiom_suite,
    channel_divergence_to_free,
    channel_rno_robustness,
    diamond_certificate,
    diamond_distance,
    diamond_lower_bound,
    epsilon_rno_distance,
    is_epsilon_rno,
    radius_lattice,
    smoothed_channel_robustness,
    smoothed_channel_robustness_sweep,
)

HAD = qmath.unitary_channel(qmath.HADAMARD, label="hadamard")


def _plus_replacement():
    return qmath.replacement_channel(qmath.plus_state(2), 2)


def test_diamond_identity_vs_dephasing(cfg):
    cert = diamond_certificate(qmath.identity_channel(2), qmath.dephasing_channel(2), cfg)
    assert cert.value == pytest.approx(0.5, abs=1e-4)
    assert cert.lower_bound <= cert.value + 1e-6
    assert cert.lower_bound == pytest.approx(0.5, abs=1e-9)


def test_diamond_of_orthogonal_unitaries(cfg):
    X = qmath.unitary_channel(qmath.PAULI_X)
    assert diamond_distance(qmath.identity_channel(2), X, cfg) == pytest.approx(1.0, abs=1e-4)
    assert diamond_distance(X, X, cfg) == 0.0


def test_diamond_lower_bound_never_exceeds_sdp(rng, cfg):
    E1, E2 = qmath.random_channel(2, 2, rng), qmath.random_channel(2, 2, rng)
    assert diamond_lower_bound(E1, E2, 32, seed=1) <= diamond_distance(E1, E2, cfg) + 1e-6


def test_diamond_shape_mismatch():
    with pytest.raises(InvalidShape):
        diamond_distance(qmath.identity_channel(2), qmath.identity_channel(3))


@pytest.mark.parametrize("channel", [HAD, _plus_replacement()], ids=["hadamard", "plus_replacement"])
def test_robustness_goldens(channel, cfg):
    res = channel_rno_robustness(channel, cfg)
    assert res.p_star == pytest.approx(0.5, abs=1e-4)
    assert IncoherentModel(2).is_rno_channel(res.resulting_free, 1e-5).value == "Free"
    F = channel_divergence_to_free(channel, cfg)
    assert F == pytest.approx(1.0, abs=1e-4)
    assert res.p_star * 2.0 ** F == pytest.approx(1.0, abs=1e-4)


def test_free_channels_have_unit_robustness(rng, cfg):
    m = IncoherentModel(2)
    for _ in range(5):
        M = m.sample_free_channel(rng)
        assert channel_rno_robustness(M, cfg).p_star == 1.0
        assert channel_divergence_to_free(M, cfg) == 0.0


def test_channel_measures_need_incoherent_model(cfg):
    with pytest.raises(InvalidRequest):
        channel_rno_robustness(HAD, cfg, SeparablePPTModel(2, 2))


def test_epsilon_rno_distance(cfg):
    assert epsilon_rno_distance(qmath.dephasing_channel(2), cfg).distance == 0.0
    d = epsilon_rno_distance(HAD, cfg).distance
    assert 0.0 < d <= 1.0
    assert is_epsilon_rno(HAD, d + 1e-3, cfg)
    assert not is_epsilon_rno(HAD, 0.0, cfg)


def test_radius_lattice_is_nested():
    np.testing.assert_allclose(radius_lattice(0.1, 0.025), [0.0, 0.025, 0.05, 0.075, 0.1])
    np.testing.assert_allclose(radius_lattice(0.06, 0.025), [0.0, 0.025, 0.05, 0.06])
    with pytest.raises(InvalidRequest):
        radius_lattice(0.1, 0.0)


def test_smoothing_at_zero_radius_is_plain_robustness(cfg):
    res = smoothed_channel_robustness(HAD, 0.0, cfg, restarts=2, seed=0)
    assert res.upper_estimate == pytest.approx(channel_rno_robustness(HAD, cfg).p_star, abs=1e-6)
    assert res.witness_radius == 0.0


def test_smoothed_sweep_is_nonincreasing(cfg):
    rows = smoothed_channel_robustness_sweep(_plus_replacement(), [0.0, 0.05, 0.1], cfg, restarts=2, seed=0)
    values = [r.upper_estimate for r in rows]
    assert values[0] == pytest.approx(0.5, abs=1e-4)
    assert values[1] <= values[0] + 1e-6
    assert values[2] <= values[1] + 1e-6
    assert all(r.is_upper_bound for r in rows)
    with pytest.raises(InvalidRequest):
        smoothed_channel_robustness_sweep(HAD, [0.1, 1.0], cfg)


def test_channel_axiom_suite_small_run(cfg):
    rep = channel_axiom_suite(2, trials=2, seed=5, cfg=cfg)
    assert rep.passed, rep.max_violation
    assert rep.checked["P1"] == 2


@pytest.mark.slow
def test_free_channel_faithfulness_sweep(rng, cfg):
    m = IncoherentModel(2)
    for _ in range(20):
        assert channel_rno_robustness(m.sample_free_channel(rng), cfg).p_star == pytest.approx(1.0, abs=1e-6)


def test_divergence_ignores_a_free_tensor_factor(cfg):
    base = channel_divergence_to_free(HAD, cfg)
    assert base > 0.0
    for M in (qmath.dephasing_channel(2), IncoherentModel(2).sample_free_channel(3)):
        both = qmath.tensor_channels(HAD, M)
        assert channel_divergence_to_free(both, cfg) == pytest.approx(base, abs=1e-4)


def test_diamond_distance_does_not_grow_with_a_side_channel(rng, cfg):
    for _ in range(2):
        N1 = qmath.random_channel(2, 2, rng, kraus_rank=2)
        N2 = qmath.random_channel(2, 2, rng, kraus_rank=2)
        Q = qmath.random_channel(2, 2, rng, kraus_rank=2)
        joint = diamond_distance(qmath.tensor_channels(Q, N1), qmath.tensor_channels(Q, N2), cfg)
        assert joint <= diamond_distance(N1, N2, cfg) + 1e-5


def test_diamond_dominates_stabilized_output_distance(rng, cfg):
    E1, E2 = HAD, qmath.dephasing_channel(2)
    value = diamond_distance(E1, E2, cfg)
    for _ in range(20):
        rho = qmath.random_pure_state((2, 2), rng)
        out1 = qmath.apply_channel(E1, rho, [0])
        out2 = qmath.apply_channel(E2, rho, [0])
        assert qmath.trace_distance(out1, out2) <= value + 1e-6


def test_hadamard_sweep_is_nonincreasing_over_full_grid(cfg):
    rows = smoothed_channel_robustness_sweep(HAD, [0.0, 0.05, 0.1, 0.2], cfg, restarts=2, seed=0)
    values = [r.upper_estimate for r in rows]
    assert values[0] == pytest.approx(0.5, abs=1e-4)
    assert all(b <= a + 1e-6 for a, b in zip(values, values[1:]))
