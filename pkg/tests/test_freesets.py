import math

import numpy as np
import pytest

from core import qmath
from core.errors import InvalidRequest, InvalidShape
from core.freesets import (
    ChannelVerdict,
    IncoherentModel,
    SeparablePPTModel,
    Verdict,
    is_free_state,
    is_mio_channel,
    max_resource_state,
    model_from_descriptor,
    overlap_bound_c,
    overlap_bound_inverse,
)


def test_incoherent_membership(plus):
    m = IncoherentModel(2)
    assert is_free_state(m, qmath.maximally_mixed(2)) == Verdict.FREE
    assert is_free_state(m, plus) == Verdict.NOT_FREE
    assert Verdict.FREE.value == "Free"
    with pytest.raises(InvalidShape):
        m.is_free_state(qmath.maximally_mixed(3))


def test_ppt_membership(bell, werner):
    m = SeparablePPTModel(2, 2)
    assert m.exact
    assert m.is_free_state(bell) == Verdict.NOT_FREE
    assert m.is_free_state(werner(0.3)) == Verdict.FREE
    assert m.is_free_state(werner(0.34)) == Verdict.NOT_FREE


def test_ppt_relaxation_above_exact_dimension(rng):
    m2 = SeparablePPTModel(2, 2).power(2)
    assert not m2.exact
    rho = m2.sample_free_state(rng)
    assert m2.is_free_state(rho) == Verdict.UNKNOWN_RELAXATION


def test_mio_channel_test():
    m = IncoherentModel(2)
    assert m.is_rno_channel(qmath.dephasing_channel(2)) == ChannelVerdict.FREE
    assert m.is_rno_channel(qmath.identity_channel(2)) == ChannelVerdict.FREE
    assert m.is_rno_channel(qmath.unitary_channel(qmath.HADAMARD)) == ChannelVerdict.NOT_FREE


def test_mio_channel_test_rejects_wrong_dimensions():
    with pytest.raises(InvalidShape):
        IncoherentModel(2).is_rno_channel(qmath.dephasing_channel(3))
    assert IncoherentModel(3).is_rno_channel(qmath.dephasing_channel(3)) == ChannelVerdict.FREE
    V = np.outer(qmath.ket(0, 3), qmath.ket(0, 2)) + np.outer(qmath.ket(2, 3), qmath.ket(1, 2))
    embed = qmath.Channel.from_kraus([V], 2, 3)
    assert is_mio_channel(embed) == ChannelVerdict.FREE
    assert is_mio_channel(qmath.unitary_channel(qmath.HADAMARD)) == ChannelVerdict.NOT_FREE


def test_separable_channel_test_is_one_sided(bell):
    m = SeparablePPTModel(2, 2)
    U = np.kron(qmath.HADAMARD, qmath.PAULI_X)
    assert m.is_rno_channel(qmath.unitary_channel(U, (2, 2)), samples=50) == ChannelVerdict.NOT_FALSIFIED
    make_bell = qmath.replacement_channel(bell, (2, 2))
    assert m.is_rno_channel(make_bell, samples=5) == ChannelVerdict.NOT_FREE
    with pytest.raises(InvalidShape):
        m.is_rno_channel(qmath.identity_channel(2))


def test_overlap_function_and_inverse():
    m = IncoherentModel(2)
    assert overlap_bound_c(m, 3) == pytest.approx(0.125)
    assert overlap_bound_inverse(m, 0.25) == pytest.approx(2.0)
    assert overlap_bound_c(m, 0) == 1.0
    with pytest.raises(InvalidRequest):
        overlap_bound_inverse(m, 0.0)


@pytest.mark.parametrize("model", [IncoherentModel(2), SeparablePPTModel(2, 2)])
def test_free_states_respect_overlap_bound(model, rng):
    for n in (1, 2):
        mn = model.power(n)
        phi = max_resource_state(model, n)
        for _ in range(20):
            rho = mn.sample_free_state(rng)
            assert np.real(np.trace(phi.matrix @ rho.matrix)) <= overlap_bound_c(model, n) + 1e-12


def test_pure_closed_forms(plus, bell):
    inc, sep = IncoherentModel(2), SeparablePPTModel(2, 2)
    np.testing.assert_allclose(inc.pure_coefficients(plus), [1 / math.sqrt(2)] * 2, atol=1e-12)
    assert inc.pure_robustness(plus) == pytest.approx(1.0)
    assert sep.pure_robustness(bell) == pytest.approx(1.0)
    assert sep.max_free_overlap(bell) == pytest.approx(0.5)


def test_most_overlapping_product_state(rng):
    m = SeparablePPTModel(2, 2)
    psi = qmath.random_pure_state((2, 2), rng)
    best = m.most_overlapping_free_state(psi, rng)
    overlap = np.real(np.trace(best.matrix @ psi.matrix))
    assert overlap == pytest.approx(m.max_free_overlap(psi), abs=1e-6)
    assert m.violation(best) <= 1e-12


def test_project_free_clears_violation(bell, plus):
    sep = SeparablePPTModel(2, 2)
    fixed = sep.project_free(bell)
    assert sep.is_free_state(fixed) == Verdict.FREE
    assert IncoherentModel(2).is_free_state(IncoherentModel(2).project_free(plus)) == Verdict.FREE


def test_sampled_free_channels_preserve_free_states(rng):
    inc = IncoherentModel(2)
    for _ in range(10):
        assert inc.is_rno_channel(inc.sample_free_channel(rng), 1e-9) == ChannelVerdict.FREE

    sep = SeparablePPTModel(2, 2)
    for _ in range(10):
        ch = sep.sample_free_channel(rng)
        out = qmath.apply_channel(ch, sep.sample_free_state(rng))
        assert sep.violation(qmath.DensityMatrix(out.matrix, sep.dims)) <= 1e-9


def test_all_bipartitions_check(bell, werner):
    m2 = SeparablePPTModel(2, 2).power(2)
    ok, worst = m2.ppt_all_bipartitions(bell.power(2))
    assert not ok and worst < 0
    ok, _ = m2.ppt_all_bipartitions(werner(0.2).power(2))
    assert ok


def test_model_from_descriptor():
    assert model_from_descriptor({"kind": "incoherent", "d": 3}) == IncoherentModel(3)
    sep = model_from_descriptor({"kind": "separable_ppt", "dims": [2, 3]})
    assert sep.dims == (2, 3)
    with pytest.raises(InvalidRequest):
        sep.local_d
    with pytest.raises(InvalidRequest):
        model_from_descriptor({"kind": "magic"})
