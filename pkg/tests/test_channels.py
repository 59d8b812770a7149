import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_density
from latticenoise.channels import (
    NAMED_KINDS,
    ChannelError,
    ChannelSpec,
    KrausSet,
    amplitude_damping,
    apply_channel,
    check_trace_preserving,
    feasibility,
    gram_matrix,
    load_channel_spec,
    standard_channel,
)
from latticenoise.pauli import SIGMA0, SIGMA3, bloch_from_density, density_from_bloch, su2_from_pauli


def test_phase_flip_operators():
    ops = standard_channel("phase_flip", 0.25).operators
    assert len(ops) == 2
    assert np.allclose(ops[0], np.sqrt(0.75) * SIGMA0)
    assert np.allclose(ops[1], 0.5 * SIGMA3)


def test_zero_p_is_identity():
    ops = standard_channel("depolarizing", 0).operators
    assert len(ops) == 1 and np.allclose(ops[0], SIGMA0)


@pytest.mark.parametrize("kind", NAMED_KINDS)
@pytest.mark.parametrize("p", [0, 0.125, 0.25, 0.5, 1])
def test_named_channels_are_tp_and_unital(kind, p, rng):
    k = standard_channel(kind, p)
    check = check_trace_preserving(k)
    assert check.tp and check.unital
    for _ in range(100):
        out = apply_channel(k, random_density(rng))
        assert abs(np.trace(out) - 1) < 1e-12
        assert np.linalg.eigvalsh(out).min() > -1e-12
    assert np.allclose(apply_channel(k, SIGMA0 / 2), SIGMA0 / 2)


def test_bit_flip_half_sums_to_identity():
    ops = standard_channel("bit_flip", 0.5).operators
    # sqrt(1/2)**2 rounds to 1/2 + 1 ulp
    assert np.abs(sum(a.conj().T @ a for a in ops) - SIGMA0).max() <= 1e-15


def test_amplitude_damping_is_tp_not_unital():
    check = check_trace_preserving(amplitude_damping(0.5))
    assert check.tp and not check.unital
    assert not check_trace_preserving(KrausSet((SIGMA0 / 2,))).tp


def test_non_tp_set_is_refused():
    with pytest.raises(ChannelError):
        apply_channel(KrausSet((SIGMA0 / 2,)), SIGMA0 / 2)


def _bloch_map(kind, p, s):
    # independent oracle: Pauli channels scale the Bloch components
    flips = {"bit_flip": 0, "bit_phase_flip": 1, "phase_flip": 2}
    s = np.array(s, float)
    if kind == "depolarizing":
        return (1 - 4 * p / 3) * s
    keep = flips[kind]
    return np.where(np.arange(3) == keep, s, (1 - 2 * p) * s)


@given(
    st.sampled_from(NAMED_KINDS),
    st.floats(0, 1),
    st.tuples(*[st.floats(-0.57, 0.57)] * 3),
)
def test_bloch_scaling_oracle(kind, p, s):
    out = apply_channel(standard_channel(kind, p), density_from_bloch(s))
    assert np.allclose(bloch_from_density(out), _bloch_map(kind, p, s), atol=1e-12)


def test_phase_flip_quarter_on_h():
    out = apply_channel(standard_channel("phase_flip", 0.25), density_from_bloch([1, 0, 0]))
    assert np.allclose(bloch_from_density(out), [0.5, 0, 0])


def test_depolarizing_half_scales_by_third(rng):
    rho = random_density(rng, pure=True)
    out = apply_channel(standard_channel("depolarizing", 0.5), rho)
    assert np.allclose(bloch_from_density(out), bloch_from_density(rho) / 3)


def test_gram_values():
    assert np.allclose(gram_matrix(standard_channel("bit_flip", 0.25)), np.diag([0.75, 0.25, 0, 0]))
    assert np.allclose(
        gram_matrix(standard_channel("depolarizing", 0.5)), np.diag([0.5, 1 / 6, 1 / 6, 1 / 6])
    )


def test_single_unitary_gram_is_rank_one(rng):
    v = rng.standard_normal(4)
    v /= np.linalg.norm(v)
    g = gram_matrix(KrausSet((su2_from_pauli(v),)))
    assert np.linalg.matrix_rank(g, tol=1e-12) == 1
    assert np.trace(g).real == pytest.approx(1)


@given(st.integers(0, 2**32 - 1), st.sampled_from(NAMED_KINDS), st.floats(0.01, 1))
def test_gram_invariant_under_isometric_remixing(seed, kind, p):
    rng = np.random.default_rng(seed)
    ops = np.stack(standard_channel(kind, p).operators)
    m = len(ops) + 2
    z = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
    v = np.linalg.qr(z)[0][:, : len(ops)]
    mixed = np.einsum("ab,bij->aij", v, ops)
    g0 = gram_matrix(KrausSet(tuple(ops)))
    g1 = gram_matrix(KrausSet(tuple(mixed)))
    assert np.abs(g0 - g1).max() < 1e-10
    assert abs(np.trace(g1) - 1) < 1e-10


@given(st.integers(0, 2**32 - 1), st.integers(1, 6))
def test_mixtures_of_unitaries_are_feasible(seed, r):
    rng = np.random.default_rng(seed)
    w = rng.dirichlet(np.ones(r))
    vs = rng.standard_normal((r, 4))
    vs /= np.linalg.norm(vs, axis=1, keepdims=True)
    k = KrausSet(tuple(np.sqrt(wi) * su2_from_pauli(v) for wi, v in zip(w, vs)))
    assert feasibility(gram_matrix(k)).feasible


def test_feasibility_verdicts():
    assert feasibility(gram_matrix(standard_channel("bit_flip", 0.25)))
    assert feasibility(np.diag([1.0, 0, 0, 0]))
    bad = feasibility(gram_matrix(amplitude_damping(0.5)))
    assert not bad
    assert bad.entry == (0, 3)
    assert bad.magnitude == pytest.approx(0.125)
    assert "M[0,3]" in bad.describe()


def test_feasibility_other_failures():
    assert "positive" in feasibility(np.diag([1.5, -0.5, 0, 0])).reason
    assert "trace" in feasibility(np.diag([0.5, 0, 0, 0])).reason
    m = np.zeros((4, 4))
    m[0, 0], m[0, 1] = 1, 0.1
    assert "Hermitian" in feasibility(m).reason


def test_spec_json_round_trip(tmp_path):
    named = ChannelSpec("phase-flip", p=0.25)
    assert named.kind == "phase_flip"
    assert ChannelSpec.from_json(named.to_json()) == named
    custom = ChannelSpec("custom", custom_kraus=amplitude_damping(0.3))
    path = tmp_path / "c.json"
    path.write_text(json.dumps(custom.to_json()))
    back = load_channel_spec(path)
    assert np.allclose(np.stack(back.kraus().operators), np.stack(custom.kraus().operators))


@pytest.mark.parametrize(
    "obj",
    [{}, {"kind": "nope", "p": 0.1}, {"kind": "bit_flip"}, {"kind": "custom"},
     {"kind": "custom", "kraus": [[[1, 0]]]}],
)
def test_bad_specs_rejected(obj):
    with pytest.raises(ChannelError):
        ChannelSpec.from_json(obj)


def test_p_out_of_range():
    with pytest.raises(ChannelError):
        standard_channel("bit_flip", 1.5)
