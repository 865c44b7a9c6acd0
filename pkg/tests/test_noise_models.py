import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from surfnoise.noise_models import (
    CHANNEL_PARAMS,
    NoiseFamily,
    NoiseModel,
    NoiseSchedule,
    ParameterDomain,
    TimeVaryingNoise,
    ad_plus_dephase,
    amplitude_damping,
    cptp_residual,
    generalized_amplitude_damping,
    identity_channel,
    make_channel,
    pauli_channel,
    pauli_traces,
    phase_damping,
    schedule_eval,
    systematic_rotation,
    to_superoperator,
)

X = np.array([[0, 1], [1, 0]], dtype=complex)
Z = np.diag([1.0, -1.0]).astype(complex)


def random_rho(rng):
    a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    r = a @ a.conj().T
    return r / np.trace(r)


unit = st.floats(0.0, 1.0)


def in_domain(kind):
    if kind == "systematic_rotation":
        return st.tuples(st.floats(-10, 10))
    if kind == "pauli":
        return st.tuples(unit, unit, unit).filter(lambda v: sum(v) <= 1)
    return st.tuples(*[unit] * len(CHANNEL_PARAMS[kind]))


@pytest.mark.parametrize("kind", sorted(CHANNEL_PARAMS))
@given(data=st.data())
def test_constructors_cptp(kind, data):
    vals = data.draw(in_domain(kind))
    ch = make_channel(kind, *vals)
    assert cptp_residual(ch.kraus_ops) <= 1e-10


def test_amplitude_damping_examples():
    rng = np.random.default_rng(0)
    rho = random_rho(rng)
    assert np.allclose(amplitude_damping(0).apply(rho), rho, atol=1e-12)
    one = np.diag([0.0, 1.0])
    assert np.allclose(amplitude_damping(1).apply(one), np.diag([1.0, 0.0]))
    assert cptp_residual(amplitude_damping(0.15).kraus_ops) <= 1e-12


@pytest.mark.parametrize("bad", [-0.1, 1.5])
def test_domain_violations(bad):
    with pytest.raises(ValueError):
        amplitude_damping(bad)
    with pytest.raises(ValueError):
        phase_damping(bad)
    with pytest.raises(ValueError):
        generalized_amplitude_damping(0.1, bad)
    with pytest.raises(ValueError):
        pauli_channel(0.5, 0.6, 0.0)


def test_phase_damping_examples():
    rng = np.random.default_rng(1)
    rho = random_rho(rng)
    assert np.allclose(phase_damping(0).apply(rho), rho)
    out = phase_damping(0.37).apply(rho)
    assert np.allclose(np.diag(out), np.diag(rho))
    half = np.array([[0.5, 0.5], [0.5, 0.5]])
    assert phase_damping(0.19).apply(half)[0, 1] == pytest.approx(0.5 * 0.9, abs=1e-12)


def test_systematic_rotation_examples():
    rng = np.random.default_rng(2)
    rho = random_rho(rng)
    assert np.allclose(systematic_rotation(0).apply(rho), rho)
    assert np.allclose(systematic_rotation(math.pi).apply(rho), rho, atol=1e-12)
    u = np.diag([np.exp(-0.3j), np.exp(0.3j)])
    assert np.allclose(systematic_rotation(0.3).apply(rho), u @ rho @ u.conj().T)


def test_gad_limits():
    ad = to_superoperator(amplitude_damping(0.3))
    assert np.allclose(to_superoperator(generalized_amplitude_damping(0.3, 1.0)), ad, atol=1e-12)
    assert np.allclose(to_superoperator(generalized_amplitude_damping(0.0, 0.4)), np.eye(4))
    assert cptp_residual(generalized_amplitude_damping(0.1, 0.9).kraus_ops) <= 1e-12


def test_ad_plus_dephase_limits_and_matrix():
    assert np.allclose(to_superoperator(ad_plus_dephase(0.0, 0.3)),
                       to_superoperator(phase_damping(0.3)), atol=1e-12)
    assert np.allclose(to_superoperator(ad_plus_dephase(0.4, 0.0)),
                       to_superoperator(amplitude_damping(0.4)), atol=1e-12)
    g, p = 0.3, 0.2
    rho = random_rho(np.random.default_rng(3))
    out = ad_plus_dephase(g, p).apply(rho)
    assert out[0, 0] == pytest.approx(rho[0, 0] + g * rho[1, 1])
    assert out[1, 1] == pytest.approx(rho[1, 1] * (1 - g))
    assert out[0, 1] == pytest.approx(rho[0, 1] * math.sqrt(1 - g) * math.sqrt(1 - p))
    composed = phase_damping(p).compose(amplitude_damping(g))
    assert np.allclose(to_superoperator(composed), to_superoperator(ad_plus_dephase(g, p)))


def test_pauli_channel_examples():
    assert np.allclose(to_superoperator(pauli_channel(0, 0, 0)), np.eye(4))
    ch = pauli_channel(0.1, 0, 0)
    # Pauli transfer: X kept, Z scaled by 1 - 2 px
    assert np.allclose(ch.apply(X), X)
    assert np.allclose(ch.apply(Z), 0.8 * Z)


def test_superoperator_identity_and_decay():
    assert np.allclose(to_superoperator(identity_channel()), np.eye(4))
    s = to_superoperator(amplitude_damping(1.0))
    assert np.allclose(s @ np.diag([0, 1.0]).reshape(-1), np.diag([1.0, 0]).reshape(-1))


@pytest.mark.parametrize("kind", sorted(CHANNEL_PARAMS))
@given(data=st.data())
def test_superoperator_matches_kraus(kind, data):
    ch = make_channel(kind, *data.draw(in_domain(kind)))
    s = to_superoperator(ch)
    rng = np.random.default_rng(data.draw(st.integers(0, 1000)))
    for _ in range(5):
        rho = random_rho(rng)
        assert np.allclose(s @ rho.reshape(-1), ch.apply(rho).reshape(-1), atol=1e-12)
    # trace preservation: vec(I) is a left fixed point
    assert np.allclose(np.eye(2).reshape(-1) @ s, np.eye(2).reshape(-1), atol=1e-12)


@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
def test_composition_superoperator_product(g, p, q):
    a, b = amplitude_damping(g), phase_damping(p)
    assert np.allclose(to_superoperator(b.compose(a)), to_superoperator(b) @ to_superoperator(a),
                       atol=1e-12)
    c = generalized_amplitude_damping(g, q)
    assert np.allclose(to_superoperator(c.compose(b)), to_superoperator(c) @ to_superoperator(b),
                       atol=1e-12)


def test_pauli_traces_examples():
    plus = np.full((2, 2), 0.5)
    g, p = 0.3, 0.2
    px, _, _ = pauli_traces(ad_plus_dephase(g, p), plus)
    assert px == pytest.approx(math.sqrt(1 - g) * math.sqrt(1 - p), abs=1e-12)
    assert np.allclose(pauli_traces(identity_channel(), np.eye(2) / 2), 0)


@pytest.mark.parametrize("gamma,p", [(0.1, 0.9), (0.3, 0.5), (0.7, 0.2)])
def test_gad_transverse_traces_independent_of_p(gamma, p):
    rho = random_rho(np.random.default_rng(4))
    for h in (1e-4, 1e-5):
        lo = pauli_traces(generalized_amplitude_damping(gamma, p - h), rho)
        hi = pauli_traces(generalized_amplitude_damping(gamma, p + h), rho)
        assert abs(hi[0] - lo[0]) / (2 * h) <= 1e-9
        assert abs(hi[1] - lo[1]) / (2 * h) <= 1e-9
        # the longitudinal trace does carry p
        assert abs(hi[2] - lo[2]) / (2 * h) > 1e-3


def test_family_packing():
    fam = NoiseFamily("gad", 4, uniform=False)
    assert fam.param_names[:4] == ("gamma[0]", "p[0]", "gamma[1]", "p[1]")
    rng = np.random.default_rng(5)
    alpha = rng.random(fam.dim)
    assert np.allclose(fam.pack(fam.per_qubit(alpha)), alpha)
    uni = NoiseFamily("gad", 4, fixed={"p": 0.9})
    assert uni.param_names == ("gamma",)
    full = uni.per_qubit(np.array([0.2]))
    assert np.allclose(full, [[0.2, 0.9]] * 4)


@given(st.lists(st.floats(0, 0.5), min_size=9, max_size=9))
def test_pack_unpack_roundtrip(vals):
    fam = NoiseFamily("ad", 9, uniform=False)
    a = np.array(vals)
    assert np.array_equal(fam.pack(fam.per_qubit(a)), a)


def test_model_channel_for_qubit():
    fam = NoiseFamily("ad", 3, uniform=False)
    nm = fam.model([0.1, 0.2, 0.3])
    assert nm.channel_for_qubit(2).params == (0.3,)
    with pytest.raises(ValueError):
        fam.model([0.1, 2.0, 0.3])


def test_default_domains():
    assert np.allclose(NoiseFamily("ad", 1).default_domain().upper, [0.5])
    sr = NoiseFamily("sr", 1).default_domain()
    assert sr.upper[0] == pytest.approx(math.pi / 4)
    gad = NoiseFamily("gad", 1).default_domain()
    assert np.allclose(gad.lower, 0) and np.allclose(gad.upper, 1)
    with pytest.raises(ValueError):
        ParameterDomain(("a",), np.array([0.5]), np.array([0.5]))


def test_schedule_examples():
    sine = NoiseSchedule("sine", 0.15, 1.1, 1e-4)
    assert schedule_eval(sine, 0) == pytest.approx(0.165)
    line = NoiseSchedule("line", 0.2, 1e-5)
    assert schedule_eval(line, 10**4) == pytest.approx(0.3)
    nu = NoiseSchedule.linear_ramp_offsets("constant", 9, 0.05)
    vals = schedule_eval(nu, 0)
    assert vals[0] == pytest.approx(0.05)
    # gamma_ij = 0.05 (3 i + j + 1) on a 3-column grid
    assert vals[3 * 2 + 1] == pytest.approx(0.05 * (3 * 2 + 1 + 1))


def test_schedule_domain_violation():
    with pytest.raises(ValueError):
        schedule_eval(NoiseSchedule("line", 0.9, 1e-3), 1000)
    with pytest.raises(ValueError):
        schedule_eval(NoiseSchedule("line", 0.2, 0.0), -1)


def test_time_varying_alpha():
    fam = NoiseFamily("ad", 9)
    tv = TimeVaryingNoise(fam, {"gamma": NoiseSchedule("line", 0.2, 1e-5)})
    a = tv.alpha(np.array([0, 10000]))
    assert a.shape == (2, 1) and np.allclose(a[:, 0], [0.2, 0.3])
    nfam = NoiseFamily("ad", 9, uniform=False)
    tvn = TimeVaryingNoise(nfam, {"gamma": NoiseSchedule.linear_ramp_offsets("line", 9, 0.02, 1e-6)})
    assert tvn.alpha(0).shape == (9,)
    with pytest.raises(ValueError):
        TimeVaryingNoise(NoiseFamily("gad", 9), {"gamma": NoiseSchedule("constant", 0.1)})


def test_uniform_model_constructor():
    nm = NoiseModel.uniform("ad_plus_dephase", 9, 0.3, 0.1)
    assert np.allclose(nm.alpha, [0.3, 0.1])
    assert nm.kraus().shape[:2] == (9, 4)
