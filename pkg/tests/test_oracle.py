import numpy as np
import pytest
from hypothesis import given, strategies as st

from surfnoise import oracle
from surfnoise.noise_models import NoiseModel
from surfnoise.surface_code import PauliString, build_rotated_layout

LAY3 = build_rotated_layout(3)


@given(gamma=st.floats(0.0, 1.0), seed=st.integers(0, 255))
def test_expansion_matches_dense(gamma, seed):
    nm = NoiseModel.uniform("ad", 9, gamma)
    m = oracle.all_syndromes(8)[seed]
    a = oracle.oracle_likelihood(LAY3, m, nm)
    b = oracle.oracle_likelihood_expansion(LAY3, m, nm)
    assert abs(a - b) <= 1e-10


@pytest.mark.parametrize("rows,cols", [(2, 2), (2, 3), (3, 2)])
def test_small_layouts_normalized(rows, cols):
    lay = build_rotated_layout(rows, cols)
    nm = NoiseModel.uniform("gad", lay.qubit_count, 0.3, 0.4)
    tot = sum(oracle.oracle_likelihood(lay, m, nm) for m in oracle.all_syndromes(lay.n_generators))
    assert tot == pytest.approx(1.0, abs=1e-12)


def test_pauli_matrix_matches_kron():
    x = np.array([[0, 1], [1, 0]])
    z = np.diag([1, -1])
    y = np.array([[0, -1j], [1j, 0]])
    p = PauliString(((0, "X"), (1, "Y"), (2, "Z")))
    assert np.allclose(oracle.pauli_matrix(p, 3), np.kron(np.kron(x, y), z))


def test_logical_basis_orthonormal_and_stabilized():
    zero, one = oracle.logical_basis(LAY3)
    assert abs(np.vdot(zero, one)) < 1e-12
    assert np.vdot(zero, zero) == pytest.approx(1.0)
    zl = oracle.pauli_matrix(LAY3.logical_z, 9)
    xl = oracle.pauli_matrix(LAY3.logical_x, 9)
    assert np.allclose(zl @ zero, zero) and np.allclose(zl @ one, -one)
    assert np.allclose(xl @ zero, one)


def test_size_caps():
    big = build_rotated_layout(4)
    nm = NoiseModel.uniform("ad", 16, 0.1)
    with pytest.raises(ValueError, match="limited"):
        oracle.oracle_likelihood(big, np.ones(big.n_generators), nm)
    with pytest.raises(ValueError, match="limited"):
        oracle.oracle_conditional_choi(big, np.ones(big.n_generators), nm)


def test_entangled_state_has_no_likelihood():
    nm = NoiseModel.uniform("ad", 9, 0.1)
    with pytest.raises(ValueError):
        oracle.oracle_likelihood(LAY3, np.ones(8), nm, "entangled_ref")


def test_batched_oracles_match_single_calls():
    nm = NoiseModel.uniform("gad", 9, 0.3, 0.6)
    rows = oracle.all_syndromes(8)[::17]
    single = [oracle.oracle_likelihood(LAY3, m, nm, "zero_L") for m in rows]
    assert np.allclose(oracle.oracle_likelihoods(LAY3, rows, nm, "zero_L"), single, rtol=1e-13, atol=0)
    assert np.allclose(oracle.oracle_likelihoods_expansion(LAY3, rows, nm, "zero_L"), single,
                       rtol=1e-10, atol=1e-16)
