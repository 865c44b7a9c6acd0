import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from surfnoise.surface_code import (
    PauliString,
    SyndromeBatch,
    SyndromeRecord,
    build_rotated_layout,
    commutes,
    read_syndrome_file,
    syndrome_of_error,
    write_syndrome_file,
)


def pauli_strings(n):
    return st.lists(st.sampled_from("IXYZ"), min_size=n, max_size=n).map(
        lambda axes: PauliString(tuple((q, a) for q, a in enumerate(axes) if a != "I"))
    )


@pytest.mark.parametrize("rows,cols", [(5, 5), (3, 3), (2, 2), (3, 5), (4, 2)])
def test_counts(rows, cols):
    lay = build_rotated_layout(rows, cols)
    assert lay.qubit_count == rows * cols
    assert lay.n_generators == rows * cols - 1
    assert lay.distance == min(rows, cols)


def test_single_qubit_degenerate():
    lay = build_rotated_layout(1, 1)
    assert lay.qubit_count == 1 and lay.n_generators == 0


@pytest.mark.parametrize("bad", [(0, 3), (-1, 2), (2.5, 2)])
def test_rejects_bad_dimensions(bad):
    with pytest.raises(ValueError):
        build_rotated_layout(*bad)


def test_commutes_basic():
    assert not commutes(PauliString(((0, "X"),)), PauliString(((0, "Z"),)))
    assert commutes(PauliString(((0, "X"), (1, "X"))), PauliString(((0, "Z"), (1, "Z"))))


@pytest.mark.parametrize("rows,cols", [(2, 2), (3, 3), (5, 5), (3, 4), (4, 6)])
def test_layout_invariants(rows, cols):
    lay = build_rotated_layout(rows, cols)
    gens = [g.pauli for g in lay.generators]
    for a, b in itertools.combinations(gens, 2):
        assert commutes(a, b)
    assert not commutes(lay.logical_x, lay.logical_z)
    for g in lay.generators:
        assert g.pauli.weight in (2, 4)
        assert commutes(g.pauli, lay.logical_x) and commutes(g.pauli, lay.logical_z)
        rs, cs = zip(*(lay.position(q) for q in g.pauli.support))
        assert max(rs) - min(rs) <= 1 and max(cs) - min(cs) <= 1
        assert {a for _, a in g.pauli.terms} == {g.kind}
    # generators are independent over GF(2)
    hx, hz = lay.check_matrix
    assert np.linalg.matrix_rank(np.hstack([hx, hz]).astype(float)) == lay.n_generators


def test_canonical_order_is_row_major():
    lay = build_rotated_layout(5)
    coords = [g.coord for g in lay.generators]
    assert coords == sorted(coords)


def test_center_x_error_flips_adjacent_z_checks():
    lay = build_rotated_layout(3)
    center = lay.qubit(1, 1)
    s = syndrome_of_error(lay, PauliString(((center, "X"),)))
    flipped = {i for i, v in enumerate(s.outcomes) if v == -1}
    expected = {i for i, g in enumerate(lay.generators) if g.kind == "Z" and center in g.pauli.support}
    assert flipped == expected and len(expected) == 2


def test_identity_error_trivial():
    lay = build_rotated_layout(3)
    assert syndrome_of_error(lay, PauliString()).is_trivial


@given(pauli_strings(9), pauli_strings(9))
def test_syndrome_homomorphism(e1, e2):
    lay = build_rotated_layout(3)
    assert syndrome_of_error(lay, e1 * e2) == syndrome_of_error(lay, e1) * syndrome_of_error(lay, e2)


def _rank2(a):
    a = a.copy() % 2
    r = 0
    for c in range(a.shape[1]):
        piv = [i for i in range(r, a.shape[0]) if a[i, c]]
        if not piv:
            continue
        a[[r, piv[0]]] = a[[piv[0], r]]
        for i in range(a.shape[0]):
            if i != r and a[i, c]:
                a[i] ^= a[r]
        r += 1
    return r


def _in_span(rows, target):
    m = np.asarray(rows, dtype=np.uint8) % 2
    return _rank2(m) == _rank2(np.vstack([m, target]))


def test_undetectable_low_weight_errors_are_stabilizers():
    # weight <= 2 errors with trivial syndrome lie in the stabilizer group (d = 3 > 2)
    lay = build_rotated_layout(3)
    n = lay.qubit_count
    hx, hz = lay.check_matrix
    stab = np.hstack([hx, hz])
    for w in (1, 2):
        for qs in itertools.combinations(range(n), w):
            for axes in itertools.product("XYZ", repeat=w):
                e = PauliString(tuple(zip(qs, axes)))
                if syndrome_of_error(lay, e).is_trivial:
                    x, z = e.to_xz(n)
                    assert _in_span(stab, np.concatenate([x, z]))


def test_logicals_are_undetectable_but_not_stabilizers():
    lay = build_rotated_layout(3)
    n = lay.qubit_count
    hx, hz = lay.check_matrix
    stab = np.hstack([hx, hz])
    for op in (lay.logical_x, lay.logical_z, lay.logical_x * lay.logical_z):
        assert syndrome_of_error(lay, op).is_trivial
        x, z = op.to_xz(n)
        assert not _in_span(stab, np.concatenate([x, z]))


def test_syndrome_file_roundtrip(tmp_path):
    lay = build_rotated_layout(3)
    rng = np.random.default_rng(1)
    batch = SyndromeBatch(rng.choice([1, -1], size=(20, 8)).astype(np.int8))
    path = tmp_path / "s.txt"
    write_syndrome_file(path, batch, ["header"])
    text = path.read_text()
    assert text.startswith("# header\n")
    assert all(set(line.split()) <= {"+1", "-1"} for line in text.splitlines()[1:])
    back = read_syndrome_file(path, lay)
    assert np.array_equal(back.outcomes, batch.outcomes)


def test_syndrome_file_rejects_bad_tokens(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("+1 -1 0\n")
    with pytest.raises(ValueError):
        read_syndrome_file(p)


def test_batch_layout_mismatch():
    lay = build_rotated_layout(3)
    with pytest.raises(ValueError):
        SyndromeBatch(np.ones((2, 5), dtype=np.int8)).check_layout(lay)


def test_record_rejects_non_pm1():
    with pytest.raises(ValueError):
        SyndromeRecord(np.array([1, 0, -1]))


def test_unique_counts():
    b = SyndromeBatch(np.array([[1, -1], [1, -1], [-1, 1]], dtype=np.int8))
    u, c = b.unique_counts()
    assert c.sum() == 3 and len(u) == 2
