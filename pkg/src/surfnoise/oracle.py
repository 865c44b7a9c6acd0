"""Brute-force reference computations on full density matrices.

Everything here works on explicit ``2^n x 2^n`` matrices (qubit 0 is the most
significant bit of a basis index) and is deliberately independent of the
tensor-network engine.  Pauli strings act through a permutation and a phase,
which keeps projector products cheap without building Kronecker products.
"""

from __future__ import annotations

import numpy as np

from .noise_models import NoiseModel
from .surface_code import PauliString, SurfaceCodeLayout, SyndromeRecord

__all__ = [
    "MAX_QUBITS",
    "MAX_CHOI_QUBITS",
    "DenseState",
    "pauli_action",
    "pauli_matrix",
    "logical_basis",
    "encoded_state",
    "apply_channel",
    "oracle_likelihood",
    "oracle_likelihood_expansion",
    "oracle_likelihoods",
    "oracle_likelihoods_expansion",
    "oracle_conditional_choi",
    "all_syndromes",
]

MAX_QUBITS = 12
MAX_CHOI_QUBITS = 10


def _check_size(n: int, cap: int) -> None:
    if n > cap:
        raise ValueError(f"dense oracle limited to {cap} qubits, layout has {n}")


def pauli_action(p: PauliString, n: int) -> tuple[np.ndarray, np.ndarray]:
    """``(target, phase)`` with ``P|x> = phase[x] |target[x]>``."""
    xbits, zbits = p.to_xz(n)
    weights = 1 << np.arange(n - 1, -1, -1)
    xm = int(np.dot(xbits, weights))
    zm = int(np.dot(zbits, weights))
    n_y = int(np.sum(xbits & zbits))
    x = np.arange(2**n)
    parity = np.zeros(2**n, dtype=np.int64)
    v = x & zm
    while np.any(v):
        parity ^= v & 1
        v >>= 1
    phase = (1j) ** n_y * (1 - 2 * parity)
    return x ^ xm, phase


def pauli_matrix(p: PauliString, n: int) -> np.ndarray:
    tgt, ph = pauli_action(p, n)
    m = np.zeros((2**n, 2**n), dtype=complex)
    m[tgt, np.arange(2**n)] = ph
    return m


def _left(p_action, rho):
    tgt, ph = p_action
    out = np.empty_like(rho)
    out[tgt] = ph[:, None] * rho
    return out


def _projector_apply(layout, rho, outcomes):
    """``Pi_m rho`` with ``Pi_m = prod_i (1 + m_i g_i) / 2``."""
    n = layout.qubit_count
    for g, m in zip(layout.generators, outcomes):
        rho = 0.5 * (rho + m * _left(pauli_action(g.pauli, n), rho))
    return rho


class DenseState:
    """Density matrix on ``n`` qubits with validity checks."""

    def __init__(self, rho: np.ndarray, n: int):
        self.rho = np.asarray(rho, dtype=complex)
        self.n = n
        if self.rho.shape != (2**n, 2**n):
            raise ValueError("density matrix has the wrong shape")

    def check(self) -> None:
        r = self.rho
        if np.max(np.abs(r - r.conj().T)) > 1e-12:
            raise ValueError("not Hermitian")
        if abs(np.trace(r) - 1) > 1e-12:
            raise ValueError("trace is not 1")
        if np.linalg.eigvalsh(r).min() < -1e-10:
            raise ValueError("not positive semidefinite")


def logical_basis(layout: SurfaceCodeLayout) -> tuple[np.ndarray, np.ndarray]:
    """``|0_L>`` proportional to the code projection of ``|0...0>``, and ``|1_L> = X_L |0_L>``."""
    n = layout.qubit_count
    _check_size(n, MAX_QUBITS)
    psi = np.zeros(2**n, dtype=complex)
    psi[0] = 1.0
    for g in layout.generators:
        tgt, ph = pauli_action(g.pauli, n)
        moved = np.empty_like(psi)
        moved[tgt] = ph * psi
        psi = 0.5 * (psi + moved)
    psi /= np.linalg.norm(psi)
    tgt, ph = pauli_action(layout.logical_x, n)
    one = np.empty_like(psi)
    one[tgt] = ph * psi
    return psi, one


def encoded_state(layout: SurfaceCodeLayout, kind: str = "mixed_L") -> np.ndarray:
    """Dense initial state; ``entangled_ref`` appends one reference qubit as the last tensor factor."""
    zero, one = logical_basis(layout)
    if kind == "mixed_L":
        return 0.5 * (np.outer(zero, zero.conj()) + np.outer(one, one.conj()))
    if kind == "zero_L":
        return np.outer(zero, zero.conj())
    if kind == "plus_L":
        plus = (zero + one) / np.sqrt(2)
        return np.outer(plus, plus.conj())
    if kind == "entangled_ref":
        _check_size(layout.qubit_count, MAX_CHOI_QUBITS)
        psi = (np.kron(zero, [1, 0]) + np.kron(one, [0, 1])) / np.sqrt(2)
        return np.outer(psi, psi.conj())
    raise ValueError(f"unknown logical state kind {kind!r}")


def apply_channel(rho: np.ndarray, kraus_per_qubit: np.ndarray, n_total: int) -> np.ndarray:
    """Apply ``kraus_per_qubit[q]`` (shape ``(K, 2, 2)``) to qubit ``q`` for every listed qubit."""
    t = rho.reshape((2,) * (2 * n_total))
    for q, ops in enumerate(kraus_per_qubit):
        acc = 0
        for k in ops:
            a = np.tensordot(k, t, axes=([1], [q]))
            a = np.moveaxis(a, 0, q)
            a = np.tensordot(a, k.conj(), axes=([n_total + q], [1]))
            a = np.moveaxis(a, -1, n_total + q)
            acc = acc + a
        t = acc
    return t.reshape(2**n_total, 2**n_total)


def _outcomes(m) -> np.ndarray:
    if isinstance(m, SyndromeRecord):
        return m.outcomes.astype(float)
    return np.asarray(m, dtype=float).reshape(-1)


def _noisy(layout, nm, kind):
    n = layout.qubit_count
    _check_size(n, MAX_QUBITS)
    rho = encoded_state(layout, kind)
    return apply_channel(rho, nm.kraus(), n)


def oracle_likelihood(layout: SurfaceCodeLayout, m, nm: NoiseModel, kind: str = "mixed_L") -> float:
    """``Tr(Pi_m E(rho_0))`` with every operator held as a dense matrix."""
    return float(oracle_likelihoods(layout, [_outcomes(m)], nm, kind)[0])


def oracle_likelihoods(layout: SurfaceCodeLayout, rows, nm: NoiseModel, kind: str = "mixed_L") -> np.ndarray:
    """:func:`oracle_likelihood` for each outcome row, building the noisy state once."""
    if kind == "entangled_ref":
        raise ValueError("likelihoods are defined for normalized code states")
    rho = _noisy(layout, nm, kind)
    return np.array([np.real(np.trace(_projector_apply(layout, rho, _outcomes(m)))) for m in rows])


def oracle_likelihood_expansion(layout: SurfaceCodeLayout, m, nm: NoiseModel,
                                kind: str = "mixed_L") -> float:
    """Stabilizer-group expansion ``2^-(n-1) sum_S f(m, S) Tr(S E(rho_0))``.

    ``S`` runs over all products of generators (phases included) and
    ``f(m, S)`` is the product of the outcomes of the generators in ``S``.
    """
    return float(oracle_likelihoods_expansion(layout, [_outcomes(m)], nm, kind)[0])


def oracle_likelihoods_expansion(layout: SurfaceCodeLayout, rows, nm: NoiseModel,
                                 kind: str = "mixed_L") -> np.ndarray:
    """:func:`oracle_likelihood_expansion` for each outcome row.

    The traces ``Tr(S E(rho_0))`` do not depend on the outcomes, so they are
    computed once; each row then only needs the sign pattern ``f(m, S)``.
    """
    n = layout.qubit_count
    g_count = layout.n_generators
    rho = _noisy(layout, nm, kind)
    actions = [pauli_action(g.pauli, n) for g in layout.generators]
    idx = np.arange(2**n)
    traces = np.empty(2**g_count)
    members = np.zeros((2**g_count, g_count), dtype=bool)
    # Walk the group in Gray-code order so each element is one generator away from the last.
    tgt = idx.copy()
    ph = np.ones(2**n, dtype=complex)
    traces[0] = np.real(np.sum(rho[idx, tgt]))  # identity term: Tr(rho)
    prev = 0
    in_s = np.zeros(g_count, dtype=bool)
    for k in range(1, 2**g_count):
        gray = k ^ (k >> 1)
        i = (gray ^ prev).bit_length() - 1
        prev = gray
        gt, gp = actions[i]
        # S <- g_i S; generators commute and square to one, so toggling works
        ph = ph * gp[tgt]
        tgt = gt[tgt]
        in_s[i] = not in_s[i]
        members[k] = in_s
        # Tr(S rho) = sum_y phase[y] rho[y, target[y]]
        traces[k] = np.real(np.sum(ph * rho[idx, tgt]))
    out = []
    for m in rows:
        flips = _outcomes(m) < 0
        f = np.where(np.count_nonzero(members & flips, axis=1) % 2, -1.0, 1.0)
        out.append(f @ traces / 2**g_count)
    return np.array(out)


def oracle_conditional_choi(layout: SurfaceCodeLayout, m, nm: NoiseModel,
                            pure_error: PauliString | None = None) -> np.ndarray:
    """``K_m`` on (logical, reference): apply the noise to the code qubits of the
    purified state, project onto syndrome ``m``, apply ``pure_error`` and read
    off matrix elements in the ``{|0_L>, |1_L>}`` basis."""
    n = layout.qubit_count
    _check_size(n, MAX_CHOI_QUBITS)
    rho = encoded_state(layout, "entangled_ref")
    rho = apply_channel(rho, list(nm.kraus()) + [np.eye(2)[None]], n + 1)
    ext = _extend_layout_ops(layout, m)
    for act, s in ext:
        rho = 0.5 * (rho + s * _left(act, rho))
    if pure_error is not None and pure_error.weight:
        act = pauli_action(PauliString(pure_error.terms), n + 1)
        rho = _left(act, rho)
        rho = np.conj(_left(act, np.conj(rho.T))).T  # rho -> P rho P^dagger
    zero, one = logical_basis(layout)
    basis = np.stack([np.kron(v, e) for v in (zero, one) for e in np.eye(2)], axis=1)
    return basis.conj().T @ rho @ basis


def _extend_layout_ops(layout, m):
    n = layout.qubit_count
    out = []
    for g, s in zip(layout.generators, _outcomes(m)):
        out.append((pauli_action(g.pauli, n + 1), s))
    return out


def all_syndromes(n_generators: int) -> np.ndarray:
    """Every +-1 outcome vector, shape ``(2^G, G)``."""
    idx = np.arange(2**n_generators)
    bits = (idx[:, None] >> np.arange(n_generators - 1, -1, -1)[None, :]) & 1
    return (1 - 2 * bits).astype(np.int8)
