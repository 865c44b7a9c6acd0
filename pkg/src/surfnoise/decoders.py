"""Logical recovery and channel-distance metrics.

A recovery is a pure error (a fixed Pauli with the observed syndrome) followed
by a logical Pauli.  The maximum-likelihood decoder picks the logical Pauli
that maximizes the entanglement fidelity of the syndrome-conditioned logical
Choi block; the matching decoder uses only the syndrome graph.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Protocol

import networkx as nx
import numpy as np
import scipy.optimize

from .likelihood import choi_from_coefficients, get_evaluator
from .noise_models import NoiseModel, kraus_batch
from .surface_code import PauliString, SurfaceCodeLayout, SyndromeRecord, commutes, syndrome_of_error

__all__ = [
    "LOGICALS",
    "RecoveryChoice",
    "LogicalChannelEstimate",
    "pure_error_lookup",
    "logical_frame_signs",
    "corrected_chois",
    "ml_logical_recovery",
    "mwpm_correction",
    "mwpm_recovery",
    "MLDecoder",
    "MWPMDecoder",
    "estimate_process_choi",
    "diamond_distance_to_identity",
    "bell_state_choi",
    "pauli_twirl",
    "MWPM_DEFECT_CAP",
]

LOGICALS = ("I", "X", "Z", "Y")  # also the tie-break order
MWPM_DEFECT_CAP = 10

_P1 = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def bell_state_choi() -> np.ndarray:
    """``|Omega><Omega|`` with ``|Omega> = (|00> + |11>)/sqrt(2)``."""
    v = np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2)
    return np.outer(v, v.conj())


@dataclass(frozen=True)
class RecoveryChoice:
    pure_error: PauliString
    logical: str = "I"

    def operator(self, layout: SurfaceCodeLayout) -> PauliString:
        """Full recovery Pauli (up to phase): logical representative times pure error."""
        op = self.pure_error
        if self.logical in ("X", "Y"):
            op = op * layout.logical_x
        if self.logical in ("Z", "Y"):
            op = op * layout.logical_z
        return op


# -- pure errors ----------------------------------------------------------------


def _gf2_solve(a: np.ndarray, b: np.ndarray) -> np.ndarray | None:
    """One solution of ``a x = b`` over GF(2) (free variables set to 0), or None."""
    a = a.copy() % 2
    b = b.copy() % 2
    rows, cols = a.shape
    pivots = []
    r = 0
    for c in range(cols):
        hit = np.nonzero(a[r:, c])[0]
        if len(hit) == 0:
            continue
        p = r + hit[0]
        a[[r, p]] = a[[p, r]]
        b[[r, p]] = b[[p, r]]
        for k in range(rows):
            if k != r and a[k, c]:
                a[k] ^= a[r]
                b[k] ^= b[r]
        pivots.append(c)
        r += 1
        if r == rows:
            break
    if np.any(b[r:]):
        return None
    x = np.zeros(cols, dtype=np.uint8)
    for i, c in enumerate(pivots):
        x[c] = b[i]
    return x


@lru_cache(maxsize=32)
def _destabilizers(rows: int, cols: int) -> tuple[PauliString, ...]:
    from .surface_code import build_rotated_layout

    layout = build_rotated_layout(rows, cols)
    out = []
    for i, g in enumerate(layout.generators):
        target = np.zeros(layout.n_generators, dtype=np.int8)
        target[i] = 1
        # X chains flip Z checks and vice versa.
        axis = "Z" if g.kind == "X" else "X"
        best = None
        for q in sorted(g.support):
            r0, c0 = layout.position(q)
            for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                chain = []
                r, c = r0, c0
                while 0 <= r < rows and 0 <= c < cols:
                    chain.append(layout.qubit(r, c))
                    r += dr
                    c += dc
                cand = PauliString(tuple((k, axis) for k in chain))
                flips = (1 - syndrome_of_error(layout, cand).outcomes) // 2
                if np.array_equal(flips, target) and (best is None or cand.weight < best.weight):
                    best = cand
        if best is None:
            hx, hz = layout.check_matrix
            h = hx if axis == "Z" else hz
            x = _gf2_solve(h.astype(np.uint8), target.astype(np.uint8))
            if x is None:
                raise RuntimeError(f"no destabilizer for generator {i}")
            best = PauliString(tuple((int(k), axis) for k in np.nonzero(x)[0]))
        out.append(best)
    return tuple(out)


def pure_error_lookup(layout: SurfaceCodeLayout, m) -> PauliString:
    """Deterministic Pauli with syndrome ``m``.

    Each flipped generator contributes a fixed straight chain running from one
    of its qubits to the lattice edge that flips that generator alone; the
    pure error is the product of those chains, so the map is a homomorphism.
    """
    out = m.outcomes if isinstance(m, SyndromeRecord) else np.asarray(m).reshape(-1)
    if len(out) != layout.n_generators:
        raise ValueError("syndrome length does not match the layout")
    destab = _destabilizers(layout.rows, layout.cols)
    n = layout.qubit_count
    x = np.zeros(n, dtype=np.uint8)
    z = np.zeros(n, dtype=np.uint8)
    for i in np.nonzero(out == -1)[0]:
        dx, dz = destab[i].to_xz(n)
        x ^= dx
        z ^= dz
    return PauliString.from_xz(x, z)


def logical_frame_signs(layout: SurfaceCodeLayout, error: PauliString) -> np.ndarray:
    """``e_a`` with ``E^dagger L_a E = e_a L_a`` for ``L_a in (I, Z_L, X_L, X_L Z_L)``."""
    sz = 1 if commutes(error, layout.logical_z) else -1
    sx = 1 if commutes(error, layout.logical_x) else -1
    return np.array([1, sz, sx, sx * sz])


def _conjugate(k: np.ndarray, logical: str) -> np.ndarray:
    u = np.kron(_P1[logical], np.eye(2))
    return u @ k @ u.conj().T


def _fidelities(k: np.ndarray) -> np.ndarray:
    """``<Omega| (Q x 1) K (Q x 1)^dagger |Omega>`` for Q in :data:`LOGICALS`; ``k`` is ``(..., 4, 4)``."""
    omega = np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2)
    out = []
    for q in LOGICALS:
        u = np.kron(_P1[q], np.eye(2))
        v = u.conj().T @ omega
        out.append(np.real(np.einsum("i,...ij,j->...", v.conj(), k, v)))
    return np.stack(out, axis=-1)


def _argmax_ordered(f: np.ndarray) -> np.ndarray:
    """Index of the maximum per row with ties going to the earliest entry."""
    top = f.max(axis=-1, keepdims=True)
    tol = 1e-12 * np.maximum(np.abs(top), 1e-300)
    return np.argmax(f >= top - tol, axis=-1)


def corrected_chois(layout, nm: NoiseModel, syndromes: np.ndarray, chi=None):
    """Per-syndrome Choi blocks in the pure-error frame, and the pure errors used."""
    ev = get_evaluator(layout, nm.family, "entangled_ref", chi)
    syndromes = np.atleast_2d(syndromes)
    k = ev.choi_coefficients(nm.alpha, syndromes)
    errors = [pure_error_lookup(layout, s) for s in syndromes]
    signs = np.stack([logical_frame_signs(layout, e) for e in errors])
    return choi_from_coefficients(k * signs[:, :, None]), errors


def ml_logical_recovery(layout: SurfaceCodeLayout, m, nm: NoiseModel, chi=None) -> RecoveryChoice:
    """Pure error plus the logical Pauli with the largest Bell-diagonal weight."""
    out = m.outcomes if isinstance(m, SyndromeRecord) else np.asarray(m).reshape(-1)
    k, errors = corrected_chois(layout, nm, out.reshape(1, -1), chi)
    idx = int(_argmax_ordered(_fidelities(k[0])))
    return RecoveryChoice(errors[0], LOGICALS[idx])


# -- matching ---------------------------------------------------------------------


@lru_cache(maxsize=32)
def _matching_graph(rows: int, cols: int, sector: str):
    """Graph on generators of one type plus a boundary node; edges are single-qubit errors."""
    from .surface_code import build_rotated_layout

    layout = build_rotated_layout(rows, cols)
    gens = layout.z_generators if sector == "Z" else layout.x_generators
    touching: dict[int, list[int]] = {}
    for i in gens:
        for q in layout.generators[i].support:
            touching.setdefault(q, []).append(i)
    g = nx.Graph()
    g.add_node("B")
    g.add_nodes_from(gens)
    for q in range(layout.qubit_count):
        ends = touching.get(q, [])
        if len(ends) == 2:
            a, b = ends
        elif len(ends) == 1:
            a, b = ends[0], "B"
        else:
            continue
        if not g.has_edge(a, b):
            g.add_edge(a, b, qubit=q)
    paths = dict(nx.all_pairs_shortest_path(g))
    return g, paths


def _match(defects: list[int], paths) -> list[tuple]:
    """Exact minimum-weight pairing of defects with each other or the boundary."""
    n = len(defects)
    if n > MWPM_DEFECT_CAP:
        raise ValueError(f"{n} defects exceed the brute-force matching cap {MWPM_DEFECT_CAP}")

    def dist(a, b):
        return len(paths[a][b]) - 1

    @lru_cache(maxsize=None)
    def best(mask: int):
        if mask == 0:
            return 0, ()
        i = (mask & -mask).bit_length() - 1
        rest = mask & ~(1 << i)
        cost, pairs = best(rest)
        choice = (cost + dist(defects[i], "B"), ((defects[i], "B"),) + pairs)
        for j in range(i + 1, n):
            if rest >> j & 1:
                c2, p2 = best(rest & ~(1 << j))
                cand = c2 + dist(defects[i], defects[j])
                if cand < choice[0]:
                    choice = (cand, ((defects[i], defects[j]),) + p2)
        return choice

    return list(best((1 << n) - 1)[1])


def _logical_class(layout: SurfaceCodeLayout, op: PauliString) -> str:
    has_x = not commutes(op, layout.logical_z)
    has_z = not commutes(op, layout.logical_x)
    return {(False, False): "I", (True, False): "X", (False, True): "Z", (True, True): "Y"}[(has_x, has_z)]


def mwpm_correction(layout: SurfaceCodeLayout, m) -> PauliString:
    """Lightest Pauli found by matching each sector's defects to each other or a boundary.

    Distances are path lengths in the syndrome graph, i.e. the number of
    single-qubit flips needed to connect two defects.
    """
    out = m.outcomes if isinstance(m, SyndromeRecord) else np.asarray(m).reshape(-1)
    n = layout.qubit_count
    x = np.zeros(n, dtype=np.uint8)
    z = np.zeros(n, dtype=np.uint8)
    for sector, target in (("Z", x), ("X", z)):
        graph, paths = _matching_graph(layout.rows, layout.cols, sector)
        gens = layout.z_generators if sector == "Z" else layout.x_generators
        defects = [i for i in gens if out[i] == -1]
        for a, b in _match(defects, paths):
            path = paths[a][b]
            for u, v in zip(path, path[1:]):
                target[graph.edges[u, v]["qubit"]] ^= 1
    return PauliString.from_xz(x, z)


def mwpm_recovery(layout: SurfaceCodeLayout, m) -> RecoveryChoice:
    """Matching correction expressed as pure error plus logical class."""
    out = m.outcomes if isinstance(m, SyndromeRecord) else np.asarray(m).reshape(-1)
    correction = mwpm_correction(layout, out)
    pe = pure_error_lookup(layout, out)
    return RecoveryChoice(pe, _logical_class(layout, correction * pe))


# -- decoders as batch objects --------------------------------------------------------


class Decoder(Protocol):
    name: str

    def logicals(self, syndromes: np.ndarray) -> np.ndarray: ...


@dataclass
class MLDecoder:
    """ML recovery under an assumed noise model (which need not be the true one)."""

    layout: SurfaceCodeLayout
    model: NoiseModel
    chi: int | None = None
    name: str = "ml"

    def logicals(self, syndromes: np.ndarray) -> np.ndarray:
        k, _ = corrected_chois(self.layout, self.model, syndromes, self.chi)
        return _argmax_ordered(_fidelities(k))


@dataclass
class MWPMDecoder:
    layout: SurfaceCodeLayout
    name: str = "mwpm"
    _cache: dict = field(default_factory=dict, repr=False)

    def logicals(self, syndromes: np.ndarray) -> np.ndarray:
        out = np.empty(len(syndromes), dtype=np.int64)
        for i, s in enumerate(np.atleast_2d(syndromes)):
            key = s.tobytes()
            if key not in self._cache:
                self._cache[key] = LOGICALS.index(mwpm_recovery(self.layout, s).logical)
            out[i] = self._cache[key]
        return out


@dataclass
class LogicalChannelEstimate:
    """Average corrected logical Choi matrix and the resulting distance to the identity."""

    choi: np.ndarray
    n_samples: int
    exact: bool
    metric: float = float("nan")
    standard_error: float = 0.0
    per_syndrome: dict = field(default_factory=dict, repr=False)


def estimate_process_choi(
    layout: SurfaceCodeLayout,
    decoder: Decoder,
    nm: NoiseModel,
    n_samples: int | None = None,
    chi: int | None = None,
    rng: np.random.Generator | None = None,
    exact: bool | None = None,
    n_batches: int = 10,
    restarts: int = 64,
) -> LogicalChannelEstimate:
    """Choi matrix of (recovery o syndrome measurement o noise) on the logical qubit.

    Exact mode sums the corrected blocks over every syndrome (small codes);
    sampling mode draws syndromes from ``nm`` and averages normalized blocks.
    The standard error comes from the spread of the metric over ``n_batches``
    equal sub-samples.
    """
    from .oracle import all_syndromes

    if exact is None:
        exact = n_samples is None
    if exact:
        if layout.n_generators > 16:
            raise ValueError("exact enumeration limited to 16 generators")
        synd = all_syndromes(layout.n_generators)
        k, _ = corrected_chois(layout, nm, synd, chi)
        keep = np.real(np.trace(k, axis1=1, axis2=2)) > 0
        synd, k = synd[keep], k[keep]
        q = decoder.logicals(synd)
        fixed = np.stack([_conjugate(kk, LOGICALS[i]) for kk, i in zip(k, q)])
        choi = fixed.sum(axis=0)
        metric = diamond_distance_to_identity(choi, restarts=restarts)
        return LogicalChannelEstimate(choi, len(synd), True, metric, 0.0)

    if n_samples is None or n_samples < 1:
        raise ValueError("sampling mode needs n_samples >= 1")
    rng = np.random.default_rng() if rng is None else rng
    ev = get_evaluator(layout, nm.family, "mixed_L", chi)
    synd = ev.sample(nm.alpha, rng, n_samples)
    uniq, inv, counts = np.unique(synd, axis=0, return_inverse=True, return_counts=True)
    inv = np.asarray(inv).reshape(-1)
    k, _ = corrected_chois(layout, nm, uniq, chi)
    norm = k / np.real(np.trace(k, axis1=1, axis2=2))[:, None, None]
    q = decoder.logicals(uniq)
    fixed = np.stack([_conjugate(kk, LOGICALS[i]) for kk, i in zip(norm, q)])
    choi = np.einsum("u,uij->ij", counts, fixed) / n_samples
    metric = diamond_distance_to_identity(choi, restarts=restarts)
    se = 0.0
    if n_batches > 1 and n_samples >= n_batches:
        parts = np.array_split(inv, n_batches)
        vals = [diamond_distance_to_identity(fixed[p].mean(axis=0), restarts=restarts) for p in parts]
        se = float(np.std(vals, ddof=1) / np.sqrt(n_batches))
    return LogicalChannelEstimate(choi, n_samples, False, metric, se)


# -- diamond distance ----------------------------------------------------------------


def _trace_norm_for_input(params: np.ndarray, delta: np.ndarray) -> float:
    c = (params[:4] + 1j * params[4:]).reshape(2, 2)
    nrm = np.linalg.norm(c)
    if nrm == 0:
        return 0.0
    c = c / nrm
    m = np.kron(np.eye(2), c.T)
    out = 2 * m @ delta @ m.conj().T
    out = 0.5 * (out + out.conj().T)
    return float(np.sum(np.abs(np.linalg.eigvalsh(out))))


def diamond_distance_to_identity(
    choi: np.ndarray, restarts: int = 64, seed: int = 0, tol: float = 1e-6
) -> float:
    """``|| Phi - id ||_diamond`` for a qubit channel given by its normalized Choi matrix.

    ``choi`` is ``(Phi x id)(|Omega><Omega|)`` ordered (system, reference).  The
    optimum is attained on a pure input with a two-dimensional ancilla, written
    as ``sqrt(2) (1 x C^T)|Omega>`` with ``||C||_F = 1``; the trace norm of the
    output difference is maximized from ``restarts`` random starts followed by
    local refinement.
    """
    choi = np.asarray(choi, dtype=complex)
    tr = np.real(np.trace(choi))
    if abs(tr - 1) > 1e-6:
        raise ValueError(f"Choi matrix must have unit trace, got {tr:.6g}")
    delta = choi - bell_state_choi()
    if np.max(np.abs(delta)) < 1e-15:
        return 0.0
    rng = np.random.default_rng(seed)
    best = -np.inf
    found = False
    starts = [np.array([1, 0, 0, 1, 0, 0, 0, 0], dtype=float)]
    starts += [np.eye(8)[i] for i in (0, 1, 2, 3)]
    starts += list(rng.normal(size=(restarts, 8)))
    for x0 in starts:
        res = scipy.optimize.minimize(
            lambda p: -_trace_norm_for_input(p, delta), x0, method="Nelder-Mead",
            options={"xatol": tol, "fatol": 1e-12, "maxiter": 4000},
        )
        val = -res.fun
        if np.isfinite(val):
            found = True
            best = max(best, val)
    if not found:
        raise RuntimeError("diamond-distance optimization failed for every restart")
    return float(best)


def pauli_twirl(kind: str, params) -> tuple[float, float, float]:
    """``(px, py, pz)`` of the Pauli-twirled channel, read from the Bell diagonal of its Choi matrix."""
    ops = kraus_batch(kind, np.asarray(params, dtype=float))
    omega = np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2)
    choi = sum(np.outer(np.kron(k, np.eye(2)) @ omega, (np.kron(k, np.eye(2)) @ omega).conj()) for k in ops)
    out = []
    for a in ("X", "Y", "Z"):
        v = np.kron(_P1[a], np.eye(2)) @ omega
        out.append(float(np.real(v.conj() @ choi @ v)))
    return tuple(out)
