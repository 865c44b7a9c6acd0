"""Tensor-network likelihoods, syndrome sampling and conditional logical Choi blocks.

Notation.  For bits ``a = (ax, az)`` write ``B_a = X^ax Z^az`` and, for an
n-qubit bit pattern, ``W(u) = B_{u_1} x ... x B_{u_n}``.  Every element of the
stabilizer group is ``W(u)`` for the pattern obtained by XOR-ing generator
supports, and the encoded density operators used here are sums of such
strings.  Expanding both the measurement projector ``prod_i (1 + m_i g_i)/2``
and the initial state turns the likelihood into

    p(m) = sum_{c, b} prod_i w_i(c_i) prod_q T_q[u_q(c), v_q(b)],
    T_q[u, v] = Tr(B_u E_q(B_v)) / 2,

with one binary variable per measured generator (``c``, weights ``1/2`` and
``m_i/2``) and per state generator (``b``).  Each variable is a hyperedge
touching the qubits in its support; routing the hyperedges along grid bonds
makes the sum a 2D grid network whose site tensors are entries of ``T_q``.
This is the projector-tensor network with the physical legs already summed.

Channels whose transfer matrix never changes the X part of a Pauli string
(amplitude damping, dephasing, rotations about Z, ...) force ``c_i = b_i`` on
X-type generators, so the two variables merge into one; the same holds for
Z-type generators when the Z part is preserved.  This halves the bond
dimension without approximation.

A generator whose outcome is not fixed gets weights ``(1, 0)``, which
marginalizes it.  That is how syndromes are sampled generator by generator.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .noise_models import NoiseFamily, NoiseModel, TimeVaryingNoise
from .surface_code import SurfaceCodeLayout, SyndromeBatch, SyndromeRecord, build_rotated_layout
from .tensor_core import ContractionError, Grid2DNetwork, contract_grid

__all__ = [
    "LOGICAL_STATE_KINDS",
    "LikelihoodEvaluator",
    "CodeStateNetwork",
    "build_state",
    "transfer_matrices",
    "get_evaluator",
    "likelihood",
    "log_likelihood_batch",
    "sample_syndrome",
    "sample_syndromes",
    "conditional_logical_choi",
    "choi_from_coefficients",
]

LOGICAL_STATE_KINDS = ("mixed_L", "zero_L", "plus_L", "entangled_ref")
CLAMP_TOL = 1e-9

_PAULI_B = np.array(
    [
        [[1, 0], [0, 1]],  # I
        [[1, 0], [0, -1]],  # Z
        [[0, 1], [1, 0]],  # X
        [[0, -1], [1, 0]],  # XZ
    ],
    dtype=complex,
)

# Channels that never change the X (resp. Z) part of a Pauli string.
_X_PRESERVING = {
    "identity", "amplitude_damping", "phase_damping", "systematic_rotation",
    "generalized_amplitude_damping", "ad_plus_dephase", "pauli",
}
_Z_PRESERVING = {"identity", "phase_damping", "pauli"}

# bit masks inside the flat transfer index 4*u + v, u = 2*ux + uz, v = 2*vx + vz
_UX, _UZ, _VX, _VZ = 8, 4, 2, 1


# T[u, v] = sum B_u[i, j] S[j, a, i, b] B_v[a, b] / 2 with S[j, a, i, b] = sum_k K[j, a] conj(K[i, b])
_TRANSFER_MAP = (np.einsum("uij,vab->uvjaib", _PAULI_B, _PAULI_B) / 2).reshape(16, 16)


def transfer_matrices(kraus: np.ndarray) -> np.ndarray:
    """``T[u, v] = Tr(B_u E(B_v)) / 2`` for stacked Kraus sets ``(..., K, 2, 2)``, flattened to 16."""
    kraus = np.asarray(kraus)
    flat = kraus.reshape(kraus.shape[:-2] + (4,))
    sup = np.swapaxes(flat, -1, -2) @ np.conj(flat)
    sup = sup.reshape(sup.shape[:-2] + (16,))
    return sup @ _TRANSFER_MAP.T


@dataclass
class _Var:
    name: str
    masks: dict[int, int]  # qubit -> XOR mask into the flat transfer index
    generator: int | None = None  # weighted by the outcome of this generator
    open_slot: int | None = None  # position among open legs at site (0, 0)
    spine: int | None = None


def _route(sites: set[tuple[int, int]], spine: int | None) -> tuple[list, set]:
    """Tree on grid bonds connecting ``sites``: vertical segments joined by one horizontal spine."""
    cols = sorted({c for _, c in sites})
    bonds = []
    nodes = set(sites)
    if len(cols) == 1:
        rows = [r for r, _ in sites]
        c = cols[0]
        for r in range(min(rows), max(rows)):
            bonds.append(("v", r, c))
            nodes.add((r, c))
            nodes.add((r + 1, c))
        return bonds, nodes
    for c in range(cols[0], cols[-1]):
        bonds.append(("h", spine, c))
        nodes.add((spine, c))
        nodes.add((spine, c + 1))
    for c in cols:
        rows = [r for r, cc in sites if cc == c] + [spine]
        for r in range(min(rows), max(rows)):
            bonds.append(("v", r, c))
            nodes.add((r, c))
            nodes.add((r + 1, c))
    return bonds, nodes


class LikelihoodEvaluator:
    """Likelihoods for one layout, channel family and initial logical state.

    Parameters
    ----------
    layout : SurfaceCodeLayout
    family : NoiseFamily
        Channel kind and parameter packing.
    kind : str
        Initial logical state, one of :data:`LOGICAL_STATE_KINDS`.
        ``entangled_ref`` leaves the logical and reference indices open and is
        what :meth:`choi_coefficients` uses.
    chi : int or None
        Boundary-MPS bond dimension; ``None`` contracts exactly.
    merge : bool
        Merge measurement and state variables where the channel allows it.
    """

    def __init__(
        self,
        layout: SurfaceCodeLayout,
        family: NoiseFamily,
        kind: str = "mixed_L",
        chi: int | None = None,
        merge: bool = True,
        chunk: int = 512,
    ):
        if kind not in LOGICAL_STATE_KINDS:
            raise ValueError(f"unknown logical state kind {kind!r}")
        if family.n_qubits != layout.qubit_count:
            raise ValueError("noise family and layout disagree on the qubit count")
        if chi is not None and chi < 1:
            raise ValueError("chi must be a positive integer or None")
        self.layout = layout
        self.family = family
        self.kind = kind
        self.chi = chi
        self.chunk = chunk
        self.merge_x = merge and family.kind in _X_PRESERVING
        self.merge_z = merge and family.kind in _Z_PRESERVING
        self._build()

    # -- network skeleton -------------------------------------------------

    def _build(self) -> None:
        lay = self.layout
        rows, cols = lay.rows, lay.cols
        variables: list[_Var] = []

        # Spine rows for plaquettes spanning two columns: one per row and column pair when possible.
        used: dict[int, set[int]] = {}
        spines = []
        for g in lay.generators:
            pos = [lay.position(q) for q in g.support]
            pcols = {c for _, c in pos}
            if len(pcols) == 1:
                spines.append(None)
                continue
            j = min(pcols)
            cand = sorted({r for r, _ in pos})
            taken = used.setdefault(j, set())
            free = [r for r in cand if r not in taken]
            r = free[0] if free else cand[0]
            taken.add(r)
            spines.append(r)

        for i, g in enumerate(lay.generators):
            merged = self.merge_x if g.kind == "X" else self.merge_z
            umask = _UX if g.kind == "X" else _UZ
            vmask = _VX if g.kind == "X" else _VZ
            if merged:
                masks = {q: umask | vmask for q in g.support}
                variables.append(_Var(f"g{i}", masks, generator=i, spine=spines[i]))
            else:
                variables.append(_Var(f"m{i}", {q: umask for q in g.support}, generator=i,
                                      spine=spines[i]))
                variables.append(_Var(f"s{i}", {q: vmask for q in g.support}, spine=spines[i]))

        xl, zl = lay.logical_x.support, lay.logical_z.support
        if self.kind == "entangled_ref":
            variables.append(_Var("aX", {q: _UX for q in xl}, open_slot=0, spine=0))
            variables.append(_Var("aZ", {q: _UZ for q in zl}, open_slot=1, spine=0))
            variables.append(_Var("rX", {q: _VX for q in xl}, open_slot=2, spine=0))
            variables.append(_Var("rZ", {q: _VZ for q in zl}, open_slot=3, spine=0))
        elif self.kind == "zero_L":
            variables.append(_Var("rZ", {q: _VZ for q in zl}, spine=0))
        elif self.kind == "plus_L":
            variables.append(_Var("rX", {q: _VX for q in xl}, spine=0))
        self.variables = variables

        bond_vars: dict[tuple[str, int, int], list[int]] = {}
        site_vars: dict[tuple[int, int], list[int]] = {}
        weight_bond: dict[int, tuple[str, int, int] | None] = {}
        for k, var in enumerate(variables):
            pts = {lay.position(q) for q in var.masks}
            if var.open_slot is not None:
                pts.add((0, 0))
            bonds, nodes = _route(pts, var.spine)
            for b in bonds:
                bond_vars.setdefault(b, []).append(k)
            for s in nodes:
                site_vars.setdefault(s, []).append(k)
            if var.generator is not None:
                horiz = [b for b in bonds if b[0] == "h"]
                weight_bond[k] = (horiz or bonds or [None])[0]
        if any(b is None for b in weight_bond.values()):
            raise ValueError("a weighted generator variable has no bond to carry its weight")
        self._bond_vars = bond_vars

        def bond_dim(b):
            return 1 << len(bond_vars.get(b, ()))

        # Site selection tables: sel[int_combo, up, down, left, right, *open] -> flat T index (16 = zero).
        self._sel = [[None] * cols for _ in range(rows)]
        self._selmat = [[None] * cols for _ in range(rows)]
        for r in range(rows):
            for c in range(cols):
                q = lay.qubit(r, c)
                legs = [("v", r - 1, c), ("v", r, c), ("h", r, c - 1), ("h", r, c)]
                vs = site_vars.get((r, c), [])
                leg_members = [bond_vars.get(b, []) for b in legs]
                on_leg = {k for m in leg_members for k in m}
                opens = sorted((variables[k].open_slot, k) for k in vs
                               if variables[k].open_slot is not None and (r, c) == (0, 0))
                internal = [k for k in vs if k not in on_leg and all(k != o for _, o in opens)]
                nv = len(vs)
                idx = {k: t for t, k in enumerate(vs)}
                combos = (np.arange(1 << nv)[:, None] >> np.arange(nv)[None, :]) & 1
                flat = np.zeros(len(combos), dtype=np.int64)
                for k in vs:
                    m = variables[k].masks.get(q, 0)
                    if m:
                        flat ^= combos[:, idx[k]] * m
                coords = []
                int_code = np.zeros(len(combos), dtype=np.int64)
                for t, k in enumerate(internal):
                    int_code |= combos[:, idx[k]] << t
                coords.append(int_code)
                for members in leg_members:
                    code = np.zeros(len(combos), dtype=np.int64)
                    for k in members:
                        code = (code << 1) | combos[:, idx[k]]
                    coords.append(code)
                for _, k in opens:
                    coords.append(combos[:, idx[k]])
                shape = [1 << len(internal)] + [1 << len(m) for m in leg_members] + [2] * len(opens)
                sel = np.full(shape, 16, dtype=np.int64)
                sel[tuple(coords)] = flat
                self._sel[r][c] = sel
                # site = T_q @ onehot: column j counts internal configurations selecting each entry
                rest = sel.shape[1:]
                cols_idx = np.broadcast_to(np.arange(int(np.prod(rest, dtype=int))).reshape(rest), sel.shape)
                onehot = np.zeros((17, int(np.prod(rest, dtype=int))))
                np.add.at(onehot, (sel.ravel(), cols_idx.ravel()), 1.0)
                self._selmat[r][c] = (onehot[:16], rest)
        for b, ks in bond_vars.items():
            if bond_dim(b) > 1 << 12:
                raise ValueError(f"bond {b} would carry {len(ks)} variables")

        # Weight tables: per bond, the bit of each weighted variable and its generator index.
        self._weight_tables = {}
        for k, b in weight_bond.items():
            members = bond_vars[b]
            pos = members.index(k)
            bits = (np.arange(bond_dim(b)) >> (len(members) - 1 - pos)) & 1
            self._weight_tables.setdefault(b, []).append((variables[k].generator, bits))
        self.open_shape = (2, 2, 2, 2) if self.kind == "entangled_ref" else ()

    # -- parameters -> site tensors -----------------------------------------

    def transfer(self, alpha: np.ndarray) -> np.ndarray:
        """Flattened transfer matrices ``(P, n_qubits, 16)`` for packed parameters ``(P, dim)``."""
        alpha = np.atleast_2d(np.asarray(alpha, dtype=float))
        t = transfer_matrices(self.family.kraus(alpha))
        if np.max(np.abs(t.imag)) <= 1e-14 * max(1.0, float(np.max(np.abs(t.real)))):
            t = t.real.copy()
        return t

    def _sites(self, t: np.ndarray) -> list[list[np.ndarray]]:
        p = t.shape[0]
        out = []
        for r in range(self.layout.rows):
            row = []
            for c in range(self.layout.cols):
                mat, rest = self._selmat[r][c]
                row.append((t[:, self.layout.qubit(r, c), :] @ mat).reshape((p,) + rest))
            out.append(row)
        return out

    def _weights(self, m: np.ndarray) -> dict:
        """Bond weights for outcome rows ``m`` (``(B, G)`` with +1, -1, or 0 = not measured)."""
        m = np.asarray(m, dtype=float)
        w0 = np.where(m == 0, 1.0, 0.5)
        w1 = np.where(m == 0, 0.0, 0.5 * m)
        out = {}
        for b, entries in self._weight_tables.items():
            w = np.ones((m.shape[0], len(entries[0][1])))
            for g, bits in entries:
                w = w * np.where(bits[None, :] == 1, w1[:, g : g + 1], w0[:, g : g + 1])
            out[b] = w
        return out

    def _contract(self, sites, weights, chi=...):
        chi = self.chi if chi is ... else chi
        net = Grid2DNetwork(sites, weights)
        return contract_grid(net, chi, return_result=True)

    def network(self, alpha, m) -> Grid2DNetwork:
        """The grid network for one parameter vector and one outcome row (for inspection and tests)."""
        t = self.transfer(alpha)
        m = np.atleast_2d(np.asarray(m))
        return Grid2DNetwork(self._sites(t), self._weights(m))

    def _values(self, sites, m: np.ndarray, chi=...) -> tuple[np.ndarray, np.ndarray]:
        """Mantissas and log scales, chunked over the outcome rows."""
        mants, logs = [], []
        for start in range(0, max(len(m), 1), self.chunk):
            mm = m[start : start + self.chunk]
            s = sites
            if sites[0][0].shape[0] > 1:
                s = [[x[start : start + self.chunk] for x in row] for row in sites]
            res = self._contract(s, self._weights(mm), chi)
            mant = np.broadcast_to(res.mantissa, (len(mm),) + res.mantissa.shape[1:])
            mants.append(mant)
            logs.append(np.broadcast_to(res.log_scale, (len(mm),)))
        return np.concatenate(mants), np.concatenate(logs)

    @staticmethod
    def _to_log(mant: np.ndarray, log_scale: np.ndarray) -> np.ndarray:
        re = np.real(mant)
        if np.iscomplexobj(mant):
            bad = np.abs(np.imag(mant)) > 1e-8 * np.maximum(1.0, np.abs(re))
            if np.any(bad):
                raise ContractionError("likelihood has a non-negligible imaginary part")
        value = re * np.exp(np.minimum(log_scale, 0.0))
        if np.any(value < -CLAMP_TOL) or np.any(re * np.exp(np.minimum(log_scale, 700)) > 1 + CLAMP_TOL):
            raise ContractionError(
                f"likelihood outside [0, 1] beyond tolerance: min {value.min():.3e}"
            )
        with np.errstate(divide="ignore"):
            return np.where(re > 0, np.log(np.where(re > 0, re, 1.0)) + log_scale, -np.inf)

    def _check_rows(self, m) -> np.ndarray:
        m = np.asarray(m, dtype=np.int8)
        m = np.atleast_2d(m)
        if m.shape[1] != self.layout.n_generators:
            raise ValueError(
                f"syndrome length {m.shape[1]} does not match {self.layout.n_generators} generators"
            )
        return m

    # -- public evaluation ----------------------------------------------------

    def log_probabilities(self, alpha, syndromes) -> np.ndarray:
        """``ln p(m | alpha)`` for each row of ``syndromes`` at one parameter vector."""
        if self.kind == "entangled_ref":
            raise ValueError("use choi_coefficients for the entangled reference state")
        m = self._check_rows(syndromes)
        sites = self._sites(self.transfer(np.asarray(alpha, dtype=float).reshape(1, -1)))
        mant, ls = self._values(sites, m)
        return self._to_log(mant, ls)

    def probabilities(self, alpha, syndromes) -> np.ndarray:
        return np.exp(self.log_probabilities(alpha, syndromes))

    def log_likelihood(self, alpha, batch: SyndromeBatch | np.ndarray) -> float:
        """Sum over cycles of ``ln p(m_i | alpha)``; cycles are independent."""
        out = batch.outcomes if isinstance(batch, SyndromeBatch) else np.asarray(batch)
        out = self._check_rows(out)
        if len(out) == 0:
            raise ValueError("empty syndrome batch")
        uniq, counts = np.unique(out, axis=0, return_counts=True)
        lp = self.log_probabilities(alpha, uniq)
        if np.any(np.isneginf(lp)):
            return -np.inf
        return float(np.dot(counts, lp))

    def paired_log_probabilities(self, alphas, syndromes) -> np.ndarray:
        """``ln p(m_j | alpha_j)`` for matching rows (one parameter vector per syndrome)."""
        alphas = np.atleast_2d(np.asarray(alphas, dtype=float))
        m = self._check_rows(syndromes)
        if len(m) == 1 and len(alphas) > 1:
            m = np.repeat(m, len(alphas), axis=0)
        if len(m) != len(alphas):
            raise ValueError("need one syndrome per parameter vector")
        sites = self._sites(self.transfer(alphas))
        mant, ls = self._values(sites, m)
        return self._to_log(mant, ls)

    def choi_coefficients(self, alpha, syndromes) -> np.ndarray:
        """Raw coefficients ``k[b, a, r]`` (shape ``(B, 4, 4)``) of the conditional Choi blocks."""
        if self.kind != "entangled_ref":
            raise ValueError("Choi coefficients need kind='entangled_ref'")
        m = self._check_rows(syndromes)
        sites = self._sites(self.transfer(np.asarray(alpha, dtype=float).reshape(1, -1)))
        mant, ls = self._values(sites, m)
        return mant.reshape(len(m), 4, 4) * np.exp(ls)[:, None, None]

    # -- sampling -----------------------------------------------------------

    def sample(self, alphas, rng: np.random.Generator, n: int | None = None) -> np.ndarray:
        """Draw syndromes generator by generator.

        ``alphas`` is one parameter vector (then ``n`` samples share it) or a
        ``(n, dim)`` array with a vector per sample.  Returns ``(n, G)`` int8.
        """
        if self.kind == "entangled_ref":
            raise ValueError("sampling needs a normalized initial state")
        alphas = np.asarray(alphas, dtype=float)
        if alphas.ndim == 1:
            if n is None:
                n = 1
            t = self.transfer(alphas.reshape(1, -1))
        else:
            n = alphas.shape[0] if n is None else n
            if alphas.shape[0] != n:
                raise ValueError("one parameter vector per sample required")
            t = self.transfer(alphas)
        sites = self._sites(t)
        g_count = self.layout.n_generators
        m = np.zeros((n, g_count), dtype=np.int8)
        prev = np.ones(n)
        for i in range(g_count):
            m[:, i] = 1
            mant, ls = self._values(sites, m)
            p_plus = np.real(mant) * np.exp(ls)
            cond = p_plus / np.where(prev > 0, prev, 1.0)
            if np.any(cond < -CLAMP_TOL) or np.any(cond > 1 + 1e-7):
                raise ContractionError(f"outcome probability out of range at generator {i}")
            cond = np.clip(cond, 0.0, 1.0)
            u = rng.random(n)
            plus = u < cond
            m[:, i] = np.where(plus, 1, -1)
            prev = np.where(plus, p_plus, prev - p_plus)
        return m


def choi_from_coefficients(k: np.ndarray) -> np.ndarray:
    """``K = 1/4 sum_{a,r} s_a k[a, r] B_a (x) B_r`` with ``s_a = -1`` for ``a = XZ``.

    The sign undoes the adjoint of the ``X_L Z_L`` logical string; the result is
    ordered (logical, reference).
    """
    k = np.asarray(k)
    sign = np.array([1, 1, 1, -1])
    kk = k * sign[..., :, None]
    out = np.einsum("...ar,aij,rkl->...ikjl", kk, _PAULI_B, _PAULI_B) / 4
    return out.reshape(k.shape[:-2] + (4, 4))


@lru_cache(maxsize=64)
def _cached_evaluator(rows, cols, kind_ch, uniform, fixed, kind, chi):
    layout = build_rotated_layout(rows, cols)
    fam = NoiseFamily(kind_ch, layout.qubit_count, uniform, dict(fixed))
    return LikelihoodEvaluator(layout, fam, kind, chi)


def get_evaluator(layout: SurfaceCodeLayout, family: NoiseFamily, kind: str = "mixed_L",
                  chi: int | None = None) -> LikelihoodEvaluator:
    """Shared evaluator for the given configuration (building one is the expensive part)."""
    return _cached_evaluator(layout.rows, layout.cols, family.kind, family.uniform,
                             tuple(sorted(family.fixed.items())), kind, chi)


def _rows(m) -> np.ndarray:
    if isinstance(m, SyndromeRecord):
        return m.outcomes.reshape(1, -1)
    if isinstance(m, SyndromeBatch):
        return m.outcomes
    return np.atleast_2d(np.asarray(m, dtype=np.int8))


def likelihood(layout: SurfaceCodeLayout, m, nm: NoiseModel, kind: str = "mixed_L",
               chi: int | None = None) -> float:
    """``p(m | alpha) = Tr(prod_i (1 + m_i g_i)/2 E(rho_0))`` clamped to ``[0, 1]``."""
    ev = get_evaluator(layout, nm.family, kind, chi)
    return float(np.clip(np.exp(ev.log_probabilities(nm.alpha, _rows(m))[0]), 0.0, 1.0))


def log_likelihood_batch(
    layout: SurfaceCodeLayout,
    batch: SyndromeBatch,
    nm: NoiseModel | TimeVaryingNoise,
    kind: str = "mixed_L",
    chi: int | None = None,
) -> float:
    """Sum of per-cycle log-likelihoods; a schedule is evaluated at each cycle index."""
    if len(batch) == 0:
        raise ValueError("empty syndrome batch")
    ev = get_evaluator(layout, nm.family, kind, chi)
    if isinstance(nm, TimeVaryingNoise):
        t = batch.first_cycle + np.arange(len(batch))
        lp = ev.paired_log_probabilities(nm.alpha(t), batch.outcomes)
        return float(lp.sum()) if not np.any(np.isneginf(lp)) else -np.inf
    return ev.log_likelihood(nm.alpha, batch)


def sample_syndrome(layout: SurfaceCodeLayout, nm: NoiseModel, kind: str = "mixed_L",
                    chi: int | None = None, rng: np.random.Generator | None = None,
                    cycle_index: int = 0) -> SyndromeRecord:
    rng = np.random.default_rng() if rng is None else rng
    ev = get_evaluator(layout, nm.family, kind, chi)
    return SyndromeRecord(ev.sample(nm.alpha, rng, 1)[0], cycle_index)


def sample_syndromes(layout: SurfaceCodeLayout, nm: NoiseModel | TimeVaryingNoise, n: int,
                     rng: np.random.Generator, kind: str = "mixed_L", chi: int | None = None,
                     first_cycle: int = 0, block: int = 4096) -> SyndromeBatch:
    """``n`` consecutive cycles; schedules are evaluated at each cycle index."""
    ev = get_evaluator(layout, nm.family, kind, chi)
    parts = []
    for start in range(0, n, block):
        size = min(block, n - start)
        if isinstance(nm, TimeVaryingNoise):
            t = first_cycle + start + np.arange(size)
            parts.append(ev.sample(nm.alpha(t), rng))
        else:
            parts.append(ev.sample(nm.alpha, rng, size))
    out = np.concatenate(parts) if parts else np.zeros((0, layout.n_generators), dtype=np.int8)
    return SyndromeBatch(out, first_cycle)


def conditional_logical_choi(layout: SurfaceCodeLayout, m, nm: NoiseModel,
                             chi: int | None = None, pure_error="lookup") -> np.ndarray:
    """Unnormalized ``K_m = (M_m o E (x) id)(|Omega><Omega|)`` on (logical, reference).

    ``M_m`` projects onto syndrome ``m`` and then applies ``pure_error`` (by
    default the deterministic lookup Pauli, ``None`` for no correction), after
    which the logical qubit is read off in the ``|0_L>, |1_L>`` basis.
    ``Tr K_m`` equals the mixed-state likelihood of ``m``.  Returns ``(4, 4)``
    for one syndrome or ``(B, 4, 4)`` for several.
    """
    from .decoders import logical_frame_signs, pure_error_lookup

    ev = get_evaluator(layout, nm.family, "entangled_ref", chi)
    rows = _rows(m)
    k = ev.choi_coefficients(nm.alpha, rows)
    if pure_error is not None:
        errs = ([pure_error_lookup(layout, r) for r in rows] if isinstance(pure_error, str)
                else [pure_error] * len(rows))
        k = k * np.stack([logical_frame_signs(layout, e) for e in errs])[:, :, None]
    k = choi_from_coefficients(k)
    herm = 0.5 * (k + np.conj(np.swapaxes(k, -1, -2)))
    evals = np.linalg.eigvalsh(herm)
    scale = np.maximum(np.abs(np.trace(herm, axis1=-2, axis2=-1)), 1e-300)
    if np.any(evals.min(axis=-1) < -1e-9 * np.maximum(1.0, scale)):
        raise ContractionError("conditional Choi matrix is not positive semidefinite")
    single = isinstance(m, SyndromeRecord) or np.asarray(m).ndim == 1
    return herm[0] if single else herm


class CodeStateNetwork:
    """Prepared encoded state as a grid with one vectorized physical leg per qubit.

    Site tensors carry the state variables only; the physical leg (extent 4,
    row-major ``vec`` of a 2x2 matrix) holds ``B_v / 2``.  With the reference
    legs of ``entangled_ref`` the state lives on code qubits plus one reference
    qubit.  :meth:`to_dense` contracts everything (small layouts only).
    """

    def __init__(self, layout: SurfaceCodeLayout, kind: str = "mixed_L"):
        self.layout = layout
        self.kind = kind
        fam = NoiseFamily("identity", layout.qubit_count)
        # Reuse the routing of an evaluator with split variables and keep only state-side ones.
        self._ev = LikelihoodEvaluator(layout, fam, kind, None, merge=False)

    def to_dense(self) -> np.ndarray:
        lay = self.layout
        n = lay.qubit_count
        if n > 10:
            raise ValueError("dense conversion limited to 10 qubits")
        ev = self._ev
        # Physical tensor per flat index v: state side only. Measurement-side variables are pinned to 0
        # by giving them the (1, 0) weight of an unmeasured generator; open measurement legs are sliced.
        vecs = (_PAULI_B.reshape(4, 4) / 2)  # v -> vec(B_v)/2
        per_flat = np.zeros((17, 4), dtype=complex)
        for flat in range(16):
            u, v = divmod(flat, 4)
            if u == 0:
                per_flat[flat] = vecs[v]
        sites = []
        for r in range(lay.rows):
            row = []
            for c in range(lay.cols):
                sel = ev._sel[r][c]
                site = per_flat[sel].sum(axis=0)  # (..legs.., 4)
                row.append(site[None])
            sites.append(row)
        m = np.zeros((1, lay.n_generators), dtype=np.int8)
        weights = ev._weights(m)
        # Bring every physical leg to the open position by contracting with naive einsum.
        net_sites = []
        for r in range(lay.rows):
            row = []
            for c in range(lay.cols):
                row.append(sites[r][c])
            net_sites.append(row)
        dense = _naive_with_physical(net_sites, weights, lay.rows, lay.cols)
        # dense axes: (batch, [open logical legs], phys_0..phys_{n-1})
        if self.kind == "entangled_ref":
            dense = dense[0]  # (aX, aZ, rX, rZ, phys...)
            dense = dense[0, 0]  # measurement-side logical legs pinned to identity
            ref = _PAULI_B.reshape(2, 2, 2, 2) / 2
            phys = dense.reshape((2, 2) + (2, 2) * n)
            # rho = sum_r W(v(r)) (x) B_r / 2
            op = _assemble(phys.reshape(4, *(4,) * n), n)  # (4, 2^n, 2^n)
            full = np.einsum("rij,rkl->ikjl", op, ref.reshape(4, 2, 2))
            return full.reshape(2 ** (n + 1), 2 ** (n + 1))
        return _assemble(dense[0].reshape((1,) + (4,) * n), n)[0]


def _naive_with_physical(sites, weights, rows, cols):
    """Contract a grid whose sites end in one physical leg; returns (batch, *open, *phys)."""
    import opt_einsum

    sym = (opt_einsum.get_symbol(i) for i in range(10**6))
    batch = next(sym)
    hl = {(r, c): next(sym) for r in range(rows) for c in range(cols + 1)}
    vl = {(r, c): next(sym) for r in range(rows + 1) for c in range(cols)}
    ops, subs, opens, phys = [], [], [], []
    for r in range(rows):
        for c in range(cols):
            t = sites[r][c]
            sub = batch + vl[r, c] + vl[r + 1, c] + hl[r, c] + hl[r, c + 1]
            for _ in t.shape[5:-1]:
                o = next(sym)
                sub += o
                opens.append(o)
            p = next(sym)
            sub += p
            phys.append(p)
            ops.append(t)
            subs.append(sub)
    for (kind, r, c), w in weights.items():
        ops.append(w)
        subs.append(batch + (hl[r, c + 1] if kind == "h" else vl[r + 1, c]))
    expr = ",".join(subs) + "->" + batch + "".join(opens) + "".join(phys)
    return opt_einsum.contract(expr, *ops, optimize="greedy")


def _assemble(phys: np.ndarray, n: int) -> np.ndarray:
    """``(B, 4, ..., 4)`` per-qubit row-major vecs to ``(B, 2^n, 2^n)`` operators."""
    b = phys.shape[0]
    t = phys.reshape((b,) + (2, 2) * n)
    perm = [0] + [1 + 2 * i for i in range(n)] + [2 + 2 * i for i in range(n)]
    return np.transpose(t, perm).reshape(b, 2**n, 2**n)


def build_state(layout: SurfaceCodeLayout, kind: str = "mixed_L") -> CodeStateNetwork:
    """Network for the encoded initial state of the given logical kind."""
    if kind not in LOGICAL_STATE_KINDS:
        raise ValueError(f"unknown logical state kind {kind!r}")
    return CodeStateNetwork(layout, kind)
