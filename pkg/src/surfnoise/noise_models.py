"""Parameterized single-qubit channels, per-qubit noise models and schedules.

Every channel is stored in Kraus form.  :func:`kraus_batch` builds stacked
Kraus operators for many parameter points at once; the likelihood engine uses
it to turn a whole particle ensemble into transfer matrices in one call.

Superoperators act on row-major vectorized density matrices, so
``S @ rho.reshape(-1) == E(rho).reshape(-1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

__all__ = [
    "CHANNEL_PARAMS",
    "DEFAULT_DOMAINS",
    "KrausChannel",
    "ParameterDomain",
    "NoiseFamily",
    "NoiseModel",
    "NoiseSchedule",
    "TimeVaryingNoise",
    "amplitude_damping",
    "phase_damping",
    "systematic_rotation",
    "generalized_amplitude_damping",
    "ad_plus_dephase",
    "pauli_channel",
    "identity_channel",
    "make_channel",
    "kraus_batch",
    "to_superoperator",
    "pauli_traces",
    "schedule_eval",
]

CHANNEL_PARAMS: dict[str, tuple[str, ...]] = {
    "identity": (),
    "amplitude_damping": ("gamma",),
    "phase_damping": ("p",),
    "systematic_rotation": ("theta",),
    "generalized_amplitude_damping": ("gamma", "p"),
    "ad_plus_dephase": ("gamma", "p"),
    "pauli": ("px", "py", "pz"),
}

# Short names accepted wherever a channel kind is named.
_ALIASES = {
    "ad": "amplitude_damping",
    "dephase": "phase_damping",
    "dephasing": "phase_damping",
    "sr": "systematic_rotation",
    "gad": "generalized_amplitude_damping",
    "ad+dephase": "ad_plus_dephase",
    "ad_dephase": "ad_plus_dephase",
    "pauli_channel": "pauli",
}

# Prior boxes used when a run does not configure one.
DEFAULT_DOMAINS: dict[str, dict[str, tuple[float, float]]] = {
    "identity": {},
    "amplitude_damping": {"gamma": (0.0, 0.5)},
    "phase_damping": {"p": (0.0, 0.5)},
    "systematic_rotation": {"theta": (0.0, math.pi / 4)},
    "generalized_amplitude_damping": {"gamma": (0.0, 1.0), "p": (0.0, 1.0)},
    "ad_plus_dephase": {"gamma": (0.0, 0.5), "p": (0.0, 0.5)},
    "pauli": {"px": (0.0, 0.5), "py": (0.0, 0.5), "pz": (0.0, 0.5)},
}

_I2 = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def canonical_kind(kind: str) -> str:
    k = kind.strip().lower()
    k = _ALIASES.get(k, k)
    if k not in CHANNEL_PARAMS:
        raise ValueError(f"unknown channel kind {kind!r}; expected one of {sorted(CHANNEL_PARAMS)}")
    return k


@dataclass(frozen=True)
class KrausChannel:
    """Single-qubit CPTP map ``rho -> sum_k K_k rho K_k^dagger``."""

    kraus_ops: np.ndarray
    param_names: tuple[str, ...] = ()
    params: tuple[float, ...] = ()
    kind: str = "custom"

    def __post_init__(self):
        ops = np.asarray(self.kraus_ops, dtype=complex)
        if ops.ndim != 3 or ops.shape[1:] != (2, 2):
            raise ValueError("Kraus operators must have shape (K, 2, 2)")
        object.__setattr__(self, "kraus_ops", ops)
        if cptp_residual(ops) > 1e-10:
            raise ValueError(f"Kraus set is not trace preserving (residual {cptp_residual(ops):.2e})")

    def apply(self, rho: np.ndarray) -> np.ndarray:
        k = self.kraus_ops
        return np.einsum("kij,jl,kml->im", k, rho, k.conj())

    def compose(self, first: KrausChannel) -> KrausChannel:
        """``self`` applied after ``first``."""
        ops = np.einsum("aij,bjk->abik", self.kraus_ops, first.kraus_ops).reshape(-1, 2, 2)
        return KrausChannel(ops, first.param_names + self.param_names,
                            first.params + self.params, "composite")


def cptp_residual(ops: np.ndarray) -> float:
    s = np.einsum("kji,kjl->il", np.conj(ops), ops)
    return float(np.max(np.abs(s - np.eye(2))))


def _check_unit(name: str, value: float) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name}={value} outside the domain [0, 1]")
    return value


def kraus_batch(kind: str, params: np.ndarray) -> np.ndarray:
    """Kraus operators for a stack of parameter rows, shape ``(..., K, 2, 2)``.

    ``params[..., i]`` is the i-th parameter of ``kind`` in
    :data:`CHANNEL_PARAMS` order.  No domain checks; callers validate.
    """
    kind = canonical_kind(kind)
    params = np.asarray(params, dtype=float)
    shape = params.shape[:-1]
    if kind == "identity":
        return np.broadcast_to(_I2, shape + (1, 2, 2)).copy()
    if kind == "pauli":
        px, py, pz = (params[..., i] for i in range(3))
        pi = np.clip(1.0 - px - py - pz, 0.0, None)
        w = np.sqrt(np.clip(np.stack([pi, px, py, pz], axis=-1), 0.0, None))
        return w[..., None, None] * np.stack([_I2, _X, _Y, _Z])
    if kind == "systematic_rotation":
        th = params[..., 0]
        ops = np.zeros(shape + (1, 2, 2), dtype=complex)
        ops[..., 0, 0, 0] = np.exp(-1j * th)
        ops[..., 0, 1, 1] = np.exp(1j * th)
        return ops

    def ad_ops(g):
        ops = np.zeros(g.shape + (2, 2, 2), dtype=complex)
        ops[..., 0, 0, 0] = 1.0
        ops[..., 0, 1, 1] = np.sqrt(1.0 - g)
        ops[..., 1, 0, 1] = np.sqrt(g)
        return ops

    def dephase_ops(p):
        ops = np.zeros(p.shape + (2, 2, 2), dtype=complex)
        ops[..., 0, 0, 0] = 1.0
        ops[..., 0, 1, 1] = np.sqrt(1.0 - p)
        ops[..., 1, 1, 1] = np.sqrt(p)
        return ops

    if kind == "amplitude_damping":
        return ad_ops(params[..., 0])
    if kind == "phase_damping":
        return dephase_ops(params[..., 0])
    if kind == "ad_plus_dephase":
        a = ad_ops(params[..., 0])
        d = dephase_ops(params[..., 1])
        return np.einsum("...aij,...bjk->...abik", d, a).reshape(shape + (4, 2, 2))
    if kind == "generalized_amplitude_damping":
        g, p = params[..., 0], params[..., 1]
        ops = np.zeros(shape + (4, 2, 2), dtype=complex)
        sp, sq, s1g = np.sqrt(p), np.sqrt(1.0 - p), np.sqrt(1.0 - g)
        ops[..., 0, 0, 0] = sp
        ops[..., 0, 1, 1] = sp * s1g
        ops[..., 1, 0, 0] = sq * s1g
        ops[..., 1, 1, 1] = sq
        ops[..., 2, 0, 1] = np.sqrt(g * p)
        ops[..., 3, 1, 0] = np.sqrt(g * (1.0 - p))
        return ops
    raise AssertionError(kind)


def _validate_params(kind: str, values: Sequence[float]) -> tuple[float, ...]:
    names = CHANNEL_PARAMS[kind]
    if len(values) != len(names):
        raise ValueError(f"{kind} takes parameters {names}, got {len(values)} values")
    values = tuple(float(v) for v in values)
    if kind == "pauli":
        if min(values) < 0 or sum(values) > 1 + 1e-12:
            raise ValueError(f"Pauli probabilities {values} must be >= 0 with sum <= 1")
    elif kind != "systematic_rotation":
        for n, v in zip(names, values):
            _check_unit(n, v)
    return values


def make_channel(kind: str, *values: float) -> KrausChannel:
    kind = canonical_kind(kind)
    values = _validate_params(kind, values)
    ops = kraus_batch(kind, np.array(values, dtype=float).reshape(len(values)))
    return KrausChannel(ops, CHANNEL_PARAMS[kind], values, kind)


def identity_channel() -> KrausChannel:
    return make_channel("identity")


def amplitude_damping(gamma: float) -> KrausChannel:
    """``K0 = |0><0| + sqrt(1-gamma)|1><1|``, ``K1 = sqrt(gamma)|0><1|``."""
    return make_channel("amplitude_damping", gamma)


def phase_damping(p: float) -> KrausChannel:
    """``K0 = |0><0| + sqrt(1-p)|1><1|``, ``K1 = sqrt(p)|1><1|``."""
    return make_channel("phase_damping", p)


def systematic_rotation(theta: float) -> KrausChannel:
    """Unitary ``exp(-i theta Z)``."""
    return make_channel("systematic_rotation", theta)


def generalized_amplitude_damping(gamma: float, p: float) -> KrausChannel:
    """Four-operator damping toward a thermal state with ground population ``p``."""
    return make_channel("generalized_amplitude_damping", gamma, p)


def ad_plus_dephase(gamma: float, p: float) -> KrausChannel:
    """Phase damping applied after amplitude damping."""
    return make_channel("ad_plus_dephase", gamma, p)


def pauli_channel(px: float, py: float, pz: float) -> KrausChannel:
    return make_channel("pauli", px, py, pz)


def superoperator_from_kraus(ops: np.ndarray) -> np.ndarray:
    """Stacked ``(..., K, 2, 2)`` Kraus sets to ``(..., 4, 4)`` superoperators."""
    return np.einsum("...kij,...klm->...iljm", ops, np.conj(ops)).reshape(ops.shape[:-3] + (4, 4))


def to_superoperator(ch: KrausChannel) -> np.ndarray:
    """4x4 matrix with ``S @ vec(rho) = vec(E(rho))`` for row-major ``vec``."""
    return superoperator_from_kraus(ch.kraus_ops)


def pauli_traces(ch: KrausChannel, rho: np.ndarray) -> tuple[float, float, float]:
    """``(Tr X E(rho), Tr Y E(rho), Tr Z E(rho))``."""
    out = ch.apply(np.asarray(rho, dtype=complex))
    return tuple(float(np.real(np.trace(s @ out))) for s in (_X, _Y, _Z))


@dataclass(frozen=True)
class ParameterDomain:
    """Closed box ``lo <= value <= hi`` per parameter, in packing order."""

    names: tuple[str, ...]
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float).reshape(-1)
        hi = np.asarray(self.upper, dtype=float).reshape(-1)
        if len(lo) != len(self.names) or len(hi) != len(self.names):
            raise ValueError("domain bounds must match the parameter names")
        if np.any(lo >= hi):
            bad = [n for n, a, b in zip(self.names, lo, hi) if a >= b]
            raise ValueError(f"empty domain interval for {bad}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return len(self.names)

    def contains(self, alpha: np.ndarray) -> np.ndarray:
        a = np.asarray(alpha, dtype=float)
        return np.all((a >= self.lower) & (a <= self.upper), axis=-1)

    @property
    def volume(self) -> float:
        return float(np.prod(self.upper - self.lower))


@dataclass(frozen=True)
class NoiseFamily:
    """A channel kind assigned to every qubit of a layout, with free parameters.

    ``uniform`` families share one value per parameter across qubits;
    nonuniform families have a slot per ``(qubit, parameter)`` packed
    lexicographically by qubit index then parameter name.  Parameters named
    in ``fixed`` are held constant and removed from the packed vector.
    """

    kind: str
    n_qubits: int
    uniform: bool = True
    fixed: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "kind", canonical_kind(self.kind))
        unknown = set(self.fixed) - set(CHANNEL_PARAMS[self.kind])
        if unknown:
            raise ValueError(f"fixed parameters {sorted(unknown)} not in {self.kind}")
        object.__setattr__(self, "fixed", dict(self.fixed))

    @property
    def channel_params(self) -> tuple[str, ...]:
        return CHANNEL_PARAMS[self.kind]

    @property
    def free_params(self) -> tuple[str, ...]:
        return tuple(sorted(n for n in self.channel_params if n not in self.fixed))

    @property
    def param_names(self) -> tuple[str, ...]:
        if self.uniform:
            return self.free_params
        return tuple(f"{n}[{q}]" for q in range(self.n_qubits) for n in self.free_params)

    @property
    def dim(self) -> int:
        return len(self.param_names)

    def default_domain(self) -> ParameterDomain:
        base = DEFAULT_DOMAINS[self.kind]
        names = self.param_names
        free = self.free_params
        lo = [base[free[i % len(free)]][0] for i in range(len(names))] if free else []
        hi = [base[free[i % len(free)]][1] for i in range(len(names))] if free else []
        return ParameterDomain(names, np.array(lo), np.array(hi))

    def domain(self, bounds: Mapping[str, tuple[float, float]] | None = None) -> ParameterDomain:
        """Domain with per-parameter overrides keyed by channel parameter name."""
        d = self.default_domain()
        if not bounds:
            return d
        free = self.free_params
        lo, hi = d.lower.copy(), d.upper.copy()
        for i in range(d.dim):
            name = free[i % len(free)]
            if name in bounds:
                lo[i], hi[i] = bounds[name]
        return ParameterDomain(d.names, lo, hi)

    def pack(self, per_qubit: np.ndarray) -> np.ndarray:
        """``(..., n_qubits, n_channel_params)`` values to packed vectors."""
        per_qubit = np.asarray(per_qubit, dtype=float)
        idx = [self.channel_params.index(n) for n in self.free_params]
        free = per_qubit[..., idx]
        if self.uniform:
            return free[..., 0, :]
        return free.reshape(per_qubit.shape[:-2] + (-1,))

    def per_qubit(self, alpha: np.ndarray) -> np.ndarray:
        """Packed vectors ``(..., dim)`` to full channel parameters ``(..., n_qubits, n_channel_params)``."""
        alpha = np.asarray(alpha, dtype=float)
        if alpha.shape[-1] != self.dim:
            raise ValueError(f"expected {self.dim} packed parameters, got {alpha.shape[-1]}")
        batch = alpha.shape[:-1]
        nf = len(self.free_params)
        out = np.empty(batch + (self.n_qubits, len(self.channel_params)))
        for name, value in self.fixed.items():
            out[..., self.channel_params.index(name)] = value
        if nf:
            if self.uniform:
                free = np.broadcast_to(alpha[..., None, :], batch + (self.n_qubits, nf))
            else:
                free = alpha.reshape(batch + (self.n_qubits, nf))
            for k, name in enumerate(self.free_params):
                out[..., self.channel_params.index(name)] = free[..., k]
        return out

    def kraus(self, alpha: np.ndarray) -> np.ndarray:
        """Kraus operators ``(..., n_qubits, K, 2, 2)``."""
        return kraus_batch(self.kind, self.per_qubit(alpha))

    def validate(self, alpha: np.ndarray) -> None:
        if not self.channel_params:
            return
        full = self.per_qubit(alpha)
        for row in full.reshape(-1, len(self.channel_params)):
            _validate_params(self.kind, row)

    def model(self, alpha: Sequence[float]) -> NoiseModel:
        return NoiseModel(self, np.asarray(alpha, dtype=float))


@dataclass(frozen=True)
class NoiseModel:
    """A :class:`NoiseFamily` at a fixed packed parameter vector."""

    family: NoiseFamily
    alpha: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.alpha, dtype=float).reshape(-1)
        object.__setattr__(self, "alpha", a)
        self.family.validate(a)

    @classmethod
    def uniform(cls, kind: str, n_qubits: int, *values: float) -> NoiseModel:
        fam = NoiseFamily(kind, n_qubits, uniform=True)
        full = dict(zip(CHANNEL_PARAMS[fam.kind], values))
        return cls(fam, np.array([full[n] for n in fam.free_params]))

    @property
    def n_qubits(self) -> int:
        return self.family.n_qubits

    def channel_for_qubit(self, q: int) -> KrausChannel:
        vals = self.family.per_qubit(self.alpha)[q]
        return make_channel(self.family.kind, *vals)

    def kraus(self) -> np.ndarray:
        return self.family.kraus(self.alpha)


@dataclass(frozen=True)
class NoiseSchedule:
    """Time dependence of one channel parameter, evaluated per cycle ``t``.

    ``constant``: ``a``; ``line``: ``a + b t``; ``sine``:
    ``a (b + sin(2 pi omega t))``.  With ``per_qubit_offsets`` the ``a``
    coefficient of qubit ``q`` is multiplied by ``offset[q]``, so
    ``offset = q_row*cols + q_col + 1`` gives ``a(3i + j + 1) + b t`` on a
    3-column grid.
    """

    kind: str
    a: float
    b: float = 0.0
    omega: float = 0.0
    per_qubit_offsets: tuple[float, ...] | None = None
    domain: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        if self.kind not in ("constant", "line", "sine"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")

    @classmethod
    def linear_ramp_offsets(cls, kind: str, n_qubits: int, a: float, b: float = 0.0,
                            omega: float = 0.0, domain=(0.0, 1.0)) -> NoiseSchedule:
        return cls(kind, a, b, omega, tuple(float(q + 1) for q in range(n_qubits)), tuple(domain))

    def _raw(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        a = self.a
        if self.per_qubit_offsets is not None:
            a = self.a * np.asarray(self.per_qubit_offsets)
            t = t[..., None]
        if self.kind == "constant":
            return a + 0.0 * t
        if self.kind == "line":
            return a + self.b * t
        return a * (self.b + np.sin(2 * np.pi * self.omega * t))

    def __call__(self, t) -> np.ndarray:
        return schedule_eval(self, t)


def schedule_eval(s: NoiseSchedule, t) -> np.ndarray | float:
    """Parameter value(s) at cycle ``t`` (scalar or array); raises outside ``s.domain``."""
    if np.any(np.asarray(t) < 0):
        raise ValueError("cycle index must be non-negative")
    val = s._raw(t)
    lo, hi = s.domain
    if np.any(val < lo - 1e-12) or np.any(val > hi + 1e-12):
        bad = np.asarray(val)[(val < lo) | (val > hi)]
        raise ValueError(f"schedule value {bad.flat[0]:.6g} leaves the domain [{lo}, {hi}]")
    if np.ndim(val) == 0:
        return float(val)
    return val


@dataclass(frozen=True)
class TimeVaryingNoise:
    """A noise family whose free parameters follow schedules in the cycle index.

    ``schedules`` maps each free channel parameter name to a schedule; a
    schedule with per-qubit offsets drives a nonuniform family.
    """

    family: NoiseFamily
    schedules: Mapping[str, NoiseSchedule]

    def __post_init__(self):
        missing = set(self.family.free_params) - set(self.schedules)
        if missing:
            raise ValueError(f"no schedule for free parameters {sorted(missing)}")

    def alpha(self, t) -> np.ndarray:
        """Packed parameter vectors, shape ``(len(t), dim)`` (or ``(dim,)`` for scalar ``t``)."""
        scalar = np.ndim(t) == 0
        t = np.atleast_1d(np.asarray(t, dtype=float))
        nq = self.family.n_qubits
        full = np.empty((len(t), nq, len(self.family.channel_params)))
        for name, value in self.family.fixed.items():
            full[..., self.family.channel_params.index(name)] = value
        for name in self.family.free_params:
            v = np.asarray(schedule_eval(self.schedules[name], t), dtype=float)
            if v.ndim == 1:
                v = np.broadcast_to(v[:, None], (len(t), nq))
            full[..., self.family.channel_params.index(name)] = v
        packed = self.family.pack(full)
        return packed[0] if scalar else packed
