"""Rotated surface-code lattice, Pauli strings and classical syndrome arithmetic.

Data qubits sit on an ``rows x cols`` grid and are indexed row-major,
``q = r * cols + c``.  Plaquette ``(i, j)`` touches the qubits
``(i, j), (i, j+1), (i+1, j), (i+1, j+1)`` that exist on the grid, so bulk
plaquettes have ``0 <= i < rows-1`` and ``0 <= j < cols-1`` while boundary
plaquettes sit at ``i in {-1, rows-1}`` or ``j in {-1, cols-1}``.  Plaquette
types follow a checkerboard, X when ``i + j`` is even; the top and bottom
boundaries carry X-type checks and the left and right boundaries Z-type
checks.  With that convention ``X_L`` is the left column X chain and ``Z_L``
the top row Z chain.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "PauliString",
    "Generator",
    "SurfaceCodeLayout",
    "SyndromeRecord",
    "SyndromeBatch",
    "build_rotated_layout",
    "commutes",
    "syndrome_of_error",
    "read_syndrome_file",
    "write_syndrome_file",
]

_AXES = ("X", "Y", "Z")
_XZ = {"X": (1, 0), "Y": (1, 1), "Z": (0, 1)}


@dataclass(frozen=True)
class PauliString:
    """Tensor product of single-qubit Paulis with an implicit +1 phase.

    ``terms`` holds ``(qubit, axis)`` pairs with ``axis`` in ``{"X", "Y", "Z"}``;
    the empty tuple is the identity.
    """

    terms: tuple[tuple[int, str], ...] = ()

    def __post_init__(self):
        terms = tuple(sorted((int(q), str(a).upper()) for q, a in self.terms))
        qubits = [q for q, _ in terms]
        if len(set(qubits)) != len(qubits):
            raise ValueError(f"repeated qubit index in Pauli string: {qubits}")
        for q, a in terms:
            if a not in _AXES:
                raise ValueError(f"unknown Pauli axis {a!r}")
            if q < 0:
                raise ValueError(f"negative qubit index {q}")
        object.__setattr__(self, "terms", terms)

    @classmethod
    def from_xz(cls, x: Sequence[int], z: Sequence[int]) -> PauliString:
        x = np.asarray(x, dtype=np.uint8) & 1
        z = np.asarray(z, dtype=np.uint8) & 1
        terms = []
        for q, (xb, zb) in enumerate(zip(x, z)):
            if xb and zb:
                terms.append((q, "Y"))
            elif xb:
                terms.append((q, "X"))
            elif zb:
                terms.append((q, "Z"))
        return cls(tuple(terms))

    @classmethod
    def single(cls, qubit: int, axis: str) -> PauliString:
        return cls(((qubit, axis),))

    def to_xz(self, n_qubits: int) -> tuple[np.ndarray, np.ndarray]:
        x = np.zeros(n_qubits, dtype=np.uint8)
        z = np.zeros(n_qubits, dtype=np.uint8)
        for q, a in self.terms:
            if q >= n_qubits:
                raise ValueError(f"qubit {q} outside a {n_qubits}-qubit register")
            x[q], z[q] = _XZ[a]
        return x, z

    @property
    def weight(self) -> int:
        return len(self.terms)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(q for q, _ in self.terms)

    def max_qubit(self) -> int:
        return max(self.support, default=-1)

    def __mul__(self, other: PauliString) -> PauliString:
        """Product up to phase."""
        n = max(self.max_qubit(), other.max_qubit()) + 1
        x1, z1 = self.to_xz(n)
        x2, z2 = other.to_xz(n)
        return PauliString.from_xz(x1 ^ x2, z1 ^ z2)

    def __str__(self) -> str:
        if not self.terms:
            return "I"
        return " ".join(f"{a}{q}" for q, a in self.terms)


def commutes(a: PauliString, b: PauliString) -> bool:
    """True iff ``a`` and ``b`` differ in non-identity axis on an even number of qubits."""
    axes_b = dict(b.terms)
    clashes = sum(1 for q, ax in a.terms if q in axes_b and axes_b[q] != ax)
    return clashes % 2 == 0


@dataclass(frozen=True)
class Generator:
    pauli: PauliString
    kind: str  # "X" or "Z"
    coord: tuple[int, int]

    @property
    def support(self) -> tuple[int, ...]:
        return self.pauli.support


@dataclass(frozen=True)
class SurfaceCodeLayout:
    rows: int
    cols: int
    generators: tuple[Generator, ...]
    logical_x: PauliString
    logical_z: PauliString

    @property
    def qubit_count(self) -> int:
        return self.rows * self.cols

    @property
    def n_generators(self) -> int:
        return len(self.generators)

    @property
    def distance(self) -> int:
        return min(self.rows, self.cols)

    def qubit(self, r: int, c: int) -> int:
        return r * self.cols + c

    def position(self, q: int) -> tuple[int, int]:
        return divmod(q, self.cols)

    @cached_property
    def check_matrix(self) -> tuple[np.ndarray, np.ndarray]:
        """Binary symplectic rows ``(hx, hz)``, one row per generator."""
        n = self.qubit_count
        hx = np.zeros((self.n_generators, n), dtype=np.uint8)
        hz = np.zeros((self.n_generators, n), dtype=np.uint8)
        for i, g in enumerate(self.generators):
            hx[i], hz[i] = g.pauli.to_xz(n)
        return hx, hz

    @cached_property
    def x_generators(self) -> tuple[int, ...]:
        return tuple(i for i, g in enumerate(self.generators) if g.kind == "X")

    @cached_property
    def z_generators(self) -> tuple[int, ...]:
        return tuple(i for i, g in enumerate(self.generators) if g.kind == "Z")


def _plaquette_kind(i: int, j: int) -> str:
    return "X" if (i + j) % 2 == 0 else "Z"


def build_rotated_layout(rows: int, cols: int | None = None) -> SurfaceCodeLayout:
    """Rotated surface code on a ``rows x cols`` qubit grid (square if ``cols`` is omitted)."""
    cols = rows if cols is None else cols
    if int(rows) != rows or int(cols) != cols or rows < 1 or cols < 1:
        raise ValueError(f"layout dimensions must be positive integers, got {rows}x{cols}")
    rows, cols = int(rows), int(cols)

    generators = []
    for i in range(-1, rows):
        for j in range(-1, cols):
            corners = [
                (r, c)
                for r, c in ((i, j), (i, j + 1), (i + 1, j), (i + 1, j + 1))
                if 0 <= r < rows and 0 <= c < cols
            ]
            if len(corners) < 2:
                continue
            kind = _plaquette_kind(i, j)
            bulk = 0 <= i < rows - 1 and 0 <= j < cols - 1
            if not bulk:
                on_top_or_bottom = (i == -1 or i == rows - 1) and 0 <= j < cols - 1
                on_left_or_right = (j == -1 or j == cols - 1) and 0 <= i < rows - 1
                if on_top_or_bottom and kind != "X":
                    continue
                if on_left_or_right and kind != "Z":
                    continue
                if not (on_top_or_bottom or on_left_or_right):
                    continue
            terms = tuple((r * cols + c, kind) for r, c in corners)
            generators.append(Generator(PauliString(terms), kind, (i, j)))

    # Row-major plaquette order; at most one plaquette per coordinate.
    generators.sort(key=lambda g: (g.coord, 0 if g.kind == "Z" else 1))
    logical_x = PauliString(tuple((r * cols, "X") for r in range(rows)))
    logical_z = PauliString(tuple((c, "Z") for c in range(cols)))
    return SurfaceCodeLayout(rows, cols, tuple(generators), logical_x, logical_z)


@dataclass
class SyndromeRecord:
    """Outcomes of one measurement cycle, +1/-1 in canonical generator order."""

    outcomes: np.ndarray
    cycle_index: int = 0

    def __post_init__(self):
        out = np.asarray(self.outcomes, dtype=np.int8).reshape(-1)
        if not np.all((out == 1) | (out == -1)):
            raise ValueError("syndrome outcomes must be +1 or -1")
        self.outcomes = out

    def __len__(self) -> int:
        return len(self.outcomes)

    def __mul__(self, other: SyndromeRecord) -> SyndromeRecord:
        return SyndromeRecord(self.outcomes * other.outcomes, self.cycle_index)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SyndromeRecord):
            return NotImplemented
        return np.array_equal(self.outcomes, other.outcomes)

    @property
    def is_trivial(self) -> bool:
        return bool(np.all(self.outcomes == 1))


@dataclass
class SyndromeBatch:
    """Consecutive cycles of syndrome data, shape ``(n_cycles, n_generators)``."""

    outcomes: np.ndarray
    first_cycle: int = 0

    def __post_init__(self):
        out = np.asarray(self.outcomes, dtype=np.int8)
        if out.ndim == 1:
            out = out.reshape(1, -1)
        if out.ndim != 2:
            raise ValueError("syndrome batch must be two-dimensional")
        if out.size and not np.all((out == 1) | (out == -1)):
            raise ValueError("syndrome outcomes must be +1 or -1")
        self.outcomes = out

    @classmethod
    def from_records(cls, records: Iterable[SyndromeRecord]) -> SyndromeBatch:
        records = list(records)
        first = records[0].cycle_index if records else 0
        return cls(np.stack([r.outcomes for r in records]), first)

    def __len__(self) -> int:
        return self.outcomes.shape[0]

    def __getitem__(self, i: int) -> SyndromeRecord:
        return SyndromeRecord(self.outcomes[i], self.first_cycle + i)

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @property
    def n_generators(self) -> int:
        return self.outcomes.shape[1]

    def unique_counts(self) -> tuple[np.ndarray, np.ndarray]:
        """Distinct syndromes (lexicographic) and their multiplicities."""
        if len(self) == 0:
            return self.outcomes, np.zeros(0, dtype=np.int64)
        uniq, counts = np.unique(self.outcomes, axis=0, return_counts=True)
        return uniq, counts

    def check_layout(self, layout: SurfaceCodeLayout) -> None:
        if self.n_generators != layout.n_generators:
            raise ValueError(
                f"syndrome length {self.n_generators} does not match the "
                f"{layout.rows}x{layout.cols} layout ({layout.n_generators} generators)"
            )


def syndrome_of_error(layout: SurfaceCodeLayout, error: PauliString) -> SyndromeRecord:
    """Outcome ``-1`` exactly for the generators that anticommute with ``error``."""
    ex, ez = error.to_xz(layout.qubit_count)
    hx, hz = layout.check_matrix
    flips = (hx.astype(np.int64) @ ez + hz.astype(np.int64) @ ex) % 2
    return SyndromeRecord(1 - 2 * flips.astype(np.int8))


def write_syndrome_file(
    path: str | Path, batch: SyndromeBatch, comments: Sequence[str] = ()
) -> None:
    lines = [f"# {c}" for c in comments]
    for row in batch.outcomes:
        lines.append(" ".join("+1" if v > 0 else "-1" for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def read_syndrome_file(path: str | Path, layout: SurfaceCodeLayout | None = None) -> SyndromeBatch:
    rows = []
    for lineno, raw in enumerate(Path(path).read_text(encoding="ascii").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        bad = [t for t in tokens if t not in ("+1", "-1")]
        if bad:
            raise ValueError(f"{path}:{lineno}: invalid syndrome token {bad[0]!r}")
        rows.append([1 if t == "+1" else -1 for t in tokens])
    if not rows:
        n = layout.n_generators if layout is not None else 0
        return SyndromeBatch(np.zeros((0, n), dtype=np.int8))
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise ValueError(f"{path}: ragged syndrome file (line widths {sorted(widths)})")
    batch = SyndromeBatch(np.array(rows, dtype=np.int8))
    if layout is not None:
        batch.check_layout(layout)
    return batch
