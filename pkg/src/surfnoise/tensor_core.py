"""Dense tensor algebra and 2D grid contraction by boundary MPS.

A :class:`Grid2DNetwork` stores one tensor per site with axes
``(batch, up, down, left, right, *open)``.  The leading batch axis indexes
independent networks that share a bond structure; a batch extent of 1
broadcasts against larger batches.  Diagonal bond weights (``bond_weights``)
multiply a bond elementwise and are how per-network data enter without
copying every site tensor.

:func:`contract_grid` sweeps the grid column by column.  With ``chi=None``
the boundary is kept exactly as a dense vector over the open horizontal
bonds; with an integer ``chi`` it is an MPS whose internal bonds are cut back
to ``chi`` by SVD after every column absorption.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import opt_einsum
import scipy.linalg

__all__ = [
    "DenseTensor",
    "ContractionError",
    "contract_pair",
    "svd_truncate",
    "Grid2DNetwork",
    "BoundaryMPS",
    "GridResult",
    "contract_grid",
    "naive_contract",
]

DenseTensor = np.ndarray


class ContractionError(RuntimeError):
    """A contraction produced a value outside its admissible range or failed numerically."""


def contract_pair(a: DenseTensor, b: DenseTensor, pairs: Sequence[tuple[int, int]]) -> DenseTensor:
    """Sum over the paired axes; result axes are the free axes of ``a`` then ``b``."""
    a = np.asarray(a)
    b = np.asarray(b)
    ia = [p[0] for p in pairs]
    ib = [p[1] for p in pairs]
    for i, j in pairs:
        if a.shape[i] != b.shape[j]:
            raise ValueError(
                f"extent mismatch contracting axis {i} (size {a.shape[i]}) "
                f"with axis {j} (size {b.shape[j]})"
            )
    return np.tensordot(a, b, axes=(ia, ib))


def _svd(m: np.ndarray):
    try:
        return np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError:
        pass
    try:
        if m.ndim == 2:
            return scipy.linalg.svd(m, full_matrices=False, lapack_driver="gesvd")
        flat = m.reshape(-1, *m.shape[-2:])
        parts = [scipy.linalg.svd(x, full_matrices=False, lapack_driver="gesvd") for x in flat]
        u = np.stack([p[0] for p in parts]).reshape(*m.shape[:-2], *parts[0][0].shape)
        s = np.stack([p[1] for p in parts]).reshape(*m.shape[:-2], -1)
        vh = np.stack([p[2] for p in parts]).reshape(*m.shape[:-2], *parts[0][2].shape)
        return u, s, vh
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise ContractionError(f"SVD did not converge: {exc}") from exc


def svd_truncate(
    m: DenseTensor, chi: int | None, *, cutoff: float = 0.0
) -> tuple[DenseTensor, DenseTensor, np.ndarray]:
    """Keep the ``chi`` largest singular values of ``m`` (stacked over leading axes).

    Returns ``(left, right, discarded)`` with ``left @ right ~ m``, ``left``
    holding orthonormal columns, ``right = diag(s) @ vh`` and ``discarded`` the
    root-sum-square of the dropped singular values.  Each kept left singular
    vector is phased so its largest-magnitude entry is real and positive.
    Singular values at or below ``cutoff * s_max`` are dropped as well; the
    kept count is shared across the stack.
    """
    if chi is not None and chi < 1:
        raise ValueError(f"chi must be >= 1, got {chi}")
    m = np.asarray(m)
    if m.ndim < 2:
        raise ValueError("svd_truncate needs a matrix")
    if not np.all(np.isfinite(m)):
        raise ContractionError("non-finite entries passed to svd_truncate")
    u, s, vh = _svd(m)
    k = s.shape[-1]
    if chi is not None:
        k = min(k, chi)
    if cutoff > 0 and s.shape[-1] > 0:
        smax = s[..., :1]
        keep = (s > cutoff * smax).sum(axis=-1)
        k = max(1, min(k, int(keep.max()) if keep.size else 1))
    k = max(k, 1) if s.shape[-1] else 0
    discarded = np.sqrt(np.sum(np.abs(s[..., k:]) ** 2, axis=-1))
    u = u[..., :, :k]
    s = s[..., :k]
    vh = vh[..., :k, :]

    # Deterministic gauge: largest |u_ik| in column k made real-positive.
    idx = np.argmax(np.abs(u), axis=-2)[..., None, :]
    pivot = np.take_along_axis(u, idx, axis=-2)
    mag = np.abs(pivot)
    phase = np.where(mag > 0, pivot / np.where(mag > 0, mag, 1), 1)
    u = u * np.conj(phase)
    vh = vh * np.swapaxes(phase, -1, -2)
    right = s[..., :, None] * vh
    return u, right, discarded


@dataclass
class Grid2DNetwork:
    """Square grid of site tensors ``sites[row][col]`` with axes
    ``(batch, up, down, left, right, *open)``.

    ``bond_weights`` maps ``("h", r, c)`` (bond between ``(r, c)`` and
    ``(r, c+1)``) or ``("v", r, c)`` (between ``(r, c)`` and ``(r+1, c)``) to
    an array of shape ``(batch, extent)`` multiplied elementwise onto the bond.
    """

    sites: list[list[np.ndarray]]
    bond_weights: dict[tuple[str, int, int], np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        self.validate()

    @property
    def height(self) -> int:
        return len(self.sites)

    @property
    def width(self) -> int:
        return len(self.sites[0])

    @property
    def batch_size(self) -> int:
        sizes = [t.shape[0] for row in self.sites for t in row]
        sizes += [w.shape[0] for w in self.bond_weights.values()]
        return max(sizes)

    def open_rows(self) -> list[int]:
        return [r for r, row in enumerate(self.sites) if any(t.ndim > 5 for t in row)]

    def open_shape(self) -> tuple[int, ...]:
        shape: tuple[int, ...] = ()
        for row in self.sites:
            for t in row:
                shape += t.shape[5:]
        return shape

    def validate(self) -> None:
        if not self.sites or not self.sites[0]:
            raise ValueError("empty grid")
        h, w = len(self.sites), len(self.sites[0])
        if any(len(row) != w for row in self.sites):
            raise ValueError("ragged grid")
        batches = set()
        for r in range(h):
            for c in range(w):
                t = self.sites[r][c]
                if t.ndim < 5:
                    raise ValueError(f"site ({r},{c}) needs axes (batch, up, down, left, right)")
                if not np.all(np.isfinite(t)):
                    raise ValueError(f"site ({r},{c}) has non-finite entries")
                batches.add(t.shape[0])
                _, up, down, left, right = t.shape[:5]
                if r == 0 and up != 1 or r == h - 1 and down != 1:
                    raise ValueError(f"site ({r},{c}) boundary bond must have extent 1")
                if c == 0 and left != 1 or c == w - 1 and right != 1:
                    raise ValueError(f"site ({r},{c}) boundary bond must have extent 1")
                if c + 1 < w and right != self.sites[r][c + 1].shape[3]:
                    raise ValueError(f"horizontal bond extent mismatch at ({r},{c})")
                if r + 1 < h and down != self.sites[r + 1][c].shape[1]:
                    raise ValueError(f"vertical bond extent mismatch at ({r},{c})")
        for (kind, r, c), wt in self.bond_weights.items():
            ext = self.sites[r][c].shape[4] if kind == "h" else self.sites[r][c].shape[2]
            if wt.ndim != 2 or wt.shape[1] != ext:
                raise ValueError(f"bond weight {(kind, r, c)} has shape {wt.shape}, extent {ext}")
            batches.add(wt.shape[0])
        if len(batches - {1}) > 1:
            raise ValueError(f"inconsistent batch extents {sorted(batches)}")
        if len(self.open_rows()) > 1:
            raise ValueError("open legs may appear on at most one site row")

    def mirrored(self) -> Grid2DNetwork:
        """Left-right mirror image; contracts to the same value."""
        w = self.width
        sites = [
            [np.swapaxes(row[w - 1 - c], 3, 4) for c in range(w)] for row in self.sites
        ]
        weights = {}
        for (kind, r, c), wt in self.bond_weights.items():
            if kind == "h":
                weights[("h", r, w - 2 - c)] = wt
            else:
                weights[("v", r, w - 1 - c)] = wt
        return Grid2DNetwork(sites, weights)


@dataclass
class BoundaryMPS:
    """Column boundary as an MPS; ``tensors[r]`` has axes ``(batch, left, phys, right)``."""

    tensors: list[np.ndarray]
    chi: int | None = None

    @property
    def bond_extents(self) -> list[int]:
        return [t.shape[3] for t in self.tensors[:-1]]


@dataclass
class GridResult:
    """Contraction value split as ``mantissa * exp(log_scale)`` per batch entry."""

    mantissa: np.ndarray
    log_scale: np.ndarray
    discarded: np.ndarray

    def value(self) -> np.ndarray:
        scale = np.exp(self.log_scale)
        return self.mantissa * scale.reshape(scale.shape + (1,) * (self.mantissa.ndim - 1))


def _rescale(x: np.ndarray, log_scale: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    flat = np.abs(x.reshape(x.shape[0], -1))
    m = flat.max(axis=1) if flat.shape[1] else np.ones(x.shape[0])
    ok = m > 0
    safe = np.where(ok, m, 1.0)
    x = x / safe.reshape((-1,) + (1,) * (x.ndim - 1))
    return x, log_scale + np.log(safe)


def _weight_site(net: Grid2DNetwork, r: int, c: int) -> np.ndarray:
    """Site tensor with its right and down bond weights folded in."""
    t = net.sites[r][c]
    wh = net.bond_weights.get(("h", r, c))
    if wh is not None:
        t = t * wh.reshape(wh.shape[0], 1, 1, 1, -1, *(1,) * (t.ndim - 5))
    wv = net.bond_weights.get(("v", r, c))
    if wv is not None:
        t = t * wv.reshape(wv.shape[0], 1, -1, 1, 1, *(1,) * (t.ndim - 5))
    return t


_GEMM_MIN_POST = 4


def _sweep_exact(net: Grid2DNetwork) -> GridResult:
    h, w = net.height, net.width
    batch = net.batch_size
    dtype = np.result_type(*[t.dtype for row in net.sites for t in row],
                           *[x.dtype for x in net.bond_weights.values()])
    # state axes: (batch, H_0..H_{h-1}, *open)
    state = np.ones((batch,) + (1,) * h, dtype=dtype)
    n_open = 0
    log_scale = np.zeros(batch)
    for c in range(w):
        # insert the running vertical bond before H_0
        state = state[:, None]
        for r in range(h):
            site = net.sites[r][c]
            sb = site.shape[0]
            _, up, down, left, right = site.shape[:5]
            opn = site.shape[5:]
            pre = state.shape[1 : 1 + r]
            post = state.shape[3 + r :]
            k = up * left
            s4 = state.reshape(batch, int(np.prod(pre, dtype=int)), k, int(np.prod(post, dtype=int)))
            nopn = len(opn)
            # (sb, right*down*open, up*left) applied from the left keeps pre/post in place
            mat = np.transpose(site, (0, 4, 2, *range(5, site.ndim), 1, 3)).reshape(sb, -1, k)
            n_pre, n_post = s4.shape[1], s4.shape[3]
            if n_post < _GEMM_MIN_POST:
                # few trailing entries: one large product beats many tiny ones
                moved = np.moveaxis(s4, 2, 3)
                if sb == 1:
                    res = moved.reshape(-1, k) @ mat[0].T
                else:
                    res = np.matmul(moved.reshape(batch, -1, k), np.swapaxes(mat, 1, 2))
                res = res.reshape(batch, n_pre, n_post, -1)
                res = np.moveaxis(res, 2, 3)
            else:
                res = np.matmul(mat[:, None], s4)
            res = res.reshape(batch, n_pre, right, down, *opn, n_post)
            if nopn:
                # -> (batch, pre, right, down, post, open)
                res = np.moveaxis(res, range(4, 4 + nopn), range(-nopn, 0))
            post_fixed = post[: len(post) - n_open]
            post_open = post[len(post) - n_open :]
            state = res.reshape(batch, *pre, right, down, *post_fixed, *post_open, *opn)
            n_open += nopn
            wv = net.bond_weights.get(("v", r, c))
            if wv is not None:
                shape = [wv.shape[0]] + [1] * (state.ndim - 1)
                shape[2 + r] = wv.shape[1]
                state = state * wv.reshape(shape)
        state = state.reshape(state.shape[: 1 + h] + state.shape[2 + h :])
        for r in range(h):
            wh = net.bond_weights.get(("h", r, c))
            if wh is not None:
                shape = [wh.shape[0]] + [1] * (state.ndim - 1)
                shape[1 + r] = wh.shape[1]
                state = state * wh.reshape(shape)
        state, log_scale = _rescale(state, log_scale)
    mant = state.reshape((batch,) + state.shape[1 + h :])
    return GridResult(mant, log_scale, np.zeros(batch))


def _mps_compress(tensors: list[np.ndarray], chi: int | None, cutoff: float) -> np.ndarray:
    """QR sweep down, truncating SVD sweep up. Returns squared discarded weight."""
    n = len(tensors)
    batch = tensors[0].shape[0]
    for r in range(n - 1):
        t = tensors[r]
        b, dl, p, dr = t.shape
        q, rmat = np.linalg.qr(t.reshape(b, dl * p, dr))
        k = q.shape[-1]
        tensors[r] = q.reshape(b, dl, p, k)
        nxt = tensors[r + 1]
        tensors[r + 1] = np.einsum("bij,bjpk->bipk", rmat, nxt)
    # normalize so relative discards are meaningful
    norm = np.sqrt(np.sum(np.abs(tensors[-1].reshape(batch, -1)) ** 2, axis=1))
    disc2 = np.zeros(batch)
    for r in range(n - 1, 0, -1):
        t = tensors[r]
        b, dl, p, dr = t.shape
        u, right, discarded = svd_truncate(t.reshape(b, dl, p * dr), chi, cutoff=cutoff)
        k = u.shape[-1]
        tensors[r] = right.reshape(b, k, p, dr)
        tensors[r - 1] = np.einsum("bipj,bjk->bipk", tensors[r - 1], u)
        safe = np.where(norm > 0, norm, 1.0)
        disc2 += (discarded / safe) ** 2
    # right factors carry singular values; move norm into the top tensor
    for r in range(n - 1, 0, -1):
        t = tensors[r]
        b, dl, p, dr = t.shape
        q, rmat = np.linalg.qr(np.swapaxes(t.reshape(b, dl, p * dr), 1, 2))
        k = q.shape[-1]
        tensors[r] = np.swapaxes(q, 1, 2).reshape(b, k, p, dr)
        tensors[r - 1] = np.einsum("bipj,bkj->bipk", tensors[r - 1], rmat)
    return disc2


def _sweep_mps(net: Grid2DNetwork, chi: int | None, cutoff: float) -> GridResult:
    h, w = net.height, net.width
    batch = net.batch_size
    opn_rows = net.open_rows()
    if opn_rows and opn_rows[0] != 0:
        raise ValueError("boundary-MPS contraction supports open legs on the top row only")
    dtype = np.result_type(*[t.dtype for row in net.sites for t in row],
                           *[x.dtype for x in net.bond_weights.values()])
    mps = BoundaryMPS([np.ones((batch, 1, 1, 1), dtype=dtype) for _ in range(h)], chi)
    log_scale = np.zeros(batch)
    disc2 = np.zeros(batch)
    open_shape: tuple[int, ...] = ()
    for c in range(w):
        new = []
        for r in range(h):
            a = mps.tensors[r]
            site = _weight_site(net, r, c)
            opn = site.shape[5:]
            site = site.reshape(site.shape[:5] + (-1,))  # fuse open legs
            # a: (b, l, p, rr); site: (b, u, d, p, q, o)
            t = np.einsum("blpr,budpqo->bluoqrd", a, site)
            b_, l, u, o, q, rr, d = t.shape
            new.append(t.reshape(b_, l * u * o, q, rr * d))
            if r == 0:
                open_shape = open_shape + opn
        mps.tensors = new
        disc2 += _mps_compress(mps.tensors, chi, cutoff)
        top = mps.tensors[0]
        top, log_scale = _rescale(top, log_scale)
        mps.tensors[0] = top
    # all physical extents are 1 now: multiply the chain
    acc = mps.tensors[0][:, :, 0, :]
    for t in mps.tensors[1:]:
        acc = np.einsum("bij,bjk->bik", acc, t[:, :, 0, :])
    mant = acc[:, :, 0].reshape((batch,) + open_shape)
    return GridResult(mant, log_scale, np.sqrt(disc2))


def contract_grid(
    net: Grid2DNetwork,
    chi: int | None = None,
    *,
    direction: str = "right",
    method: str | None = None,
    cutoff: float = 1e-14,
    return_result: bool = False,
):
    """Contract ``net`` to one value (or open-leg tensor) per batch entry.

    ``chi=None`` is exact; ``method`` then selects the dense-boundary sweep
    (``"dense"``, default) or an MPS sweep that only drops singular values below
    ``cutoff`` (``"mps"``).  ``direction="left"`` sweeps right-to-left.
    """
    if direction not in ("right", "left"):
        raise ValueError(f"direction must be 'right' or 'left', got {direction!r}")
    if direction == "left":
        net = net.mirrored()
    if chi is None and method in (None, "dense"):
        result = _sweep_exact(net)
    else:
        if chi is not None and chi < 1:
            raise ValueError(f"chi must be >= 1, got {chi}")
        result = _sweep_mps(net, chi, cutoff if chi is None else 0.0)
    if not np.all(np.isfinite(result.mantissa)):
        raise ContractionError("grid contraction produced non-finite values")
    return result if return_result else result.value()


def naive_contract(net: Grid2DNetwork) -> np.ndarray:
    """Single einsum over every tensor of the network (exact, small networks only)."""
    counter = iter(range(10**6))
    letters = (opt_einsum.get_symbol(i) for i in counter)
    batch_lbl = next(letters)
    h, w = net.height, net.width
    hl = {(r, c): next(letters) for r in range(h) for c in range(w + 1)}
    vl = {(r, c): next(letters) for r in range(h + 1) for c in range(w)}
    operands, subs, out = [], [], [batch_lbl]
    for r in range(h):
        for c in range(w):
            t = net.sites[r][c]
            sub = batch_lbl + vl[r, c] + vl[r + 1, c] + hl[r, c] + hl[r, c + 1]
            for _ in t.shape[5:]:
                o = next(letters)
                sub += o
                out.append(o)
            operands.append(t)
            subs.append(sub)
    for (kind, r, c), wt in net.bond_weights.items():
        lbl = hl[r, c + 1] if kind == "h" else vl[r + 1, c]
        operands.append(wt)
        subs.append(batch_lbl + lbl)
    expr = ",".join(subs) + "->" + "".join(out)
    batch = net.batch_size
    return opt_einsum.contract(
        expr, *[np.broadcast_to(o, (batch,) + o.shape[1:]) for o in operands], optimize="greedy"
    )
