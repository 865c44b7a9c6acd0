"""Bayesian estimation: Metropolis-Hastings for stationary noise, a bootstrap
particle filter for drifting noise, and the resampling and summary helpers
they share.

All likelihood arithmetic is in log space.  Proposals that leave the prior box
have zero prior density: the chain rejects them, and the particle filter keeps
the particle where it was.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .likelihood import get_evaluator
from .noise_models import NoiseFamily, ParameterDomain
from .surface_code import SurfaceCodeLayout, SyndromeBatch

__all__ = [
    "rng_stream",
    "PriorBox",
    "RandomWalkProposal",
    "ChainTrace",
    "ParticleEnsemble",
    "EstimationSeries",
    "metropolis_hastings",
    "run_mcmc",
    "eap",
    "systematic_resample",
    "effective_sample_size",
    "run_smc",
    "autocorrelation_time",
]

FMT = "{:.17g}"


def rng_stream(seed: int, *stream_id: int) -> np.random.Generator:
    """Independent generator for ``stream_id`` under master ``seed`` (SeedSequence spawn keys)."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(s) for s in stream_id)))


@dataclass(frozen=True)
class PriorBox:
    """Uniform prior over a :class:`ParameterDomain`."""

    domain: ParameterDomain

    @property
    def dim(self) -> int:
        return self.domain.dim

    def log_density(self, alpha: np.ndarray) -> np.ndarray:
        inside = self.domain.contains(alpha)
        return np.where(inside, -np.log(self.domain.volume), -np.inf)

    def contains(self, alpha) -> np.ndarray:
        return self.domain.contains(alpha)

    def sample(self, rng: np.random.Generator, n: int | None = None) -> np.ndarray:
        size = (self.dim,) if n is None else (n, self.dim)
        return self.domain.lower + (self.domain.upper - self.domain.lower) * rng.random(size)

    def mean(self) -> np.ndarray:
        return 0.5 * (self.domain.lower + self.domain.upper)


@dataclass(frozen=True)
class RandomWalkProposal:
    """Symmetric Gaussian random walk with per-parameter widths."""

    widths: np.ndarray

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.widths, dtype=float))
        if np.any(w < 0):
            raise ValueError("proposal widths must be non-negative")
        object.__setattr__(self, "widths", w)

    @classmethod
    def uniform_width(cls, dim: int, width: float = 0.02) -> RandomWalkProposal:
        return cls(np.full(dim, width))

    def propose(self, alpha: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        alpha = np.asarray(alpha, dtype=float)
        return alpha + self.widths * rng.standard_normal(alpha.shape)

    def log_density(self, to: np.ndarray, frm: np.ndarray) -> float:
        w = self.widths
        live = w > 0
        d = (np.asarray(to) - np.asarray(frm))[..., live] / w[live]
        return float(-0.5 * np.sum(d**2) - np.sum(np.log(np.sqrt(2 * np.pi) * w[live])))


def autocorrelation_time(x: np.ndarray, c: float = 5.0) -> np.ndarray:
    """Integrated autocorrelation time per column (FFT estimate, self-consistent window)."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n = x.shape[0]
    out = np.ones(x.shape[1])
    if n < 4:
        return out
    for j in range(x.shape[1]):
        y = x[:, j] - x[:, j].mean()
        var = np.dot(y, y)
        if var == 0:
            continue
        f = np.fft.rfft(y, n=2 * n)
        acf = np.fft.irfft(f * np.conj(f))[:n] / var
        taus = 2 * np.cumsum(acf) - 1
        window = np.arange(n) >= c * taus
        m = int(np.argmax(window)) if np.any(window) else n - 1
        out[j] = max(taus[m], 1.0)
    return out


@dataclass
class ChainTrace:
    """Kept Metropolis-Hastings samples ``alpha^s .. alpha^T`` (optionally thinned)."""

    samples: np.ndarray
    log_likelihoods: np.ndarray
    accepted_flags: np.ndarray
    burn_in: int
    total: int
    thin: int = 1
    param_names: tuple[str, ...] = ()
    autocorr_time: np.ndarray | None = None
    warnings: list[str] = field(default_factory=list)

    @property
    def accepted(self) -> int:
        return int(self.accepted_flags.sum())

    @property
    def acceptance_ratio(self) -> float:
        return self.accepted / max(self.total, 1)

    def eap(self) -> np.ndarray:
        return eap(self.samples)

    def quantiles(self, qs: Sequence[float] = (0.025, 0.5, 0.975)) -> np.ndarray:
        return np.quantile(self.samples, qs, axis=0)

    def to_csv(self, path: str | Path) -> None:
        steps = self.burn_in + self.thin * np.arange(len(self.samples))
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step", *self.param_names, "log_likelihood", "accepted"])
            for st, a, ll, acc in zip(steps, self.samples, self.log_likelihoods,
                                      self.accepted_flags[steps]):
                w.writerow([int(st), *(FMT.format(v) for v in a), FMT.format(ll), int(acc)])


def metropolis_hastings(
    log_likelihood: Callable[[np.ndarray], float],
    prior: PriorBox,
    proposal: RandomWalkProposal,
    total: int,
    burn_in: int,
    rng: np.random.Generator,
    initial: np.ndarray | None = None,
    thin: int = 1,
    param_names: tuple[str, ...] = (),
) -> ChainTrace:
    """Metropolis-Hastings with a symmetric proposal and a box prior.

    ``total`` transitions produce ``alpha^0 .. alpha^total``; the samples
    ``alpha^burn_in .. alpha^total`` are kept (every ``thin``-th).  Each
    transition evaluates the likelihood once; the current value is cached.
    """
    if not total > burn_in >= 0:
        raise ValueError(f"need total > burn_in >= 0, got total={total}, burn_in={burn_in}")
    if thin < 1:
        raise ValueError("thin must be >= 1")
    alpha = prior.sample(rng) if initial is None else np.asarray(initial, dtype=float)
    ll = log_likelihood(alpha)
    chain = np.empty((total + 1, prior.dim))
    lls = np.empty(total + 1)
    acc = np.zeros(total + 1, dtype=np.int8)
    chain[0], lls[0] = alpha, ll
    for i in range(total):
        cand = proposal.propose(alpha, rng)
        r = rng.random()
        if prior.contains(cand):
            ll_c = log_likelihood(cand)
            if ll_c == -np.inf:
                log_ratio = -np.inf
            else:
                log_ratio = ll_c - ll
                log_ratio += float(prior.log_density(cand) - prior.log_density(alpha))
            if log_ratio >= 0 or np.log(r) < log_ratio:
                alpha, ll = cand, ll_c
                acc[i + 1] = 1
        chain[i + 1], lls[i + 1] = alpha, ll
    kept = slice(burn_in, total + 1, thin)
    trace = ChainTrace(chain[kept].copy(), lls[kept].copy(), acc, burn_in, total, thin, param_names)
    trace.autocorr_time = autocorrelation_time(chain[burn_in:])
    if trace.accepted == 0:
        msg = f"chain rejected all {total} proposals; widen or shrink the proposal"
        trace.warnings.append(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return trace


def run_mcmc(
    batch: SyndromeBatch,
    layout: SurfaceCodeLayout,
    family: NoiseFamily,
    prior: PriorBox,
    proposal: RandomWalkProposal,
    total: int,
    burn_in: int,
    chi: int | None = None,
    rng: np.random.Generator | None = None,
    kind: str = "mixed_L",
    thin: int = 1,
    initial: np.ndarray | None = None,
) -> ChainTrace:
    """Posterior samples of the packed noise parameters given i.i.d. syndrome cycles."""
    rng = np.random.default_rng() if rng is None else rng
    batch.check_layout(layout)
    ev = get_evaluator(layout, family, kind, chi)
    uniq, counts = batch.unique_counts()

    def loglik(alpha):
        lp = ev.log_probabilities(alpha, uniq)
        return -np.inf if np.any(np.isneginf(lp)) else float(np.dot(counts, lp))

    return metropolis_hastings(loglik, prior, proposal, total, burn_in, rng, initial, thin,
                               family.param_names)


def eap(samples, weights=None) -> np.ndarray:
    """Posterior mean: plain mean of chain samples or weighted mean of particles."""
    if isinstance(samples, ParticleEnsemble):
        return samples.eap()
    x = np.asarray(samples, dtype=float)
    if x.shape[0] == 0:
        raise ValueError("no samples")
    if weights is None:
        return x.mean(axis=0)
    w = np.asarray(weights, dtype=float)
    return np.tensordot(w / w.sum(), x, axes=(0, 0))


def _check_normalized(weights: np.ndarray) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
        raise ValueError(f"weights must be non-negative and sum to 1 (sum={w.sum():.12g})")
    return w


def systematic_resample(weights, rng: np.random.Generator) -> np.ndarray:
    """Indices of the particles copied by systematic resampling.

    One offset ``u0 ~ U[0, 1/N)``; slot ``i`` takes the first particle whose
    cumulative weight exceeds ``u0 + i/N`` (so zero-weight particles are never picked).
    """
    w = _check_normalized(weights)
    n = len(w)
    c = np.cumsum(w)
    c[-1] = 1.0
    u = rng.random() / n + np.arange(n) / n
    return np.searchsorted(c, u, side="right").clip(max=n - 1)


def effective_sample_size(weights) -> float:
    w = _check_normalized(weights)
    return float(1.0 / np.sum(w**2))


@dataclass
class ParticleEnsemble:
    """``N`` parameter vectors with log-weights (weights are normalized on demand)."""

    particles: np.ndarray
    log_weights: np.ndarray
    cycle: int = 0

    @classmethod
    def from_prior(cls, prior: PriorBox, n: int, rng: np.random.Generator) -> ParticleEnsemble:
        return cls(prior.sample(rng, n), np.full(n, -np.log(n)), 0)

    @property
    def size(self) -> int:
        return len(self.particles)

    @property
    def weights(self) -> np.ndarray:
        lw = self.log_weights
        top = np.max(lw)
        if not np.isfinite(top):
            raise FloatingPointError("all particle weights underflowed to zero")
        w = np.exp(lw - top)
        return w / w.sum()

    def eap(self) -> np.ndarray:
        return np.tensordot(self.weights, self.particles, axes=(0, 0))

    def ess(self) -> float:
        return effective_sample_size(self.weights)

    def normalize(self) -> None:
        with np.errstate(divide="ignore"):
            self.log_weights = np.log(self.weights)

    def resample(self, rng: np.random.Generator) -> np.ndarray:
        idx = systematic_resample(self.weights, rng)
        self.particles = self.particles[idx]
        self.log_weights = np.full(self.size, -np.log(self.size))
        return idx


@dataclass
class EstimationSeries:
    """Per-cycle particle-filter output."""

    cycles: np.ndarray
    eap: np.ndarray
    smoothed: np.ndarray
    ess: np.ndarray
    resampled: np.ndarray
    param_names: tuple[str, ...] = ()

    def to_csv(self, path: str | Path) -> None:
        names = self.param_names or tuple(f"a{i}" for i in range(self.eap.shape[1]))
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["cycle", *(f"eap_{n}" for n in names), *(f"smoothed_{n}" for n in names),
                        "ess", "resampled"])
            for i in range(len(self.cycles)):
                w.writerow([int(self.cycles[i]), *(FMT.format(v) for v in self.eap[i]),
                            *(FMT.format(v) for v in self.smoothed[i]), FMT.format(self.ess[i]),
                            int(self.resampled[i])])


def run_smc(
    batch: SyndromeBatch,
    layout: SurfaceCodeLayout,
    family: NoiseFamily,
    prior: PriorBox,
    proposal: RandomWalkProposal,
    n_particles: int,
    resample_interval: int,
    smoothing: int,
    chi: int | None = None,
    rng: np.random.Generator | None = None,
    kind: str = "mixed_L",
    log_likelihood: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None,
) -> EstimationSeries:
    """Bootstrap particle filter over a syndrome stream.

    Cycle 0 reports the prior mean.  At each later cycle ``i`` every particle
    takes a random-walk step, its log-weight gains ``ln p(m_i | alpha)``, and
    on cycles divisible by ``resample_interval`` the ensemble is resampled
    systematically.  The smoothed estimate averages the EAPs of cycles
    ``max(0, i - smoothing + 1) .. i``.

    ``log_likelihood(alphas, m)`` may replace the tensor-network evaluation
    (``alphas`` is ``(N, dim)``, ``m`` one outcome row).
    """
    if n_particles < 2 or resample_interval < 1 or smoothing < 1:
        raise ValueError("need n_particles >= 2, resample_interval >= 1, smoothing >= 1")
    rng = np.random.default_rng() if rng is None else rng
    batch.check_layout(layout)
    if log_likelihood is None:
        ev = get_evaluator(layout, family, kind, chi)

        def log_likelihood(alphas, m):
            return ev.paired_log_probabilities(alphas, m.reshape(1, -1))

    n = len(batch)
    ens = ParticleEnsemble.from_prior(prior, n_particles, rng)
    eaps = np.empty((n, prior.dim))
    ess = np.empty(n)
    resampled = np.zeros(n, dtype=np.int8)
    eaps[0] = ens.eap()
    ess[0] = ens.ess()
    for i in range(1, n):
        cand = proposal.propose(ens.particles, rng)
        inside = prior.contains(cand)
        ens.particles = np.where(inside[:, None], cand, ens.particles)
        ens.log_weights = ens.log_weights + log_likelihood(ens.particles, batch.outcomes[i])
        ens.cycle = batch.first_cycle + i
        if not np.any(np.isfinite(ens.log_weights)):
            raise FloatingPointError(
                f"all particle weights are zero at cycle {ens.cycle}; the data are "
                "impossible under every particle"
            )
        ens.log_weights = ens.log_weights - np.max(ens.log_weights)
        if i % resample_interval == 0:
            ens.normalize()
            ess[i] = ens.ess()
            ens.resample(rng)
            resampled[i] = 1
        else:
            ess[i] = ens.ess()
        eaps[i] = ens.eap()
    csum = np.cumsum(eaps, axis=0)
    lo = np.maximum(0, np.arange(n) - smoothing + 1)
    prev = np.where(lo[:, None] > 0, csum[np.maximum(lo - 1, 0)], 0.0)
    smoothed = (csum - prev) / (np.arange(n) - lo + 1)[:, None]
    cycles = batch.first_cycle + np.arange(n)
    return EstimationSeries(cycles, eaps, smoothed, ess, resampled, family.param_names)
