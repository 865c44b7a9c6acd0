import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from surfnoise.estimators import (
    ChainTrace,
    ParticleEnsemble,
    PriorBox,
    RandomWalkProposal,
    autocorrelation_time,
    eap,
    effective_sample_size,
    metropolis_hastings,
    rng_stream,
    run_mcmc,
    run_smc,
    systematic_resample,
)
from surfnoise.likelihood import get_evaluator, sample_syndromes
from surfnoise.noise_models import NoiseFamily, NoiseModel, ParameterDomain
from surfnoise.surface_code import SyndromeBatch, build_rotated_layout

LAY3 = build_rotated_layout(3)
UNIT = PriorBox(ParameterDomain(("a",), [0.0], [1.0]))

weights_st = st.lists(st.floats(0.0, 1.0), min_size=2, max_size=40).filter(lambda w: sum(w) > 1e-3)


def _norm(w):
    w = np.asarray(w, dtype=float)
    return w / w.sum()


# -- proposal and prior ------------------------------------------------------------


@given(a=st.floats(-1, 1), b=st.floats(-1, 1), w=st.floats(1e-3, 1))
def test_proposal_symmetric(a, b, w):
    q = RandomWalkProposal.uniform_width(1, w)
    assert q.log_density(np.array([a]), np.array([b])) == pytest.approx(
        q.log_density(np.array([b]), np.array([a])))


def test_proposal_rejects_negative_width():
    with pytest.raises(ValueError):
        RandomWalkProposal(np.array([-0.1]))


def test_prior_box():
    prior = PriorBox(ParameterDomain(("g", "p"), [0.0, 0.2], [0.5, 0.4]))
    assert prior.log_density(np.array([0.1, 0.3])) == pytest.approx(-math.log(0.1))
    assert prior.log_density(np.array([0.6, 0.3])) == -np.inf
    s = prior.sample(np.random.default_rng(0), 1000)
    assert np.all(prior.contains(s))
    assert np.allclose(prior.mean(), [0.25, 0.3])


def test_rng_streams_independent_and_reproducible():
    a = rng_stream(7, 1, 0).random(4)
    assert np.array_equal(a, rng_stream(7, 1, 0).random(4))
    assert not np.array_equal(a, rng_stream(7, 1, 1).random(4))
    assert not np.array_equal(a, rng_stream(8, 1, 0).random(4))


# -- Metropolis-Hastings -----------------------------------------------------------


def test_constant_likelihood_samples_prior():
    trace = metropolis_hastings(lambda a: 0.0, UNIT, RandomWalkProposal.uniform_width(1, 0.3),
                                total=20_000, burn_in=500, rng=np.random.default_rng(1))
    thinned = trace.samples[::40, 0]
    assert len(thinned) >= 450
    assert stats.kstest(thinned, "uniform").pvalue > 0.01


def test_chain_records_burn_in_to_total():
    trace = metropolis_hastings(lambda a: -float(a[0]) ** 2, UNIT, RandomWalkProposal.uniform_width(1, 0.1),
                                total=100, burn_in=30, rng=np.random.default_rng(2))
    assert len(trace.samples) == 71 and len(trace.log_likelihoods) == 71
    assert len(trace.accepted_flags) == 101
    assert 0 < trace.acceptance_ratio <= 1
    thinned = metropolis_hastings(lambda a: 0.0, UNIT, RandomWalkProposal.uniform_width(1, 0.1),
                                  total=100, burn_in=30, rng=np.random.default_rng(2), thin=7)
    assert len(thinned.samples) == len(range(30, 101, 7))


def test_bad_chain_lengths():
    q = RandomWalkProposal.uniform_width(1)
    with pytest.raises(ValueError):
        metropolis_hastings(lambda a: 0.0, UNIT, q, total=10, burn_in=10, rng=np.random.default_rng())


def test_impossible_proposals_never_accepted():
    # likelihood is zero on a > 0.5
    def ll(a):
        return -np.inf if a[0] > 0.5 else 0.0

    trace = metropolis_hastings(ll, UNIT, RandomWalkProposal.uniform_width(1, 0.3), total=3000,
                                burn_in=0, rng=np.random.default_rng(3), initial=np.array([0.2]))
    assert np.all(trace.samples <= 0.5)
    assert np.all(np.isfinite(trace.log_likelihoods))


def test_impossible_start_is_left_only_for_possible_points():
    def ll(a):
        return -np.inf if a[0] > 0.5 else 0.0

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        trace = metropolis_hastings(ll, UNIT, RandomWalkProposal.uniform_width(1, 0.05), total=500,
                                    burn_in=0, rng=np.random.default_rng(4), initial=np.array([0.9]))
    moved = trace.samples[trace.samples[:, 0] != 0.9]
    assert np.all(moved <= 0.5)


def test_all_rejected_warns():
    with pytest.warns(RuntimeWarning, match="rejected all"):
        trace = metropolis_hastings(lambda a: 0.0, UNIT, RandomWalkProposal.uniform_width(1, 100.0),
                                    total=20, burn_in=0, rng=np.random.default_rng(5),
                                    initial=np.array([0.5]))
    assert trace.accepted == 0 and trace.warnings


def test_eap_examples():
    assert eap(np.array([[0.3, 0.2]])) == pytest.approx([0.3, 0.2])
    assert eap(np.array([[0.1], [0.5]]), np.array([0.5, 0.5]))[0] == pytest.approx(0.3)
    assert eap(np.array([[0.1], [0.5]]), np.array([0.9, 0.1]))[0] == pytest.approx(0.14)
    ens = ParticleEnsemble(np.array([[0.1], [0.5]]), np.log([0.9, 0.1]))
    assert eap(ens)[0] == pytest.approx(0.14)
    assert eap(np.array([[0.1], [0.15], [0.2], [0.11]]))[0] == pytest.approx(0.14)
    assert eap(np.array([[0.0], [1.0]]), np.array([3.0, 1.0]))[0] == pytest.approx(0.25)
    with pytest.raises(ValueError):
        eap(np.empty((0, 1)))


def test_autocorrelation_time_white_noise_and_ar1():
    rng = np.random.default_rng(6)
    white = rng.standard_normal((20_000, 1))
    assert autocorrelation_time(white)[0] == pytest.approx(1.0, abs=0.2)
    rho = 0.9
    x = np.empty(50_000)
    x[0] = 0
    e = rng.standard_normal(len(x))
    for i in range(1, len(x)):
        x[i] = rho * x[i - 1] + e[i]
    assert autocorrelation_time(x[:, None])[0] == pytest.approx((1 + rho) / (1 - rho), rel=0.25)


def test_chain_csv(tmp_path):
    trace = metropolis_hastings(lambda a: 0.0, UNIT, RandomWalkProposal.uniform_width(1, 0.1),
                                total=10, burn_in=2, rng=np.random.default_rng(7), param_names=("gamma",))
    path = tmp_path / "chain.csv"
    trace.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("step,gamma,log_likelihood")
    assert len(lines) == 10
    assert isinstance(trace, ChainTrace)


def test_run_mcmc_recovers_mixture_parameters():
    fam = NoiseFamily("ad_plus_dephase", 9)
    truth = np.array([0.3, 0.1])
    batch = sample_syndromes(LAY3, fam.model(truth), 100, np.random.default_rng(8))
    prior = PriorBox(fam.default_domain())
    trace = run_mcmc(batch, LAY3, fam, prior, RandomWalkProposal.uniform_width(2, 0.03),
                     total=3000, burn_in=500, rng=np.random.default_rng(9))
    assert np.all(np.abs(trace.eap() - truth) <= 0.1)


def test_run_mcmc_matches_direct_loglik():
    fam = NoiseFamily("ad", 9)
    batch = sample_syndromes(LAY3, fam.model([0.2]), 30, np.random.default_rng(10))
    prior = PriorBox(fam.default_domain())
    trace = run_mcmc(batch, LAY3, fam, prior, RandomWalkProposal.uniform_width(1, 0.02),
                     total=20, burn_in=0, rng=np.random.default_rng(11))
    ev = get_evaluator(LAY3, fam)
    for a, ll in zip(trace.samples[:5], trace.log_likelihoods[:5]):
        assert ll == pytest.approx(ev.log_likelihood(a, batch), rel=1e-12)


# -- resampling --------------------------------------------------------------------


def test_resample_equal_weights_is_identity():
    for seed in range(5):
        idx = systematic_resample(np.full(10, 0.1), np.random.default_rng(seed))
        assert np.array_equal(idx, np.arange(10))


def test_resample_single_weight():
    w = np.zeros(16)
    w[5] = 1.0
    assert np.all(systematic_resample(w, np.random.default_rng(0)) == 5)


def test_resample_rejects_unnormalized():
    with pytest.raises(ValueError):
        systematic_resample(np.array([0.5, 0.6]), np.random.default_rng())
    with pytest.raises(ValueError):
        systematic_resample(np.array([1.2, -0.2]), np.random.default_rng())


@given(w=weights_st, seed=st.integers(0, 2**32 - 1))
def test_resample_never_picks_zero_weight_and_counts_bounded(w, seed):
    w = _norm(w)
    idx = systematic_resample(w, np.random.default_rng(seed))
    n = len(w)
    assert len(idx) == n
    assert np.all(w[idx] > 0)
    counts = np.bincount(idx, minlength=n)
    assert np.all(np.abs(counts - n * w) < 1 + 1e-9)


def test_resample_counts_unbiased():
    w = _norm(np.random.default_rng(12).random(12))
    reps = 20_000
    rng = np.random.default_rng(13)
    counts = np.zeros(12)
    for _ in range(reps):
        counts += np.bincount(systematic_resample(w, rng), minlength=12)
    assert np.allclose(counts / reps, 12 * w, atol=0.02)


def test_resample_preserves_eap_in_expectation():
    rng = np.random.default_rng(14)
    x = rng.random((50, 2))
    w = _norm(rng.random(50))
    target = w @ x
    means = np.array([x[systematic_resample(w, rng)].mean(axis=0) for _ in range(1000)])
    se = means.std(axis=0) / math.sqrt(len(means))
    assert np.all(np.abs(means.mean(axis=0) - target) <= 4 * se + 1e-12)


def test_ess_examples():
    assert effective_sample_size([0.5, 0.25, 0.25]) == pytest.approx(8 / 3)
    assert effective_sample_size(np.full(7, 1 / 7)) == pytest.approx(7)
    assert effective_sample_size([0, 0, 1.0, 0]) == pytest.approx(1)


@given(w=weights_st)
def test_ess_bounds(w):
    assert 1 - 1e-9 <= effective_sample_size(_norm(w)) <= len(w) + 1e-9


def test_ensemble_normalize_keeps_zero_weights_zero():
    ens = ParticleEnsemble(np.arange(4.0)[:, None], np.array([0.0, -np.inf, -1.0, -np.inf]))
    ens.normalize()
    assert ens.log_weights[1] == -np.inf
    assert np.exp(ens.log_weights).sum() == pytest.approx(1.0)
    idx = ens.resample(np.random.default_rng(0))
    assert set(idx) <= {0, 2}


def test_ensemble_underflow_raises():
    ens = ParticleEnsemble(np.zeros((3, 1)), np.full(3, -np.inf))
    with pytest.raises(FloatingPointError):
        ens.weights


# -- sequential Monte Carlo --------------------------------------------------------


def _ad_batch(n, gamma, seed):
    return sample_syndromes(LAY3, NoiseModel.uniform("ad", 9, gamma), n, np.random.default_rng(seed))


def test_smc_without_moves_is_importance_sampling():
    fam = NoiseFamily("ad", 9)
    prior = PriorBox(fam.default_domain())
    batch = _ad_batch(25, 0.2, 15)
    series = run_smc(batch, LAY3, fam, prior, RandomWalkProposal.uniform_width(1, 0.0),
                     n_particles=8, resample_interval=10**9, smoothing=1, rng=np.random.default_rng(16))
    particles = prior.sample(np.random.default_rng(16), 8)
    ev = get_evaluator(LAY3, fam)
    ll = np.array([ev.log_likelihood(p, SyndromeBatch(batch.outcomes[1:])) for p in particles])
    w = np.exp(ll - ll.max())
    assert series.eap[-1, 0] == pytest.approx(float(w @ particles[:, 0] / w.sum()), rel=1e-10)
    assert series.eap[0, 0] == pytest.approx(particles[:, 0].mean())
    assert not series.resampled.any()


def test_smc_series_shape_and_smoothing():
    fam = NoiseFamily("ad", 9)
    prior = PriorBox(fam.default_domain())
    batch = _ad_batch(40, 0.15, 17)
    series = run_smc(batch, LAY3, fam, prior, RandomWalkProposal.uniform_width(1, 0.003),
                     n_particles=32, resample_interval=5, smoothing=6, rng=np.random.default_rng(18))
    assert series.eap.shape == (40, 1) and len(series.cycles) == 40
    for i in (0, 3, 5, 20, 39):
        lo = max(0, i - 6 + 1)
        assert series.smoothed[i, 0] == pytest.approx(series.eap[lo:i + 1, 0].mean(), rel=1e-12)
    assert np.array_equal(np.flatnonzero(series.resampled), np.arange(5, 40, 5))
    # windows that are full: n - s + 1 of them
    assert sum(i - 6 + 1 >= 0 for i in range(40)) == 40 - 6 + 1
    assert np.all((series.ess >= 1 - 1e-9) & (series.ess <= 32 + 1e-9))


def test_smc_particles_stay_in_domain():
    fam = NoiseFamily("ad", 9)
    prior = PriorBox(ParameterDomain(("gamma",), [0.0], [0.05]))
    batch = _ad_batch(30, 0.3, 19)
    series = run_smc(batch, LAY3, fam, prior, RandomWalkProposal.uniform_width(1, 0.02),
                     n_particles=16, resample_interval=3, smoothing=1, rng=np.random.default_rng(20))
    assert np.all((series.eap >= 0) & (series.eap <= 0.05))


def test_smc_underflow_aborts():
    fam = NoiseFamily("ad", 9)
    prior = PriorBox(fam.default_domain())
    batch = _ad_batch(5, 0.2, 21)

    def impossible(alphas, m):
        return np.full(len(alphas), -np.inf)

    with pytest.raises(FloatingPointError, match="cycle"):
        run_smc(batch, LAY3, fam, prior, RandomWalkProposal.uniform_width(1, 0.01), n_particles=4,
                resample_interval=2, smoothing=1, rng=np.random.default_rng(0), log_likelihood=impossible)


def test_smc_series_csv(tmp_path):
    fam = NoiseFamily("ad", 9)
    series = run_smc(_ad_batch(6, 0.1, 22), LAY3, fam, PriorBox(fam.default_domain()),
                     RandomWalkProposal.uniform_width(1, 0.003), n_particles=4, resample_interval=2,
                     smoothing=2, rng=np.random.default_rng(0))
    path = tmp_path / "s.csv"
    series.to_csv(path)
    assert len(path.read_text().splitlines()) == 7


@pytest.mark.slow
def test_smc_tracks_sine_schedule_large_ensemble():
    from surfnoise.noise_models import NoiseSchedule, TimeVaryingNoise

    fam = NoiseFamily("ad", 9)
    tv = TimeVaryingNoise(fam, {"gamma": NoiseSchedule("sine", 0.15, 1.1, 1e-4)})
    n = 10_000
    batch = sample_syndromes(LAY3, tv, n, rng_stream(77, 0))
    series = run_smc(batch, LAY3, fam, PriorBox(fam.default_domain()), RandomWalkProposal([0.003]),
                     n_particles=1280, resample_interval=10, smoothing=20, rng=rng_stream(77, 1))
    truth = tv.alpha(np.arange(n))[:, 0]
    assert np.mean(np.abs(series.smoothed[200:, 0] - truth[200:])) <= 0.03
