import math

import numpy as np
import pytest
from scipy import stats

from maxent_demand.model import INFINITE_PRICE, PlanSpec, PriorParams, RewardParams
from maxent_demand.partition import expected_raw_features
from maxent_demand.posterior import (
    posterior_at,
    posterior_splice_weight_continuity,
    sample_action,
    simulate_corpus,
    simulate_cycle,
)

from conftest import BASE_PLAN, BASE_PRIOR, BASE_REWARD


def test_no_prior_atom_means_no_posterior_atom():
    prior = PriorParams(0.018, 0.00125, 0.0005, 0.1666, 0.0)
    assert posterior_at(BASE_REWARD, prior, 600.0, 30, 0.55).nu == 0.0


def test_zero_reward_keeps_prior_atom():
    post = posterior_at(RewardParams.zero(), BASE_PRIOR, 600.0, 30, 0.55)
    assert post.nu == pytest.approx(0.05, rel=1e-13)


def test_baseline_continuity_and_weight_routes():
    post = posterior_at(BASE_REWARD, BASE_PRIOR, 600.0, 30, 0.55)
    below, above = post.density_jump()
    assert abs(below - above) <= 1e-9 * below
    alt = posterior_splice_weight_continuity(BASE_REWARD, BASE_PRIOR, 600.0, 30, 0.55)
    assert post.omega == pytest.approx(alt, rel=1e-10)
    assert 0 < post.nu < 1 and 0 < post.omega < 1


def test_structure_preserved_total_mass():
    post = posterior_at(BASE_REWARD, BASE_PRIOR, 80.0, 12, 0.55)
    assert post.cont_cdf(1e7) == pytest.approx(1.0, abs=1e-14)
    assert post.branch1.upper == 80.0 and post.branch2.lower == 80.0
    assert post.branch1.variance == post.branch2.variance == pytest.approx(
        1 / (BASE_PRIOR.beta0 + BASE_REWARD.beta))


def test_certain_zero(rng):
    prior = PriorParams(0.018, 0.00125, 0.0005, 0.1666, 1.0)
    post = posterior_at(BASE_REWARD, prior, 600.0, 30, 0.55)
    assert post.nu == 1.0
    assert all(sample_action(post, rng) == 0.0 for _ in range(200))


def test_zero_quota_without_overage_forces_zero(rng):
    post = posterior_at(BASE_REWARD, BASE_PRIOR, 0.0, 5, INFINITE_PRICE)
    assert post.nu == 1.0
    assert post.branch1 is None and post.branch2 is None
    assert sample_action(post, rng) == 0.0


def test_zero_fraction_and_ks(rng):
    post = posterior_at(BASE_REWARD, BASE_PRIOR, 600.0, 30, 0.55)
    n = 10**5
    draws = np.array([sample_action(post, rng) for _ in range(n)])
    zeros = np.count_nonzero(draws == 0.0)
    assert abs(zeros / n - post.nu) <= 3 * math.sqrt(post.nu * (1 - post.nu) / n)
    assert stats.kstest(draws[draws > 0], post.cont_cdf).pvalue > 0.01


def test_simulated_paths_satisfy_dynamics(rng):
    for plan in (BASE_PLAN, PlanSpec(0, 0.0, 0.55, 30), PlanSpec(0, 40, INFINITE_PRICE, 10)):
        path = simulate_cycle(BASE_REWARD, BASE_PRIOR, plan, rng)
        assert len(path) == plan.cycle_days
        assert np.all(np.diff(path.q) <= 0) and np.all(path.q >= 0)
        np.testing.assert_array_equal(np.diff(path.d), -1)
        np.testing.assert_allclose(path.q[1:], np.maximum(path.q[:-1] - path.a[:-1], 0))
        if not plan.allows_overage:
            assert np.all(path.a <= path.q)


def test_zero_quota_with_price_consumes_only_overage(rng):
    path = simulate_cycle(BASE_REWARD, BASE_PRIOR, PlanSpec(0, 0.0, 0.55, 30), rng)
    assert np.all(path.q == 0)
    assert np.any(path.a > 0)


def test_corpus_is_seed_deterministic_and_sliceable():
    a = simulate_corpus(BASE_REWARD, BASE_PRIOR, BASE_PLAN, 50, 99)
    b = simulate_corpus(BASE_REWARD, BASE_PRIOR, BASE_PLAN, 50, 99)
    assert a == b
    tail = simulate_corpus(BASE_REWARD, BASE_PRIOR, BASE_PLAN, 10, 99, start=40)
    assert a[40:] == tail
    total = np.mean([p.a.sum() for p in a])
    assert math.isfinite(total) and total > 0


def test_simulated_feature_means_match_expectation():
    corpus = simulate_corpus(BASE_REWARD, BASE_PRIOR, BASE_PLAN, 10**4, 5)
    a = np.stack([p.a for p in corpus])
    q = np.stack([p.q for p in corpus])
    d = corpus[0].d.astype(float)
    expected = expected_raw_features(BASE_REWARD, BASE_PRIOR, q, d[None, :], 0.55)
    observed = np.stack([a, a * a, a * d, np.maximum(a - q, 0), q * (a == 0)], axis=-1)
    # per-cycle sums of (observed - expected) are zero-mean and independent across cycles
    resid = (observed - expected).sum(axis=1)
    se = resid.std(axis=0) / math.sqrt(len(corpus))
    assert np.all(np.abs(resid.mean(axis=0)) <= 4 * se)


def test_vectorized_sample_matches_mixture(rng):
    post = posterior_at(BASE_REWARD, BASE_PRIOR, 40.0, 12, 0.55)
    x = post.sample(rng, 50_000)
    assert x.shape == (50_000,) and np.all(x >= 0)
    band = 4 * math.sqrt(post.nu * (1 - post.nu) / x.size)
    assert abs(np.mean(x == 0) - post.nu) < band
    assert stats.kstest(x[x > 0], post.cont_cdf).pvalue > 1e-3


def test_vectorized_sample_all_zero_when_nothing_affordable(rng):
    post = posterior_at(BASE_REWARD, BASE_PRIOR, 0.0, 5, INFINITE_PRICE)
    assert np.all(post.sample(rng, 100) == 0.0)


def test_log_weight_survives_underflow():
    # far above the quota the lower-branch weight underflows in linear space
    log_w = posterior_splice_weight_continuity(BASE_REWARD, BASE_PRIOR, 1e4, 30, 0.55, log=True)
    post = posterior_at(BASE_REWARD, BASE_PRIOR, 1e4, 30, 0.55)
    assert log_w < -700
    assert log_w == pytest.approx(float(post.spliced.log_w2), rel=1e-12)


def test_log_weight_zero_quota_and_no_overage():
    assert posterior_splice_weight_continuity(BASE_REWARD, BASE_PRIOR, 0.0, 3, 0.55, log=True) == 0.0
    assert posterior_splice_weight_continuity(
        BASE_REWARD, BASE_PRIOR, 50.0, 3, INFINITE_PRICE, log=True) == -math.inf
