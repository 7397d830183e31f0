import math

import numpy as np
import pytest

from maxent_demand.model import (
    INFINITE_PRICE,
    FeatureScales,
    PriorParams,
    RewardParams,
    raw_features,
    raw_from_theta,
    theta_from_raw,
)
from maxent_demand.partition import (
    NonIntegrableError,
    _terms,
    posterior_feature_expectation,
    z_closed_form,
    z_quadrature,
)
from maxent_demand.posterior import _draw, posterior_at, sample_action

from conftest import BASE_PRIOR, BASE_REWARD, random_reward

SCALES = FeatureScales(21.0, 736.0, 381.0, 1.03, 16.0)


def test_zero_reward_gives_unit_z():
    for q, price in [(600.0, 0.55), (0.0, 0.55), (12.0, INFINITE_PRICE)]:
        z = z_closed_form(RewardParams.zero(), BASE_PRIOR, q, 30, price)
        assert z.log_Z == pytest.approx(0.0, abs=1e-14)
        assert z_quadrature(RewardParams.zero(), BASE_PRIOR, q, 30, price) == pytest.approx(1.0, abs=1e-10)


def test_pure_atom():
    prior = PriorParams(0.018, 0.00125, 0.0005, 0.1666, 1.0)
    z = z_closed_form(BASE_REWARD, prior, 600.0, 30, 0.55)
    assert z.log_Z == pytest.approx(BASE_REWARD.kappa * 600.0, rel=1e-15)


def test_baseline_state_matches_quadrature():
    z = z_closed_form(BASE_REWARD, BASE_PRIOR, 600.0, 30, 0.55)
    quad = z_quadrature(BASE_REWARD, BASE_PRIOR, 600.0, 30, 0.55)
    assert math.exp(z.log_Z) == pytest.approx(quad, rel=1e-8)
    assert z.log_Z == pytest.approx(
        np.logaddexp(z.log_atom, math.log(0.95) + np.logaddexp(z.log_I1, z.log_I2)), abs=1e-14)


def test_zero_quota_reduces_to_upper_branch():
    z = z_closed_form(BASE_REWARD, BASE_PRIOR, 0.0, 10, 0.55)
    assert z.log_I1 == -math.inf
    assert z.log_atom == pytest.approx(math.log(0.05))
    quad = z_quadrature(BASE_REWARD, BASE_PRIOR, 0.0, 10, 0.55)
    assert math.exp(z.log_Z) == pytest.approx(0.05 + 0.95 * math.exp(z.log_I2), rel=1e-14)
    assert math.exp(z.log_Z) == pytest.approx(quad, rel=1e-9)


def test_random_sweep_against_quadrature(rng):
    for _ in range(50):
        r = random_reward(rng)
        q = float(rng.choice([0.0, 1e-3, 5.0, 80.0, 600.0, 3000.0]))
        d = int(rng.integers(1, 31))
        price = float(rng.choice([0.0, 0.55, 2.0, INFINITE_PRICE]))
        cf = z_closed_form(r, BASE_PRIOR, q, d, price).log_Z
        quad = z_quadrature(r, BASE_PRIOR, q, d, price, log=True)
        assert abs(math.expm1(cf - quad)) <= 1e-6


def test_vectorized_states():
    q = np.array([0.0, 10.0, 600.0])
    d = np.array([1.0, 15.0, 30.0])
    vec = z_closed_form(BASE_REWARD, BASE_PRIOR, q, d, 0.55).log_Z
    for i in range(3):
        assert vec[i] == z_closed_form(BASE_REWARD, BASE_PRIOR, q[i], d[i], 0.55).log_Z


def test_non_integrable():
    bad = RewardParams(0, -BASE_PRIOR.beta0, 0, 0, 0)
    with pytest.raises(NonIntegrableError):
        z_closed_form(bad, BASE_PRIOR, 10.0, 3, 0.55)
    with pytest.raises(NonIntegrableError):
        z_quadrature(bad, BASE_PRIOR, 10.0, 3, 0.55)


def test_pure_atom_feature_expectation():
    prior = PriorParams(0.018, 0.00125, 0.0005, 0.1666, 1.0)
    e = posterior_feature_expectation(BASE_REWARD, prior, 600.0, 30, 0.55, SCALES)
    np.testing.assert_allclose(e, [0, 0, 0, 0, 600.0 / SCALES.mean_zero_quota], atol=1e-15)


@pytest.mark.parametrize("q, d, price", [(600.0, 30, 0.55), (25.0, 4, 0.55), (0.0, 12, 0.55),
                                         (40.0, 8, INFINITE_PRICE)])
def test_feature_expectation_matches_finite_differences(q, d, price):
    theta = theta_from_raw(BASE_REWARD, SCALES, price)
    identified = price not in (0.0, INFINITE_PRICE)

    def log_z(th):
        return z_closed_form(raw_from_theta(th, SCALES, price), BASE_PRIOR, q, d, price).log_Z

    e = posterior_feature_expectation(BASE_REWARD, BASE_PRIOR, q, d, price, SCALES)
    h = 1e-5
    for k in range(5):
        if k == 3 and not identified:
            continue
        step = np.zeros(5)
        step[k] = h
        fd = (log_z(theta + step) - log_z(theta - step)) / (2 * h)
        assert fd == pytest.approx(e[k], rel=1e-5, abs=1e-9)


def test_feature_expectation_matches_monte_carlo(rng):
    q, d, price = 45.0, 10, 0.55
    post = posterior_at(BASE_REWARD, BASE_PRIOR, q, d, price)
    n = 10**6
    t = _terms(BASE_REWARD, BASE_PRIOR, np.full(n, q), float(d), price)
    a = _draw(t.log_nu, t.post, rng.random(n), rng.random(n))
    feats = raw_features(a, q, d) / SCALES.as_array()
    e = posterior_feature_expectation(BASE_REWARD, BASE_PRIOR, q, d, price, SCALES)
    se = feats.std(axis=0) / math.sqrt(n)
    assert np.all(np.abs(feats.mean(axis=0) - e) <= 4 * se)
    # scalar sampler agrees with the vectorized one in distribution of zeros
    zeros = sum(sample_action(post, rng) == 0.0 for _ in range(20000))
    assert abs(zeros / 20000 - post.nu) <= 4 * math.sqrt(post.nu * (1 - post.nu) / 20000)
