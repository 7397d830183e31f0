import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maxent_demand.model import (
    INFINITE_PRICE,
    ConsumptionPath,
    ConsumptionStep,
    EndOfCycleError,
    FeatureScales,
    InvalidPathError,
    PlanSpec,
    PriorParams,
    RewardParams,
    UnidentifiedFeatureError,
    check_path,
    features,
    raw_from_theta,
    reward,
    theta_from_raw,
    transition,
)

from conftest import BASE_PRIOR, BASE_REWARD

finite = st.floats(-5, 5, allow_nan=False)
positive = st.floats(1e-3, 1e3, allow_nan=False)


def test_reward_vanishes_at_zero_state():
    assert reward(BASE_REWARD, ConsumptionStep(0.0, 0.0, 17), 0.55) == 0.0


@pytest.mark.parametrize(
    "step, price, expected",
    [
        (ConsumptionStep(0.0, 600.0, 30), 0.55, 0.42),
        (ConsumptionStep(20.0, 600.0, 29), 0.55, 0.40),
        (ConsumptionStep(50.0, 10.0, 2), 0.55, -4.2777),
    ],
)
def test_reward_hand_computed(step, price, expected):
    assert reward(BASE_REWARD, step, price) == pytest.approx(expected, abs=1e-12)


def test_reward_overage_on_no_overage_plan_is_minus_inf():
    assert reward(BASE_REWARD, ConsumptionStep(5.0, 1.0, 3), INFINITE_PRICE) == -math.inf
    # no overage: finite
    assert math.isfinite(reward(BASE_REWARD, ConsumptionStep(1.0, 5.0, 3), INFINITE_PRICE))


def test_reward_vectorized_matches_scalar():
    a = np.array([0.0, 3.0, 12.0])
    q = np.array([4.0, 4.0, 4.0])
    d = np.array([3, 2, 1])
    vec = reward(BASE_REWARD, price=0.55, a=a, q=q, d=d)
    for i in range(3):
        assert vec[i] == reward(BASE_REWARD, ConsumptionStep(a[i], q[i], int(d[i])), 0.55)


def test_features_zero_step():
    s = FeatureScales(2.0, 3.0, 4.0, 5.0, 6.0)
    np.testing.assert_array_equal(features(ConsumptionStep(0.0, 0.0, 4), s), np.zeros(5))


def test_features_unit_scales_pass_raw_terms():
    out = features(ConsumptionStep(2.0, 5.0, 3), FeatureScales.unit())
    np.testing.assert_array_equal(out, [2, 4, 6, 0, 0])


def test_features_reject_unidentified_scale():
    with pytest.raises(UnidentifiedFeatureError, match="overage"):
        features(ConsumptionStep(1.0, 1.0, 1), FeatureScales(1, 1, 1, 0, 1))


@settings(max_examples=300, deadline=None)
@given(
    a=st.one_of(st.just(0.0), st.floats(0, 200)),
    q=st.floats(0, 1000),
    d=st.integers(0, 31),
    params=st.tuples(finite, positive, finite, finite, finite),
    scales=st.tuples(positive, positive, positive, positive, positive),
    price=st.floats(1e-3, 10),
)
def test_theta_dot_features_equals_reward(a, q, d, params, scales, price):
    p = RewardParams(*params)
    s = FeatureScales(*scales)
    step = ConsumptionStep(a, q, d)
    r = reward(p, step, price)
    val = theta_from_raw(p, s, price).dot(features(step, s))
    assert abs(val - r) <= 1e-10 * (1 + abs(r))


def test_theta_from_raw_trivial_cases():
    np.testing.assert_array_equal(
        theta_from_raw(RewardParams.zero(), FeatureScales.unit(), 1.0), np.zeros(5)
    )
    th = theta_from_raw(RewardParams(2.0, 0, 0, 0, 0), FeatureScales.unit(), 1.0)
    assert th[0] == 2.0


def test_theta_round_trip_random_draws():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        p = RewardParams.from_array(rng.normal(size=5) * 10 ** rng.uniform(-4, 1, size=5))
        s = FeatureScales(*(10 ** rng.uniform(-2, 4, size=5)))
        price = 10 ** rng.uniform(-2, 1)
        back = raw_from_theta(theta_from_raw(p, s, price), s, price).as_array()
        x = p.as_array()
        assert np.all(np.abs(back - x) <= 1e-12 * np.abs(x))


def test_eta_pinned_without_price():
    s = FeatureScales.unit()
    p = RewardParams(1, 1, 1, 3.0, 1)
    for price in (0.0, INFINITE_PRICE):
        th = theta_from_raw(p, s, price)
        assert th[3] == 0.0
        assert raw_from_theta(th, s, price).eta == 0.0


@pytest.mark.parametrize(
    "step, expected",
    [
        (ConsumptionStep(20, 600, 30), (580, 29)),
        (ConsumptionStep(50, 10, 5), (0, 4)),
        (ConsumptionStep(0, 0, 1), (0, 0)),
    ],
)
def test_transition(step, expected):
    assert transition(step) == expected


def test_transition_end_of_cycle():
    with pytest.raises(EndOfCycleError):
        transition(ConsumptionStep(1.0, 1.0, 0))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 100), min_size=1, max_size=40), st.floats(0, 500))
def test_transition_keeps_q_non_negative_and_non_increasing(actions, q0):
    q, d = q0, len(actions)
    for a in actions:
        q_next, d_next = transition(ConsumptionStep(a, q, d))
        assert 0 <= q_next <= q
        assert d_next == d - 1
        q, d = q_next, d_next


def test_invariants_rejected():
    with pytest.raises(ValueError):
        PriorParams(0, 0.0, 0, 0, 0.1)
    with pytest.raises(ValueError):
        PriorParams(0, 1.0, 0, 0, 1.5)
    with pytest.raises(ValueError):
        PlanSpec(0, -1, 0.5, 30)
    with pytest.raises(ValueError):
        PlanSpec(0, 1, -0.5, 30)
    with pytest.raises(ValueError):
        PlanSpec(0, 1, 0.5, 0)
    with pytest.raises(ValueError):
        ConsumptionStep(-1.0, 0, 0)
    with pytest.raises(ValueError):
        RewardParams(math.nan, 0, 0, 0, 0)
    with pytest.raises(ValueError):
        BASE_PRIOR.check_compatible(RewardParams(0, -BASE_PRIOR.beta0, 0, 0, 0))


def test_path_validation():
    plan = PlanSpec(0.0, 10.0, 0.5, 3)
    ok = ConsumptionPath([4.0, 8.0, 1.0], [10.0, 6.0, 0.0], [3, 2, 1], plan)
    assert len(ok) == 3
    assert ok.steps[1] == ConsumptionStep(8.0, 6.0, 2)
    with pytest.raises(InvalidPathError, match="step 2"):
        check_path([4.0, 8.0, 1.0], [10.0, 6.0, 1.0], [3, 2, 1], plan)
    with pytest.raises(InvalidPathError, match="step 1: d"):
        check_path([4.0, 8.0, 1.0], [10.0, 6.0, 0.0], [3, 3, 1], plan)
    with pytest.raises(InvalidPathError, match="step 0"):
        check_path([4.0, 8.0, 1.0], [9.0, 5.0, 0.0], [3, 2, 1], plan)
    with pytest.raises(InvalidPathError, match="overage"):
        check_path([4.0, 8.0, 1.0], [10.0, 6.0, 0.0], [3, 2, 1], PlanSpec(0, 10, INFINITE_PRICE, 3))


def test_path_arrays_are_read_only():
    p = ConsumptionPath([1.0], [5.0], [1], PlanSpec(0, 5, 1, 1))
    with pytest.raises(ValueError):
        p.a[0] = 2.0
