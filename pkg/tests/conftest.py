import numpy as np
import pytest

from maxent_demand.model import PlanSpec, PriorParams, RewardParams

BASE_REWARD = RewardParams(mu=0.018, beta=0.00125, gamma=0.0005, eta=0.1666, kappa=0.0007)
BASE_PRIOR = PriorParams(mu0=0.018, beta0=0.00125, gamma0=0.0005, eta0=0.1666, nu0_bar=0.05)
BASE_PLAN = PlanSpec(fee=0.0, quota=600.0, price=0.55, cycle_days=30)


@pytest.fixture
def base_reward():
    return BASE_REWARD


@pytest.fixture
def base_prior():
    return BASE_PRIOR


@pytest.fixture
def base_plan():
    return BASE_PLAN


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_reward(rng, scale=1.0):
    """Reward draw around the baseline, kept integrable against BASE_PRIOR."""
    base = BASE_REWARD.as_array()
    x = base * (1 + scale * rng.uniform(-0.8, 0.8, size=5))
    x[1] = max(x[1], -0.5 * BASE_PRIOR.beta0)
    return RewardParams.from_array(x)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
