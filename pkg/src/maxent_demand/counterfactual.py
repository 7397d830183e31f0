"""Plan valuation, plan ranking and the price-sensitivity bound.

The value of a plan is ``-eta * fee`` plus the expected total utility of a
simulated cycle under the plan's quota and overage price.  Every plan is
simulated with the same per-path seed substreams (common random numbers),
so differences between plans are not blurred by independent noise.

If a customer chose plan ``j`` over an alternative ``k`` with a higher fee,
then ``R_j >= R_k`` rearranges to a lower bound on ``eta``::

    eta >= (E_k[sum r] - E_j[sum r]) / (F_k - F_j)

Alternatives with a lower fee give upper bounds instead.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import PlanSpec, PriorParams, RewardParams, reward
from .posterior import cycle_uniforms, simulate_arrays


@dataclass(frozen=True)
class PlanValue:
    plan: PlanSpec
    total_utility: float
    std_error: float
    n_paths: int
    expected_reward: float


def path_rewards(reward_params: RewardParams, prior: PriorParams, plan: PlanSpec, n_paths: int,
                 seed) -> np.ndarray:
    """Total utility (excluding the fee) of each of ``n_paths`` simulated cycles."""
    if n_paths < 1:
        raise ValueError("n_paths must be at least 1")
    prior.check_compatible(reward_params)
    u = cycle_uniforms(seed, n_paths, plan.cycle_days)
    a, q, d = simulate_arrays(reward_params, prior, plan, u)
    r = reward(reward_params, price=plan.price, a=a, q=q, d=d[None, :])
    return r.sum(axis=1)


def evaluate_plan(reward_params: RewardParams, prior: PriorParams, plan: PlanSpec, n_paths: int,
                  seed) -> PlanValue:
    """Monte Carlo estimate of the total expected utility of ``plan``."""
    totals = path_rewards(reward_params, prior, plan, n_paths, seed)
    mean = float(totals.mean())
    se = float(totals.std(ddof=1) / math.sqrt(n_paths)) if n_paths > 1 else 0.0
    return PlanValue(plan, -reward_params.eta * plan.fee + mean, se, n_paths, mean)


def rank_plans(reward_params: RewardParams, prior: PriorParams, plans: Sequence[PlanSpec],
               n_paths: int, seed) -> list[PlanValue]:
    """Plans sorted by decreasing value; ties go to the lower fee, then lower price."""
    if len(plans) == 0:
        raise ValueError("no plans to rank")
    values = [evaluate_plan(reward_params, prior, p, n_paths, seed) for p in plans]
    return sorted(values, key=lambda v: (-v.total_utility, v.plan.fee, v.plan.price))


@dataclass(frozen=True)
class EtaBound:
    alternative: PlanSpec
    bound: float
    kind: str  # "lower" or "upper"


@dataclass(frozen=True)
class EtaBounds:
    lower: float
    upper: float
    chosen_reward: float
    rows: tuple[EtaBound, ...]


def eta_bounds(chosen: PlanSpec, alternatives: Sequence[PlanSpec], reward_params: RewardParams,
               prior: PriorParams, n_paths: int, seed) -> EtaBounds:
    """Bounds on ``eta`` implied by having chosen ``chosen`` over each alternative.

    Expected utilities exclude the fee, so ``eta`` enters them only through
    overage charges; on no-overage plans it drops out entirely.
    Alternatives with the chosen plan's fee are skipped with a warning.
    """
    base = float(path_rewards(reward_params, prior, chosen, n_paths, seed).mean())
    rows = []
    lower, upper = -math.inf, math.inf
    for alt in alternatives:
        dfee = alt.fee - chosen.fee
        if dfee == 0:
            warnings.warn(f"skipping alternative {alt}: same fee as the chosen plan")
            continue
        other = float(path_rewards(reward_params, prior, alt, n_paths, seed).mean())
        bound = (other - base) / dfee
        if dfee > 0:
            rows.append(EtaBound(alt, bound, "lower"))
            lower = max(lower, bound)
        else:
            rows.append(EtaBound(alt, bound, "upper"))
            upper = min(upper, bound)
    return EtaBounds(lower, upper, base, tuple(rows))


def eta_lower_bound(chosen: PlanSpec, alternatives: Sequence[PlanSpec],
                    reward_params: RewardParams, prior: PriorParams, n_paths: int, seed) -> float:
    """Largest lower bound on ``eta``; ``-inf`` if no alternative has a higher fee."""
    return eta_bounds(chosen, alternatives, reward_params, prior, n_paths, seed).lower
