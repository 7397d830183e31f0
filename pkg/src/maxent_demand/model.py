"""Domain types, the one-day utility, normalized features and state dynamics.

A customer on a plan ``(fee, quota, price, cycle_days)`` consumes ``a_t >= 0``
units per day.  The state is the remaining allowance ``q_t`` and the number of
remaining days ``d_t``; it evolves deterministically::

    q_{t+1} = max(q_t - a_t, 0),   d_{t+1} = d_t - 1

with ``d = cycle_days`` on the first day of the cycle and ``d = 1`` on the
last.  The one-day utility is::

    r(a, q, d) = mu*a - beta*a**2/2 + gamma*a*d - eta*p*(a - q)_+ + kappa*q*[a == 0]

which is linear in the five normalized features returned by :func:`features`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

#: Overage price of a plan that does not allow consumption beyond the quota.
INFINITE_PRICE = math.inf

PARAM_NAMES = ("mu", "beta", "gamma", "eta", "kappa")
FEATURE_NAMES = ("a", "a2", "ad", "overage", "zero_quota")
N_FEATURES = 5


class UnidentifiedFeatureError(ValueError):
    """A feature has zero empirical mean, so it cannot be normalized."""


class EndOfCycleError(ValueError):
    """Raised when stepping past the last day of a billing cycle."""


class InvalidPathError(ValueError):
    """A consumption path violates the state dynamics."""


def is_infinite_price(price: float) -> bool:
    return math.isinf(price) and price > 0


@dataclass(frozen=True)
class RewardParams:
    """Utility coefficients ``(mu, beta, gamma, eta, kappa)``."""

    mu: float
    beta: float
    gamma: float
    eta: float
    kappa: float

    def __post_init__(self):
        for name in PARAM_NAMES:
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"reward parameter {name} must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.mu, self.beta, self.gamma, self.eta, self.kappa])

    @classmethod
    def from_array(cls, values) -> "RewardParams":
        return cls(*(float(v) for v in values))

    @classmethod
    def zero(cls) -> "RewardParams":
        return cls(0.0, 0.0, 0.0, 0.0, 0.0)


@dataclass(frozen=True)
class PriorParams:
    """Reference-policy coefficients and the prior mass at zero consumption."""

    mu0: float
    beta0: float
    gamma0: float
    eta0: float
    nu0_bar: float

    def __post_init__(self):
        if not self.beta0 > 0:
            raise ValueError(f"beta0 must be positive, got {self.beta0}")
        if not 0.0 <= self.nu0_bar <= 1.0:
            raise ValueError(f"nu0_bar must lie in [0, 1], got {self.nu0_bar}")
        for name in ("mu0", "gamma0", "eta0"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"prior parameter {name} must be finite")

    def check_compatible(self, reward: RewardParams) -> None:
        """Reject reward parameters for which the posterior is not integrable."""
        if not reward.beta + self.beta0 > 0:
            raise ValueError(
                f"beta + beta0 must be positive (beta={reward.beta}, beta0={self.beta0})"
            )

    @classmethod
    def matching(cls, reward: RewardParams, nu0_bar: float) -> "PriorParams":
        """Prior whose coefficients equal those of ``reward``."""
        return cls(reward.mu, reward.beta, reward.gamma, reward.eta, nu0_bar)


@dataclass(frozen=True)
class PlanSpec:
    fee: float
    quota: float
    price: float
    cycle_days: int

    def __post_init__(self):
        if not self.quota >= 0 or not math.isfinite(self.quota):
            raise ValueError(f"quota must be a finite non-negative number, got {self.quota}")
        if not (self.price >= 0 or is_infinite_price(self.price)) or math.isnan(self.price):
            raise ValueError(f"price must be >= 0 or INFINITE_PRICE, got {self.price}")
        if not math.isfinite(self.fee):
            raise ValueError("fee must be finite")
        if int(self.cycle_days) != self.cycle_days or self.cycle_days < 1:
            raise ValueError(f"cycle_days must be a positive integer, got {self.cycle_days}")
        object.__setattr__(self, "cycle_days", int(self.cycle_days))

    @property
    def allows_overage(self) -> bool:
        return not is_infinite_price(self.price)


@dataclass(frozen=True)
class ConsumptionStep:
    a: float
    q: float
    d: int

    def __post_init__(self):
        if not (self.a >= 0 and self.q >= 0 and self.d >= 0):
            raise ValueError(f"invalid step {self!r}: a, q, d must be non-negative")


def _frozen(x, dtype=float) -> np.ndarray:
    arr = np.array(x, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ConsumptionPath:
    """One billing cycle of daily consumption.

    Steps are stored column-wise (``a``, ``q``, ``d`` arrays); :attr:`steps`
    yields them as :class:`ConsumptionStep` objects.
    """

    a: np.ndarray
    q: np.ndarray
    d: np.ndarray
    plan: PlanSpec
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "a", _frozen(self.a))
        object.__setattr__(self, "q", _frozen(self.q))
        object.__setattr__(self, "d", _frozen(self.d, dtype=np.int64))
        if self.validate:
            check_path(self.a, self.q, self.d, self.plan)

    @classmethod
    def from_steps(cls, steps: Sequence[ConsumptionStep], plan: PlanSpec) -> "ConsumptionPath":
        return cls(
            [s.a for s in steps], [s.q for s in steps], [s.d for s in steps], plan
        )

    @property
    def steps(self) -> list[ConsumptionStep]:
        return [
            ConsumptionStep(float(a), float(q), int(d))
            for a, q, d in zip(self.a, self.q, self.d)
        ]

    def __len__(self) -> int:
        return len(self.a)

    def __iter__(self) -> Iterator[ConsumptionStep]:
        return iter(self.steps)

    def __eq__(self, other):
        if not isinstance(other, ConsumptionPath):
            return NotImplemented
        return (
            self.plan == other.plan
            and np.array_equal(self.a, other.a)
            and np.array_equal(self.q, other.q)
            and np.array_equal(self.d, other.d)
        )

    __hash__ = None


def check_path(a, q, d, plan: PlanSpec, rtol: float = 1e-9) -> None:
    """Validate the state dynamics of a single cycle.

    Raises:
        InvalidPathError: naming the first offending step index.
    """
    a, q, d = np.asarray(a, float), np.asarray(q, float), np.asarray(d)
    n = len(a)
    if not (len(q) == n == len(d)):
        raise InvalidPathError("a, q and d must have equal length")
    if n != plan.cycle_days:
        raise InvalidPathError(f"path has {n} steps but the cycle has {plan.cycle_days} days")
    bad = np.flatnonzero(~((a >= 0) & (q >= 0) & np.isfinite(a) & np.isfinite(q)))
    if bad.size:
        raise InvalidPathError(f"step {bad[0]}: a and q must be finite and non-negative")
    if abs(q[0] - plan.quota) > rtol * (1 + plan.quota):
        raise InvalidPathError(f"step 0: q={q[0]} differs from plan quota {plan.quota}")
    expected_d = plan.cycle_days - np.arange(n)
    bad = np.flatnonzero(d != expected_d)
    if bad.size:
        i = bad[0]
        raise InvalidPathError(f"step {i}: d={d[i]} but expected {expected_d[i]}")
    q_next = np.maximum(q[:-1] - a[:-1], 0.0)
    bad = np.flatnonzero(np.abs(q[1:] - q_next) > rtol * (1 + q[:-1]))
    if bad.size:
        i = bad[0] + 1
        raise InvalidPathError(
            f"step {i}: q={q[i]} but max(q - a, 0) from the previous step is {q_next[i - 1]}"
        )
    if not plan.allows_overage:
        bad = np.flatnonzero(a > q)
        if bad.size:
            raise InvalidPathError(f"step {bad[0]}: overage on a plan without overage")


@dataclass(frozen=True)
class FeatureScales:
    """Empirical means used to normalize the five features.

    A value of ``0.0`` marks a feature whose empirical sum is zero; such a
    feature is unidentified and cannot be normalized.
    """

    mean_a: float
    mean_a2: float
    mean_ad: float
    mean_overage: float
    mean_zero_quota: float

    def __post_init__(self):
        for v in self.as_array():
            if not (math.isfinite(v) and v >= 0):
                raise ValueError("feature scales must be finite and non-negative")

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.mean_a, self.mean_a2, self.mean_ad, self.mean_overage, self.mean_zero_quota]
        )

    @property
    def identified(self) -> np.ndarray:
        return self.as_array() > 0

    def require(self, mask=None) -> np.ndarray:
        """Return the scale vector, raising if a required feature is unidentified."""
        s = self.as_array()
        need = np.ones(N_FEATURES, bool) if mask is None else np.asarray(mask, bool)
        dead = [FEATURE_NAMES[k] for k in range(N_FEATURES) if need[k] and s[k] <= 0]
        if dead:
            raise UnidentifiedFeatureError(
                f"unidentified feature(s) with zero empirical mean: {', '.join(dead)}"
            )
        return s

    @classmethod
    def unit(cls) -> "FeatureScales":
        return cls(1.0, 1.0, 1.0, 1.0, 1.0)


def overage_term(a, q, price):
    """``p * (a - q)_+`` with ``-inf`` utility handled for no-overage plans.

    Returns ``+inf`` where ``a > q`` on an INFINITE_PRICE plan, otherwise the
    finite overage charge.
    """
    excess = np.maximum(np.asarray(a, float) - q, 0.0)
    if is_infinite_price(price):
        return np.where(excess > 0, np.inf, 0.0)
    return price * excess


def reward(params: RewardParams, step: ConsumptionStep | None = None, price: float = 0.0,
           *, a=None, q=None, d=None):
    """One-day utility.

    Either pass a :class:`ConsumptionStep` or keyword arrays ``a``, ``q``,
    ``d`` (broadcast together).  On an INFINITE_PRICE plan consumption above
    the remaining allowance has utility ``-inf``.
    """
    if step is not None:
        a, q, d = step.a, step.q, step.d
    a = np.asarray(a, float)
    q = np.asarray(q, float)
    d = np.asarray(d, float)
    charge = overage_term(a, q, price)
    # utility is -inf above the quota on a no-overage plan, whatever eta is
    with np.errstate(invalid="ignore"):
        overage = np.where(np.isinf(charge), np.inf, params.eta * charge)
    r = (
        params.mu * a
        - 0.5 * params.beta * a * a
        + params.gamma * a * d
        - overage
        + params.kappa * q * (a == 0)
    )
    return float(r) if r.ndim == 0 else r


def raw_features(a, q, d) -> np.ndarray:
    """Un-normalized basis terms, shape ``(..., 5)``."""
    a = np.asarray(a, float)
    q = np.asarray(q, float)
    d = np.asarray(d, float)
    return np.stack(
        [a, a * a, a * d, np.maximum(a - q, 0.0), q * (a == 0)], axis=-1
    )


def features(step: ConsumptionStep, scales: FeatureScales) -> np.ndarray:
    """Normalized feature vector of one step."""
    s = scales.require()
    return raw_features(step.a, step.q, step.d) / s


def _eta_identified(price: float) -> bool:
    return price > 0 and not is_infinite_price(price)


def identified_mask(scales: FeatureScales, price: float) -> np.ndarray:
    """Which of the five coefficients can be estimated from data."""
    mask = scales.identified.copy()
    mask[3] &= _eta_identified(price)
    return mask


def theta_from_raw(params: RewardParams, scales: FeatureScales, price: float) -> np.ndarray:
    """Coefficients of the normalized features.

    Unidentified components are pinned to zero.
    """
    s = scales.as_array()
    mask = identified_mask(scales, price)
    p = price if _eta_identified(price) else 0.0
    theta = np.array(
        [
            params.mu * s[0],
            -0.5 * params.beta * s[1],
            params.gamma * s[2],
            -params.eta * p * s[3],
            params.kappa * s[4],
        ]
    )
    return np.where(mask, theta, 0.0)


def raw_from_theta(theta, scales: FeatureScales, price: float) -> RewardParams:
    """Inverse of :func:`theta_from_raw`; unidentified parameters come back as 0."""
    theta = np.asarray(theta, float)
    s = scales.as_array()
    mask = identified_mask(scales, price)
    safe = np.where(mask, s, 1.0)
    p = price if _eta_identified(price) else 1.0
    raw = np.array(
        [
            theta[0] / safe[0],
            -2.0 * theta[1] / safe[1],
            theta[2] / safe[2],
            -theta[3] / (p * safe[3]),
            theta[4] / safe[4],
        ]
    )
    return RewardParams.from_array(np.where(mask, raw, 0.0))


def transition(step: ConsumptionStep) -> tuple[float, int]:
    """Next ``(q, d)`` after consuming ``step.a``."""
    if step.d < 1:
        raise EndOfCycleError("no day left in the billing cycle (d == 0)")
    return max(step.q - step.a, 0.0), step.d - 1
