"""Feature counts, negative log-likelihood and the convex fit.

Paths are independent and each step contributes
``log Z(q_t, d_t) - theta . Phi(a_t, q_t, d_t)`` to the negative
log-likelihood; the reference-density term ``log pi0`` does not depend on
``theta`` and is left out.  The gradient is the usual exponential-family
identity ``E_pi[Phi] - Phi_observed``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from .model import (
    FEATURE_NAMES,
    N_FEATURES,
    PARAM_NAMES,
    ConsumptionPath,
    FeatureScales,
    PriorParams,
    RewardParams,
    identified_mask,
    is_infinite_price,
    raw_features,
    raw_from_theta,
)
from .optim import minimize
from .partition import NonIntegrableError, _expected_raw, _terms

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FitConfig:
    """Settings of the maximum-likelihood fit.

    ``lam`` weights the penalty ``||theta - theta0||_1`` (``norm="L1"``) or
    ``||theta - theta0||_2^2`` (``norm="L2"``).  ``theta0`` is also the
    starting point; it defaults to zeros.
    """

    lam: float = 0.0
    norm: Literal["L1", "L2"] = "L2"
    theta0: tuple[float, ...] | None = None
    grad_tol: float = 1e-8
    max_iter: int = 500

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be non-negative")
        if self.norm not in ("L1", "L2"):
            raise ValueError("norm must be 'L1' or 'L2'")
        if not self.grad_tol > 0:
            raise ValueError("grad_tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")
        if self.theta0 is not None:
            object.__setattr__(self, "theta0", tuple(float(v) for v in self.theta0))
            if len(self.theta0) != N_FEATURES:
                raise ValueError("theta0 must have five components")

    def start(self) -> np.ndarray:
        return np.zeros(N_FEATURES) if self.theta0 is None else np.array(self.theta0)


@dataclass(frozen=True)
class FitResult:
    theta_hat: np.ndarray
    raw: RewardParams
    nll: float
    grad_norm: float
    iterations: int
    converged: bool
    identified: tuple[bool, ...]
    scales: FeatureScales
    price: float
    message: str = ""
    history: list[float] = field(default_factory=list, repr=False, compare=False)

    def to_dict(self) -> dict:
        params = {
            name: (getattr(self.raw, name) if ok else None)
            for name, ok in zip(PARAM_NAMES, self.identified)
        }
        return {
            "parameters": params,
            "theta": [float(v) for v in self.theta_hat],
            "identified": dict(zip(PARAM_NAMES, map(bool, self.identified))),
            "scales": dict(zip(FEATURE_NAMES, map(float, self.scales.as_array()))),
            "price": None if is_infinite_price(self.price) else self.price,
            "nll": self.nll,
            "grad_norm": self.grad_norm,
            "iterations": self.iterations,
            "converged": self.converged,
            "message": self.message,
        }


def _flatten(corpus: Sequence[ConsumptionPath]):
    if len(corpus) == 0:
        raise ValueError("corpus is empty")
    a = np.concatenate([p.a for p in corpus])
    q = np.concatenate([p.q for p in corpus])
    d = np.concatenate([p.d for p in corpus]).astype(float)
    return a, q, d


def common_price(corpus: Sequence[ConsumptionPath]) -> float:
    prices = {p.plan.price for p in corpus}
    if len(prices) != 1:
        raise ValueError(
            f"all paths must share one overage price to fit a single eta; got {sorted(prices)}"
        )
    return prices.pop()


def compute_scales(corpus: Sequence[ConsumptionPath]) -> FeatureScales:
    """Empirical means of the raw feature terms over every step of the corpus.

    A feature whose terms are all zero gets scale 0 (unidentified).
    """
    a, q, d = _flatten(corpus)
    means = raw_features(a, q, d).mean(axis=0)
    return FeatureScales(*(float(m) for m in means))


def path_feature_counts(path: ConsumptionPath, scales: FeatureScales) -> np.ndarray:
    """Sum of normalized features along one path."""
    s = scales.require()
    return raw_features(path.a, path.q, path.d).sum(axis=0) / s


class Objective:
    """Negative log-likelihood of a corpus as a function of ``theta``.

    Built once per corpus so repeated evaluations only redo the
    ``theta``-dependent work.
    """

    def __init__(self, corpus: Sequence[ConsumptionPath], prior: PriorParams,
                 scales: FeatureScales, config: FitConfig = FitConfig()):
        self.prior = prior
        self.scales = scales
        self.config = config
        self.price = common_price(corpus)
        self.n_paths = len(corpus)
        a, self.q, self.d = _flatten(corpus)
        raw = raw_features(a, self.q, self.d)
        self.free = identified_mask(scales, self.price)
        self.safe_scales = np.where(self.free, scales.as_array(), 1.0)
        if is_infinite_price(self.price) and np.any(a > self.q):
            raise ValueError("corpus has overage on a plan that does not allow it")
        # pairwise summation keeps the sum independent of evaluation order
        self.observed = raw.sum(axis=0) / self.safe_scales
        self.center = config.start()

    def reward_params(self, theta) -> RewardParams:
        return raw_from_theta(theta, self.scales, self.price)

    def data_term(self, theta):
        """Unpenalized NLL and its gradient; ``(inf, nan)`` outside the domain."""
        theta = np.asarray(theta, float)
        theta = np.where(self.free, theta, 0.0)
        try:
            params = self.reward_params(theta)
            terms = _terms(params, self.prior, self.q, self.d, self.price)
        except (NonIntegrableError, ValueError):
            return math.inf, np.full(N_FEATURES, np.nan)
        log_z = terms.z.log_Z.sum()
        expected = _expected_raw(terms, self.d).sum(axis=0) / self.safe_scales
        value = (log_z - theta.dot(self.observed)) / self.n_paths
        grad = (expected - self.observed) / self.n_paths
        return float(value), np.where(self.free, grad, 0.0)

    def penalty(self, theta):
        cfg = self.config
        diff = np.where(self.free, np.asarray(theta, float) - self.center, 0.0)
        if cfg.lam == 0:
            return 0.0, np.zeros(N_FEATURES)
        if cfg.norm == "L2":
            return cfg.lam * diff.dot(diff), 2 * cfg.lam * diff
        # subgradient of |x| taken as 0 at the kink
        return cfg.lam * np.abs(diff).sum(), cfg.lam * np.sign(diff)

    def __call__(self, theta):
        value, grad = self.data_term(theta)
        if not math.isfinite(value):
            return value, grad
        pv, pg = self.penalty(theta)
        return value + pv, grad + pg


def nll(theta, corpus: Sequence[ConsumptionPath], prior: PriorParams, scales: FeatureScales,
        config: FitConfig = FitConfig()):
    """Penalized negative log-likelihood per path and its gradient."""
    return Objective(corpus, prior, scales, config)(theta)


def fit(corpus: Sequence[ConsumptionPath], prior: PriorParams, config: FitConfig = FitConfig(),
        scales: FeatureScales | None = None) -> FitResult:
    """Maximum-likelihood (or penalized) estimate of the reward parameters.

    Feature scales are computed from ``corpus`` unless given.  Coefficients
    of unidentified features are held at zero and flagged.
    """
    scales = compute_scales(corpus) if scales is None else scales
    obj = Objective(corpus, prior, scales, config)
    messages = []
    if not obj.free[3]:
        messages.append(
            "eta is not identified from this corpus (no overage observed or no overage price); "
            "use eta_lower_bound to bound it from plan choices"
        )
    for k in (0, 1, 2, 4):
        if not obj.free[k]:
            messages.append(f"feature {FEATURE_NAMES[k]} never occurs; {PARAM_NAMES[k]} held at 0")
    x0 = np.where(obj.free, config.start(), 0.0)
    if config.norm == "L1" and config.lam > 0:
        res = minimize(obj.data_term, x0, l1=config.lam, center=obj.center, free=obj.free,
                       grad_tol=config.grad_tol, max_iter=config.max_iter)
    else:
        res = minimize(obj, x0, free=obj.free, grad_tol=config.grad_tol,
                       max_iter=config.max_iter)
    if not res.converged:
        log.warning("fit did not converge: %s (|g| = %.3g)", res.message, res.pg_norm)
    messages.insert(0, res.message)
    theta = np.where(obj.free, res.x, 0.0)
    return FitResult(
        theta_hat=theta,
        raw=obj.reward_params(theta),
        nll=float(res.fun),
        grad_norm=res.pg_norm,
        iterations=res.n_iter,
        converged=res.converged,
        identified=tuple(bool(v) for v in obj.free),
        scales=scales,
        price=obj.price,
        message="; ".join(messages),
        history=res.history,
    )
