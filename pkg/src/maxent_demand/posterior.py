"""Optimal one-day action distribution and consumption-path simulation.

Multiplying the zero-inflated spliced-Gaussian reference by ``exp(r)`` gives
a distribution of the same family: an atom at zero with state-dependent mass
``nu(q, d)`` and a spliced Gaussian on ``a > 0`` whose branches have
precision ``beta0 + beta`` and whose upper-branch weight ``omega(q, d)`` is
the share of ``I2`` in ``I1 + I2``.

Simulation draws two uniforms per day: one picks the atom or a branch, the
other is pushed through the branch's inverse CDF.  Each cycle gets its own
seed substream, so results do not depend on how many cycles are simulated
together, and plans evaluated with the same seed share random numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import log_expit

from .dist import (
    Spliced,
    TruncNormal,
    _log_mass,
    _log_normal_pdf,
    _spliced_cdf,
    _spliced_logpdf,
    _std_ppf,
    truncnorm_ppf,
)
from .model import (
    ConsumptionPath,
    PlanSpec,
    PriorParams,
    RewardParams,
    is_infinite_price,
)
from .partition import _terms

# smallest positive double; continuous branches never return an exact zero
_TINY = np.nextafter(0.0, 1.0)


@dataclass(frozen=True)
class PosteriorAction:
    """Action distribution at a single state ``(q, d)``.

    ``branch1`` / ``branch2`` are ``None`` when the corresponding branch
    carries no mass (``q == 0``, or no overage allowed).
    """

    q: float
    d: float
    nu: float
    omega: float
    branch1: TruncNormal | None
    branch2: TruncNormal | None
    spliced: Spliced = field(repr=False, compare=False)

    def cont_logpdf(self, a):
        """Log-density of the spliced continuous component (mass one)."""
        out = _spliced_logpdf(self.spliced, a)
        return float(out) if np.ndim(out) == 0 else out

    def logpdf(self, a):
        """Log-density on ``a > 0`` including the ``1 - nu`` factor."""
        with np.errstate(divide="ignore"):
            return np.log1p(-self.nu) + self.cont_logpdf(a)

    def cont_cdf(self, x):
        out = _spliced_cdf(self.spliced, x)
        return float(out) if np.ndim(out) == 0 else out

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """``size`` independent draws (vectorized :func:`sample_action`)."""
        with np.errstate(divide="ignore"):
            log_nu = math.log(self.nu) if self.nu > 0 else -math.inf
        u = rng.random((2, size))
        sp = self.spliced
        return _draw(log_nu, sp._replace(q=np.full(size, sp.q)), u[0], u[1])

    def density_jump(self) -> tuple[float, float]:
        """Densities just below and just above the splice point ``q``."""
        sp = self.spliced
        with np.errstate(invalid="ignore"):
            below = sp.log_w1 + _log_normal_pdf(sp.q, sp.mean1, sp.sd) - sp.log_mass1
            above = sp.log_w2 + _log_normal_pdf(sp.q, sp.mean2, sp.sd) - sp.log_mass2
        below = 0.0 if sp.log_w1 == -np.inf else float(np.exp(below))
        above = 0.0 if sp.log_w2 == -np.inf else float(np.exp(above))
        return (1.0 - self.nu) * below, (1.0 - self.nu) * above


def posterior_at(reward: RewardParams, prior: PriorParams, q: float, d: float,
                 price: float) -> PosteriorAction:
    """Action distribution at state ``(q, d)``.

    Raises:
        NonIntegrableError: if ``reward.beta + prior.beta0 <= 0``.
    """
    t = _terms(reward, prior, float(q), float(d), price)
    sp = t.post
    var = sp.sd ** 2
    branch1 = TruncNormal(float(sp.mean1), var, 0.0, float(q)) if sp.log_w1 > -np.inf else None
    branch2 = TruncNormal(float(sp.mean2), var, float(q)) if sp.log_w2 > -np.inf else None
    return PosteriorAction(
        float(q), float(d), math.exp(float(t.log_nu)), float(np.exp(sp.log_w2)),
        branch1, branch2, sp,
    )


def posterior_splice_weight_continuity(reward: RewardParams, prior: PriorParams, q, d,
                                       price: float, log: bool = False):
    """Upper-branch weight solved from continuity of the posterior at ``q``.

    An independent route to ``omega``: it only uses the posterior branch
    normals, not the partition-function components.  With ``log=True``
    returns ``log(omega)``, which stays finite where ``omega`` underflows.
    """
    precision = prior.beta0 + reward.beta
    q, d = np.broadcast_arrays(np.asarray(q, float), np.asarray(d, float))
    sd = 1.0 / math.sqrt(precision)
    c1 = prior.mu0 + reward.mu + (prior.gamma0 + reward.gamma) * d
    mean1 = c1 / precision
    if is_infinite_price(price):
        w = np.where(q > 0, 0.0, np.nan)
        if log:
            with np.errstate(divide="ignore"):
                w = np.log(w)
        return float(w) if w.ndim == 0 else w
    mean2 = (c1 - (prior.eta0 + reward.eta) * price) / precision
    lphi1 = _log_normal_pdf(q, mean1, sd) - _log_mass(mean1, sd, 0.0, q)
    lphi2 = _log_normal_pdf(q, mean2, sd) - _log_mass(mean2, sd, q, np.inf)
    with np.errstate(invalid="ignore"):
        w = log_expit(lphi1 - lphi2)
    w = np.where(q > 0, w, 0.0)
    if not log:
        w = np.exp(w)
    return float(w) if w.ndim == 0 else w


def _draw(log_nu, post: Spliced, u_pick, u_value):
    """Vectorized draw of actions from uniforms."""
    nu = np.exp(log_nu)
    w1 = np.exp(post.log_w1)
    w2 = np.exp(post.log_w2)
    atom = u_pick < nu
    pick_upper = u_pick >= nu + (1.0 - nu) * w1
    pick_upper = np.where(w1 == 0, True, np.where(w2 == 0, False, pick_upper))
    u = np.where(u_value > 0, u_value, 0.5 * _TINY)
    with np.errstate(invalid="ignore", divide="ignore"):
        z1 = _std_ppf(u, (0.0 - post.mean1) / post.sd, (post.q - post.mean1) / post.sd,
                      post.q / post.sd)
        z2 = _std_ppf(u, (post.q - post.mean2) / post.sd, np.inf)
    x1 = np.clip(post.mean1 + post.sd * z1, _TINY, post.q)
    x2 = np.maximum(post.mean2 + post.sd * z2, post.q)
    return np.where(atom, 0.0, np.where(pick_upper, x2, x1))


def sample_action(post: PosteriorAction, rng: np.random.Generator) -> float:
    """One draw: exactly 0 with probability ``nu``, otherwise from a branch."""
    u_pick, u_value = rng.random(2)
    if u_pick < post.nu or (post.branch1 is None and post.branch2 is None):
        return 0.0
    w1 = (1.0 - post.nu) * (1.0 - post.omega)
    upper = post.branch1 is None or (post.branch2 is not None and u_pick >= post.nu + w1)
    u_value = u_value if u_value > 0 else 0.5 * _TINY
    if upper:
        return float(truncnorm_ppf(post.branch2, u_value))
    return max(float(truncnorm_ppf(post.branch1, u_value)), _TINY)


def cycle_seed(seed, index: int) -> np.random.SeedSequence:
    """Seed substream of cycle ``index`` under a master seed."""
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return np.random.SeedSequence(root.entropy, spawn_key=tuple(root.spawn_key) + (index,))


def cycle_uniforms(seed, n_cycles: int, n_days: int, start: int = 0) -> np.ndarray:
    """Uniforms of shape ``(n_cycles, n_days, 2)`` from per-cycle substreams."""
    out = np.empty((n_cycles, n_days, 2))
    for i in range(n_cycles):
        out[i] = np.random.default_rng(cycle_seed(seed, start + i)).random((n_days, 2))
    return out


def simulate_arrays(reward: RewardParams, prior: PriorParams, plan: PlanSpec,
                    uniforms: np.ndarray):
    """Simulate cycles from pre-drawn uniforms; returns ``(a, q, d)`` arrays.

    ``a`` and ``q`` have shape ``(n_cycles, cycle_days)``; ``d`` has shape
    ``(cycle_days,)``.
    """
    n, days = uniforms.shape[0], plan.cycle_days
    if uniforms.shape[1] < days:
        raise ValueError("not enough uniforms for the cycle length")
    a = np.empty((n, days))
    q = np.empty((n, days))
    d = plan.cycle_days - np.arange(days)
    q_now = np.full(n, float(plan.quota))
    for t in range(days):
        terms = _terms(reward, prior, q_now, float(d[t]), plan.price)
        q[:, t] = q_now
        a[:, t] = _draw(terms.log_nu, terms.post, uniforms[:, t, 0], uniforms[:, t, 1])
        q_now = np.maximum(q_now - a[:, t], 0.0)
    return a, q, d


def simulate_cycle(reward: RewardParams, prior: PriorParams, plan: PlanSpec,
                   rng: np.random.Generator) -> ConsumptionPath:
    """Simulate one billing cycle, drawing uniforms from ``rng``."""
    prior.check_compatible(reward)
    u = rng.random((1, plan.cycle_days, 2))
    a, q, d = simulate_arrays(reward, prior, plan, u)
    return ConsumptionPath(a[0], q[0], d, plan, validate=False)


def simulate_corpus(reward: RewardParams, prior: PriorParams, plan: PlanSpec, n_cycles: int,
                    seed, start: int = 0) -> list[ConsumptionPath]:
    """Simulate ``n_cycles`` independent cycles with per-cycle seed substreams.

    Cycle ``i`` uses substream ``start + i`` of ``seed``, so any slice of a
    corpus can be regenerated on its own.
    """
    prior.check_compatible(reward)
    u = cycle_uniforms(seed, n_cycles, plan.cycle_days, start)
    a, q, d = simulate_arrays(reward, prior, plan, u)
    return [ConsumptionPath(a[i], q[i], d, plan, validate=False) for i in range(n_cycles)]
