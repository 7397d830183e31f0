"""State-dependent normalization ``Z(q, d)`` of the one-day action policy.

With the zero-inflated spliced-Gaussian reference distribution, the policy
``pi(a | q, d) ~ pi0(a | q, d) * exp(r(a, q, d))`` integrates in closed form:
each Gaussian branch times ``exp`` of a quadratic reward is again Gaussian
after completing the square, so::

    Z = nu0 * exp(kappa*q) + (1 - nu0) * (I1 + I2)

with ``I1`` (``I2``) the mass of the lower (upper) branch.  Here the masses
are assembled as log interval probabilities rather than CDF ratios, so no
tail probability is ever formed in linear space.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np
from scipy import integrate
from scipy.special import log_expit

from .dist import (
    Spliced,
    _log_mass,
    _raw_moments,
    prior_spliced,
)
from .model import (
    FeatureScales,
    PriorParams,
    RewardParams,
    is_infinite_price,
)


class NonIntegrableError(ValueError):
    """``beta + beta0 <= 0``: the exponentiated reward is not integrable."""


class QuadratureError(RuntimeError):
    def __init__(self, message, estimate):
        super().__init__(f"{message} (estimate {estimate!r})")
        self.estimate = estimate


class ZParts(NamedTuple):
    log_atom: float | np.ndarray
    log_I1: float | np.ndarray
    log_I2: float | np.ndarray
    log_Z: float | np.ndarray


class _Terms(NamedTuple):
    """Everything the posterior needs at a batch of states."""

    z: ZParts
    post: Spliced
    log_nu: np.ndarray


def _scalarize(x):
    x = np.asarray(x)
    return float(x) if x.ndim == 0 else x


def _check_integrable(reward: RewardParams, prior: PriorParams) -> float:
    precision = prior.beta0 + reward.beta
    if not precision > 0:
        raise NonIntegrableError(
            f"beta + beta0 = {precision} <= 0: posterior action density is not integrable"
        )
    return precision


def _terms(reward: RewardParams, prior: PriorParams, q, d, price: float) -> _Terms:
    precision = _check_integrable(reward, prior)
    no_overage = is_infinite_price(price)
    q, d = np.broadcast_arrays(np.asarray(q, float), np.asarray(d, float))
    sp0 = prior_spliced(prior, q, d, price)

    sd = 1.0 / math.sqrt(precision)
    half_log_ratio = 0.5 * math.log(prior.beta0 / precision)
    b1 = prior.mu0 + prior.gamma0 * d
    c1 = b1 + reward.mu + reward.gamma * d
    mean1 = c1 / precision
    log_mass1 = _log_mass(mean1, sd, 0.0, q)
    with np.errstate(invalid="ignore"):
        log_I1 = (
            sp0.log_w1 + half_log_ratio + c1 * c1 / (2 * precision)
            - b1 * b1 / (2 * prior.beta0) + log_mass1 - sp0.log_mass1
        )
    log_I1 = np.where(sp0.log_w1 == -np.inf, -np.inf, log_I1)

    if no_overage:
        mean2 = np.full_like(mean1, np.nan)
        log_mass2 = np.full_like(mean1, -np.inf)
        log_I2 = np.full_like(mean1, -np.inf)
    else:
        b2 = b1 - prior.eta0 * price
        c2 = b2 + reward.mu + reward.gamma * d - reward.eta * price
        mean2 = c2 / precision
        log_mass2 = _log_mass(mean2, sd, q, np.inf)
        with np.errstate(invalid="ignore"):
            log_I2 = (
                sp0.log_w2 + half_log_ratio + c2 * c2 / (2 * precision)
                - b2 * b2 / (2 * prior.beta0) + reward.eta * price * q
                + log_mass2 - sp0.log_mass2
            )
        log_I2 = np.where(sp0.log_w2 == -np.inf, -np.inf, log_I2)

    with np.errstate(divide="ignore"):
        log_atom = math.log(prior.nu0_bar) + reward.kappa * q if prior.nu0_bar > 0 \
            else np.full_like(q, -np.inf)
        log_cont = np.log1p(-prior.nu0_bar) + np.logaddexp(log_I1, log_I2)
    log_Z = np.logaddexp(log_atom, log_cont)
    if np.any(~np.isfinite(log_Z)):
        raise ValueError("partition function is zero or not finite at some state")

    # posterior splice weight omega = I2 / (I1 + I2), as a logistic of the log ratio
    with np.errstate(invalid="ignore"):
        x = log_I2 - log_I1
        log_w1, log_w2 = log_expit(-x), log_expit(x)
    empty = (log_I1 == -np.inf) & (log_I2 == -np.inf)
    log_w1 = np.where(empty, -np.inf, log_w1)
    log_w2 = np.where(empty, -np.inf, log_w2)

    post = Spliced(q, mean1, mean2, sd, log_mass1, log_mass2, log_w1, log_w2)
    return _Terms(ZParts(log_atom, log_I1, log_I2, log_Z), post, log_atom - log_Z)


def z_closed_form(reward: RewardParams, prior: PriorParams, q, d, price: float) -> ZParts:
    """Exact ``log Z`` and its atom / lower / upper components.

    ``q`` and ``d`` may be arrays (broadcast together).

    Raises:
        NonIntegrableError: if ``reward.beta + prior.beta0 <= 0``.
    """
    z = _terms(reward, prior, q, d, price).z
    return ZParts(*(_scalarize(v) for v in z))


def _branch_pieces(lo, hi, peak, width):
    """Breakpoints concentrating quadrature effort around the integrand's bulk."""
    offsets = np.array([-40, -20, -10, -5, -2, -1, 0, 1, 2, 5, 10, 20, 40], float)
    pts = np.clip(peak + width * offsets, lo, hi)
    pts = np.unique(np.concatenate([[lo], pts[np.isfinite(pts)]]))
    pieces = list(zip(pts[:-1], pts[1:]))
    if math.isinf(hi):
        pieces.append((pts[-1], math.inf))
    elif pts[-1] < hi:
        pieces.append((pts[-1], hi))
    return [(a, b) for a, b in pieces if b > a]


def z_quadrature(reward: RewardParams, prior: PriorParams, q: float, d: float, price: float,
                 tol: float = 1e-11, log: bool = False) -> float:
    """Numerical ``Z`` by adaptive Gauss-Kronrod quadrature.

    Integrates ``pi0(a) * exp(r(a))`` over ``(0, q)`` and ``(q, inf)``
    separately, since the integrand has a kink at ``q``.  Reference oracle
    for :func:`z_closed_form`; not used when fitting.

    Raises:
        QuadratureError: if a sub-integral fails to converge.
    """
    precision = _check_integrable(reward, prior)
    q, d = float(q), float(d)
    sd = 1.0 / math.sqrt(precision)
    sp0 = prior_spliced(prior, q, d, price)
    sd0 = sp0.sd
    mu, beta, gamma, eta = reward.mu, reward.beta, reward.gamma, reward.eta

    def branch_log_integrand(log_w, mean, log_mass, overage_price):
        const = float(log_w) - float(log_mass) - math.log(sd0) - 0.5 * math.log(2 * math.pi)
        mean = float(mean)

        def f(a):
            z = (a - mean) / sd0
            r = mu * a - 0.5 * beta * a * a + gamma * a * d - eta * overage_price * max(a - q, 0.0)
            return const - 0.5 * z * z + r
        return f

    # the log-integrand on each branch is a concave quadratic with this vertex
    b1 = prior.mu0 + prior.gamma0 * d
    vertex1 = (b1 + mu + gamma * d) / precision
    branches = []
    if q > 0 and sp0.log_w1 > -math.inf:
        branches.append((0.0, q, vertex1,
                         branch_log_integrand(sp0.log_w1, sp0.mean1, sp0.log_mass1, 0.0)))
    if not is_infinite_price(price) and sp0.log_w2 > -math.inf:
        vertex2 = vertex1 - (prior.eta0 + eta) * price / precision
        branches.append((q, math.inf, vertex2,
                         branch_log_integrand(sp0.log_w2, sp0.mean2, sp0.log_mass2, price)))

    logs = []
    for lo, hi, vertex, f in branches:
        peak = min(max(vertex, lo), hi)
        slope = precision * abs(peak - vertex)
        width = sd if slope == 0 else min(sd, 1.0 / slope)
        ref = f(peak)
        total, err_total = 0.0, 0.0
        for a, b in _branch_pieces(lo, hi, peak, width):
            res = integrate.quad(
                lambda x: math.exp(f(x) - ref),
                a, b, epsabs=0.0, epsrel=tol, limit=200, full_output=1,
            )
            val, err = res[0], res[1]
            if len(res) > 3 and res[2].get("last", 0) >= 200:
                raise QuadratureError(f"quadrature did not converge on [{a}, {b}]", val)
            total += val
            err_total += err
        if total > 0 and err_total > max(1e3 * tol * total, 1e-300):
            raise QuadratureError("quadrature error estimate above tolerance", total)
        if total > 0:
            logs.append(ref + math.log(total))

    with np.errstate(divide="ignore"):
        log_cont = float(np.logaddexp.reduce(logs)) if logs else -math.inf
        log_atom = math.log(prior.nu0_bar) + reward.kappa * q if prior.nu0_bar > 0 else -math.inf
        log_z = float(np.logaddexp(log_atom, np.log1p(-prior.nu0_bar) + log_cont))
    return log_z if log else math.exp(log_z)


def posterior_feature_expectation(reward: RewardParams, prior: PriorParams, q, d, price: float,
                                  scales: FeatureScales) -> np.ndarray:
    """Expected normalized features under the policy at ``(q, d)``.

    Equals the gradient of ``log Z`` with respect to the feature
    coefficients.  Returns shape ``(5,)`` for scalar states, ``(..., 5)``
    otherwise.
    """
    s = scales.require()
    raw = expected_raw_features(reward, prior, q, d, price)
    return raw / s


def expected_raw_features(reward: RewardParams, prior: PriorParams, q, d, price: float) -> np.ndarray:
    q, d = np.broadcast_arrays(np.asarray(q, float), np.asarray(d, float))
    return _expected_raw(_terms(reward, prior, q, d, price), d)


def _expected_raw(terms: _Terms, d) -> np.ndarray:
    post = terms.post
    nu = np.exp(terms.log_nu)
    w1 = (1.0 - nu) * np.exp(post.log_w1)
    w2 = (1.0 - nu) * np.exp(post.log_w2)
    q = post.q
    with np.errstate(invalid="ignore", over="ignore"):
        e1, e2 = _raw_moments(post.mean1, post.sd, 0.0, q)
        f1, f2 = _raw_moments(post.mean2, post.sd, q, np.inf)
    e1, e2 = np.where(w1 > 0, e1, 0.0), np.where(w1 > 0, e2, 0.0)
    f1, f2 = np.where(w2 > 0, f1, 0.0), np.where(w2 > 0, f2, 0.0)
    ea = w1 * e1 + w2 * f1
    ea2 = w1 * e2 + w2 * f2
    excess = w2 * np.where(w2 > 0, f1 - q, 0.0)
    return np.stack([ea, ea2, ea * d, excess, nu * q], axis=-1)
