"""Truncated-normal primitives and the reference (prior) action distribution.

Everything is evaluated in log space from ``scipy.special.log_ndtr`` so that
intervals lying tens of standard deviations into a tail keep full relative
precision.  The private ``_*`` helpers are vectorized over numpy arrays and
are shared with the partition and posterior modules.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import log_expit, log_ndtr, ndtri_exp

from .model import ConsumptionStep, PriorParams, is_infinite_price

LOG_SQRT_2PI = 0.5 * math.log(2 * math.pi)


def _log1mexp(x):
    """``log(1 - exp(x))`` for ``x <= 0``."""
    x = np.asarray(x, float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(x > -math.log(2), np.log(-np.expm1(x)), np.log1p(-np.exp(x)))


def _log_std_pdf(z):
    z = np.asarray(z, float)
    return -0.5 * z * z - LOG_SQRT_2PI


# Gauss-Legendre rule on [0, 1] for narrow intervals, where Phi(beta) - Phi(alpha)
# and phi(alpha) - phi(beta) cancel catastrophically but the density is nearly flat
_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W
_NARROW = 0.1


def _width(alpha, beta, width):
    if width is None:
        with np.errstate(invalid="ignore"):
            return beta - alpha
    return np.broadcast_to(np.asarray(width, float), np.shape(alpha))


def _narrow(alpha, beta, width):
    """Intervals over which ``log phi`` changes by less than ``_NARROW``."""
    with np.errstate(invalid="ignore"):
        return np.isfinite(alpha) & np.isfinite(beta) & (
            width * (1.0 + np.abs(alpha) + np.abs(beta)) < _NARROW
        )


def _gl_nodes(alpha, width):
    """Nodes ``(..., 8)`` and log weights for integrating over ``[alpha, alpha + width]``."""
    a = np.where(np.isfinite(alpha), alpha, 0.0)[..., None]
    width = np.where(np.isfinite(width), np.maximum(width, 0.0), 0.0)[..., None]
    t = a + width * _GL_X
    with np.errstate(divide="ignore"):
        log_w = np.log(width) + np.log(_GL_W)
    return t, log_w + _log_std_pdf(t)


def _log_std_interval(alpha, beta, width=None):
    """``log(Phi(beta) - Phi(alpha))`` for standardized bounds ``alpha <= beta``.

    ``width`` is ``beta - alpha`` when the caller knows it more accurately
    than the difference of the rounded bounds.
    """
    alpha, beta = np.broadcast_arrays(np.asarray(alpha, float), np.asarray(beta, float))
    width = _width(alpha, beta, width)
    with np.errstate(divide="ignore", invalid="ignore"):
        ls_a, ls_b = log_ndtr(-alpha), log_ndtr(-beta)
        lc_a, lc_b = log_ndtr(alpha), log_ndtr(beta)
        right = ls_a + _log1mexp(ls_b - ls_a)
        left = lc_b + _log1mexp(lc_a - lc_b)
        middle = np.log1p(-np.exp(lc_a) - np.exp(ls_b))
        out = np.where(alpha > 0, right, np.where(beta < 0, left, middle))
        narrow = _narrow(alpha, beta, width)
        if np.any(narrow):
            _, log_terms = _gl_nodes(alpha, width)
            out = np.where(narrow, np.logaddexp.reduce(log_terms, axis=-1), out)
    out = np.where(alpha >= beta, -np.inf, out)
    return out[()] if out.ndim == 0 else out


def _std_moments(alpha, beta, width=None):
    """``E[Z]`` and ``E[Z^2]`` of a standard normal truncated to ``[alpha, beta]``."""
    alpha, beta = np.broadcast_arrays(np.asarray(alpha, float), np.asarray(beta, float))
    width = _width(alpha, beta, width)
    log_mass = _log_std_interval(alpha, beta, width)
    with np.errstate(over="ignore", invalid="ignore"):
        pa = np.exp(_log_std_pdf(alpha) - log_mass)
        pb = np.exp(_log_std_pdf(beta) - log_mass)
        apa = np.where(np.isinf(alpha), 0.0, alpha * pa)
        bpb = np.where(np.isinf(beta), 0.0, beta * pb)
        m1, m2 = pa - pb, 1.0 + apa - bpb
        narrow = _narrow(alpha, beta, width)
        if np.any(narrow):
            t, log_terms = _gl_nodes(alpha, width)
            w = np.exp(log_terms - log_mass[..., None])
            m1 = np.where(narrow, (w * t).sum(axis=-1), m1)
            m2 = np.where(narrow, (w * t * t).sum(axis=-1), m2)
    return m1, m2


def _std_ppf(u, alpha, beta, width=None):
    """Inverse CDF of a standard normal truncated to ``[alpha, beta]``.

    Right-tail intervals are inverted on the survival scale so that both
    the target probability and the quantile keep full precision.
    """
    u, alpha, beta = np.broadcast_arrays(
        np.asarray(u, float), np.asarray(alpha, float), np.asarray(beta, float)
    )
    log_mass = _log_std_interval(alpha, beta, width)
    with np.errstate(divide="ignore", invalid="ignore"):
        from_right = -ndtri_exp(np.logaddexp(log_ndtr(-beta), np.log1p(-u) + log_mass))
        from_left = ndtri_exp(np.logaddexp(log_ndtr(alpha), np.log(u) + log_mass))
    z = np.where(alpha > 0, from_right, from_left)
    return np.clip(z, alpha, beta)


@dataclass(frozen=True)
class TruncNormal:
    """Normal ``N(mean, variance)`` restricted to ``[lower, upper]``."""

    mean: float
    variance: float
    lower: float = -math.inf
    upper: float = math.inf

    def __post_init__(self):
        if not self.variance > 0:
            raise ValueError("variance must be positive")
        if not self.lower < self.upper:
            raise ValueError(f"need lower < upper, got [{self.lower}, {self.upper}]")

    @property
    def sd(self) -> float:
        return math.sqrt(self.variance)

    def standardize(self, x):
        return (np.asarray(x, float) - self.mean) / self.sd

    @property
    def log_mass(self) -> float:
        """Log of the untruncated probability of ``[lower, upper]``."""
        return float(_log_mass(self.mean, self.sd, self.lower, self.upper))


def truncnorm_logpdf(dist: TruncNormal, x):
    """Log-density; ``-inf`` outside the support."""
    x = np.asarray(x, float)
    z = dist.standardize(x)
    out = _log_std_pdf(z) - math.log(dist.sd) - dist.log_mass
    out = np.where((x >= dist.lower) & (x <= dist.upper), out, -np.inf)
    return float(out) if out.ndim == 0 else out


def truncnorm_logcdf_interval(dist: TruncNormal, a, b):
    """Log of the probability that the truncated variable falls in ``[a, b]``."""
    lo = np.maximum(np.asarray(a, float), dist.lower)
    hi = np.minimum(np.asarray(b, float), dist.upper)
    out = _log_mass(dist.mean, dist.sd, lo, hi) - dist.log_mass
    out = np.where(lo < hi, out, -np.inf)
    return float(out) if out.ndim == 0 else out


def truncnorm_cdf(dist: TruncNormal, x):
    x = np.asarray(x, float)
    x = np.clip(x, dist.lower, dist.upper)
    out = np.exp(_log_mass(dist.mean, dist.sd, dist.lower, x) - dist.log_mass)
    return float(out) if out.ndim == 0 else out


def truncnorm_ppf(dist: TruncNormal, u):
    z = _std_ppf(u, dist.standardize(dist.lower), dist.standardize(dist.upper),
                 (dist.upper - dist.lower) / dist.sd)
    x = np.clip(dist.mean + dist.sd * z, dist.lower, dist.upper)
    return float(x) if x.ndim == 0 else x


def truncnorm_sample(dist: TruncNormal, rng: np.random.Generator, size=None):
    """Draw by inverse CDF from uniforms of ``rng``."""
    return truncnorm_ppf(dist, rng.random(size))


def truncnorm_moments(dist: TruncNormal) -> tuple[float, float]:
    """First and second raw moments ``(E[X], E[X^2])``."""
    m, s = dist.mean, dist.sd
    ez, ez2 = _std_moments(dist.standardize(dist.lower), dist.standardize(dist.upper),
                           (dist.upper - dist.lower) / s)
    return float(m + s * ez), float(m * m + 2 * m * s * ez + s * s * ez2)


def _raw_moments(mean, sd, lower, upper):
    """Vectorized ``(E[X], E[X^2])`` for ``N(mean, sd^2)`` on ``[lower, upper]``."""
    ez, ez2 = _std_moments((lower - mean) / sd, (upper - mean) / sd, (upper - lower) / sd)
    return mean + sd * ez, mean * mean + 2 * mean * sd * ez + sd * sd * ez2


def _log_mass(mean, sd, lower, upper):
    with np.errstate(invalid="ignore"):
        width = (upper - lower) / sd
    return _log_std_interval((lower - mean) / sd, (upper - mean) / sd, width)


def _log_normal_pdf(x, mean, sd):
    return _log_std_pdf((x - mean) / sd) - np.log(sd)


# --- spliced Gaussian ------------------------------------------------------


class Spliced(NamedTuple):
    """Vectorized parameters of a two-branch spliced Gaussian.

    The lower branch is ``N(mean1, sd^2)`` on ``(0, q]`` with weight
    ``1 - omega``; the upper branch is ``N(mean2, sd^2)`` on ``[q, inf)``
    with weight ``omega``.  ``log_mass1``/``log_mass2`` are the untruncated
    log-probabilities of those intervals.
    """

    q: np.ndarray
    mean1: np.ndarray
    mean2: np.ndarray
    sd: float
    log_mass1: np.ndarray
    log_mass2: np.ndarray
    log_w1: np.ndarray
    log_w2: np.ndarray


def _spliced_logpdf(sp: Spliced, a):
    a = np.asarray(a, float)
    with np.errstate(invalid="ignore"):
        lower = sp.log_w1 + _log_normal_pdf(a, sp.mean1, sp.sd) - sp.log_mass1
        upper = sp.log_w2 + _log_normal_pdf(a, sp.mean2, sp.sd) - sp.log_mass2
    lower = np.where(sp.log_w1 == -np.inf, -np.inf, lower)
    upper = np.where(sp.log_w2 == -np.inf, -np.inf, upper)
    out = np.where(a <= sp.q, lower, upper)
    return np.where(a > 0, out, -np.inf)


def _spliced_cdf(sp: Spliced, x):
    """CDF of the spliced density (continuous part only, total mass one)."""
    x = np.asarray(x, float)
    with np.errstate(invalid="ignore", divide="ignore"):
        f1 = np.exp(_log_mass(sp.mean1, sp.sd, 0.0, np.clip(x, 0.0, sp.q)) - sp.log_mass1)
        f2 = np.exp(_log_mass(sp.mean2, sp.sd, sp.q, np.maximum(x, sp.q)) - sp.log_mass2)
    w1, w2 = np.exp(sp.log_w1), np.exp(sp.log_w2)
    f1 = np.where(w1 > 0, f1, 0.0)
    f2 = np.where(w2 > 0, f2, 0.0)
    return np.where(x <= 0, 0.0, w1 * f1 + w2 * f2)


def _splice_log_weights(q, mean1, mean2, sd, log_mass1, log_mass2, no_overage):
    """``(log(1 - omega), log(omega))`` from continuity of the density at ``q``.

    ``omega = 1`` when ``q == 0`` (empty lower branch); ``omega = 0`` when
    the upper branch does not exist.
    """
    with np.errstate(invalid="ignore"):
        lphi1 = _log_normal_pdf(q, mean1, sd) - log_mass1
        lphi2 = _log_normal_pdf(q, mean2, sd) - log_mass2
        x = lphi1 - lphi2
        log_w1, log_w2 = log_expit(-x), log_expit(x)
    empty = q <= 0
    log_w1 = np.where(empty, -np.inf, log_w1)
    log_w2 = np.where(empty, 0.0, log_w2)
    if no_overage:
        # no upper branch at all; at q == 0 the continuous part carries no mass
        log_w1 = np.where(empty, -np.inf, 0.0)
        log_w2 = np.full_like(log_w1, -np.inf)
    return log_w1, log_w2


def prior_spliced(prior: PriorParams, q, d, price: float) -> Spliced:
    """Continuous part of the reference distribution at states ``(q, d)``."""
    q, d = np.broadcast_arrays(np.asarray(q, float), np.asarray(d, float))
    if np.any(q < 0):
        raise ValueError("remaining allowance q must be non-negative")
    no_overage = is_infinite_price(price)
    sd = 1.0 / math.sqrt(prior.beta0)
    mean1 = (prior.mu0 + prior.gamma0 * d) / prior.beta0
    mean2 = (
        np.full_like(mean1, np.nan)
        if no_overage
        else (prior.mu0 + prior.gamma0 * d - prior.eta0 * price) / prior.beta0
    )
    log_mass1 = _log_mass(mean1, sd, 0.0, q)
    log_mass2 = _log_mass(mean2, sd, q, np.inf)
    log_w1, log_w2 = _splice_log_weights(q, mean1, mean2, sd, log_mass1, log_mass2, no_overage)
    return Spliced(q, mean1, mean2, sd, log_mass1, log_mass2, log_w1, log_w2)


def prior_splice_weight(prior: PriorParams, q, d, price: float):
    """Weight ``omega_0`` of the upper branch of the reference density.

    Determined by continuity of the density at ``a = q``; equals 1 for
    ``q == 0`` (empty lower branch) and 0 for a no-overage plan with
    ``q > 0``.
    """
    sp = prior_spliced(prior, q, d, price)
    w = np.where(sp.q <= 0, 1.0, np.exp(sp.log_w2))
    return float(w) if w.ndim == 0 else w


def prior_splice_weight_linear(prior: PriorParams, q: float, d: float, price: float) -> float:
    """Same weight solved directly from the continuity condition in linear space.

    Only usable where the densities at ``q`` do not underflow.
    """
    sd = 1.0 / math.sqrt(prior.beta0)
    t1 = TruncNormal((prior.mu0 + prior.gamma0 * d) / prior.beta0, sd * sd, 0.0, q)
    t2 = TruncNormal((prior.mu0 + prior.gamma0 * d - prior.eta0 * price) / prior.beta0, sd * sd, q)
    phi1 = math.exp(truncnorm_logpdf(t1, q))
    phi2 = math.exp(truncnorm_logpdf(t2, q))
    return phi1 / (phi1 + phi2)


def prior_cont_logpdf(prior: PriorParams, a, q, d, price: float):
    """Log-density of the spliced continuous component at ``a > 0``."""
    return _spliced_logpdf(prior_spliced(prior, q, d, price), a)


def prior_logpdf(prior: PriorParams, step: ConsumptionStep, price: float) -> float:
    """Log of the reference probability of ``step.a``.

    At ``a == 0`` this is the log of the atom mass; for ``a > 0`` it is the
    log-density of the continuous part scaled by ``1 - nu0_bar``.
    """
    if step.a < 0:
        raise ValueError("consumption must be non-negative")
    with np.errstate(divide="ignore"):
        if step.a == 0:
            return float(np.log(prior.nu0_bar))
        cont = prior_cont_logpdf(prior, step.a, step.q, step.d, price)
        return float(np.log1p(-prior.nu0_bar) + cont)
