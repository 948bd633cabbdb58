"""Product-form normalizer and Bayes estimate of theta (alpha known), with
exact oracles for the same quantities.

With alpha fixed the posterior of theta is proportional to
``theta**(A-1) * prod(1 - theta**w_i)`` on (0, 1), ``A = a + sum(w1)``.
The product-form expressions below equal the exact integrals for a single
observation and are an approximation otherwise; the exact routes
(inclusion-exclusion and adaptive quadrature) quantify the gap.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import mpmath
import numpy as np
from scipy import integrate, optimize

from .distribution import log1mexp
from .errors import DomainError, InternalConsistencyError
from .inference import PriorSpec, SuffStats

__all__ = [
    "ClosedFormTerms",
    "ThetaEstimate",
    "MAX_EXPANSION_TERMS",
    "closed_form_terms",
    "product_normalizer",
    "log_product_normalizer",
    "theta_bayes_product",
    "expansion_integral",
    "quadrature_integral",
    "exact_normalizer",
    "log_exact_normalizer",
    "exact_posterior_mean",
    "exact_posterior_cdf",
    "exact_posterior_median",
    "exact_posterior_density",
]

MAX_EXPANSION_TERMS = 2**20
ROUTE_RTOL = 1e-8


@dataclass(frozen=True, eq=False)
class ClosedFormTerms:
    lambda_: np.ndarray
    rho: np.ndarray
    delta: np.ndarray
    tau: np.ndarray
    A: float


@dataclass(frozen=True)
class ThetaEstimate:
    """Point estimate that may need clamping into (0, 1).

    ``raw`` is the formula value, ``value`` the reported estimate.
    """

    value: float
    raw: float
    clamped: bool


def closed_form_terms(stats: SuffStats, prior: PriorSpec) -> ClosedFormTerms:
    n = stats.n
    if n < 1:
        raise DomainError("the product-form terms need at least one observation")
    a = prior.a
    return ClosedFormTerms(
        lambda_=stats.w1 + a / n + 1.0,
        rho=stats.w2 + a / n + 1.0,
        delta=stats.w1 + (a - 1.0) / n + 1.0,
        tau=stats.w2 + (a - 1.0) / n + 1.0,
        A=float(a + stats.w1.sum()),
    )


def log_product_normalizer(stats: SuffStats, prior: PriorSpec) -> float:
    t = closed_form_terms(stats, prior)
    return float(np.sum(np.log(stats.w) - np.log(t.delta) - np.log(t.tau)))


def product_normalizer(stats: SuffStats, prior: PriorSpec) -> float:
    """``prod(w_i / (delta_i * tau_i))``, the product-form posterior normalizer."""
    return math.exp(log_product_normalizer(stats, prior))


def theta_bayes_product(stats: SuffStats, prior: PriorSpec) -> ThetaEstimate:
    """Product-form posterior mean ``prod(w/(lambda*rho)) / prod(w/(delta*tau))``."""
    t = closed_form_terms(stats, prior)
    log_num = np.sum(np.log(stats.w) - np.log(t.lambda_) - np.log(t.rho))
    log_den = np.sum(np.log(stats.w) - np.log(t.delta) - np.log(t.tau))
    raw = math.exp(float(log_num - log_den))
    if 0.0 < raw < 1.0:
        return ThetaEstimate(raw, raw, False)
    clamped = min(max(raw, np.nextafter(0.0, 1.0)), np.nextafter(1.0, 0.0))
    return ThetaEstimate(float(clamped), raw, True)


def _expansion_groups(w: np.ndarray):
    vals, counts = np.unique(w, return_counts=True)
    size = math.prod(int(c) + 1 for c in counts)
    return vals, counts, size


def expansion_integral(A: float, w, dps: int = 50) -> mpmath.mpf:
    """``integral_0^1 theta**(A-1) prod(1 - theta**w_i) dtheta`` by inclusion-exclusion.

    Equal ``w_i`` are grouped so the signed sum runs over multiplicities
    (binomial coefficients) instead of all ``2**n`` subsets.  The terms cancel
    heavily, so the sum is carried in multiprecision and repeated with more
    digits whenever the observed cancellation eats into the working precision.
    """
    w = np.asarray(w, dtype=float).reshape(-1)
    vals, counts, size = _expansion_groups(w)
    if size > MAX_EXPANSION_TERMS:
        raise DomainError(f"expansion needs {size} terms (cap {MAX_EXPANSION_TERMS})")
    counts = [int(c) for c in counts]
    while True:
        with mpmath.workdps(dps):
            mvals = [mpmath.mpf(float(v)) for v in vals]
            A_ = mpmath.mpf(A)
            total = mpmath.mpf(0)
            magnitude = mpmath.mpf(0)
            for ks in itertools.product(*(range(c + 1) for c in counts)):
                coef = 1
                expo = A_
                for k, c, v in zip(ks, counts, mvals):
                    if k:
                        coef *= math.comb(c, k)
                        expo += k * v
                term = mpmath.mpf(coef) / expo
                magnitude += term
                total += -term if sum(ks) % 2 else term
            lost = float(mpmath.log10(magnitude / abs(total))) if total != 0 else float(dps)
            if lost < dps - 20:
                return +total
        dps = int(lost) + 40


def _log_integrand_t(t, A, w):
    # theta = exp(-t): integrand exp(-A t) * prod(1 - exp(-t w)), dtheta = theta dt absorbed
    return -A * t + float(np.sum(log1mexp(-t * w)))


def quadrature_integral(A: float, w, lower_theta: float = 0.0):
    """Same integral as :func:`expansion_integral` (optionally over ``(lower_theta, 1)``)
    by adaptive quadrature after substituting ``theta = exp(-t)``.

    Returns ``(log_value, scaled_value, log_peak)``; the integrand is scaled
    by its peak so that underflow never occurs.
    """
    w = np.asarray(w, dtype=float).reshape(-1)
    if w.size == 0:
        log_val = math.log1p(-lower_theta**A) - math.log(A)
        return log_val, math.exp(log_val), 0.0
    # mode of -A t + sum log(1 - e^{-t w}) is unique (concave in t)
    res = optimize.minimize_scalar(lambda u: -_log_integrand_t(math.exp(u), A, w),
                                   bounds=(-40.0, 40.0), method="bounded",
                                   options={"xatol": 1e-10})
    t_mode = math.exp(res.x)
    peak = _log_integrand_t(t_mode, A, w)

    def g(t):
        if t <= 0.0:
            return 0.0
        return math.exp(_log_integrand_t(t, A, w) - peak)

    t_hi = math.inf if lower_theta <= 0.0 else -math.log(lower_theta)
    kw = dict(epsabs=0.0, epsrel=1e-13, limit=500)
    if t_hi <= t_mode:
        val, _ = integrate.quad(g, 0.0, t_hi, **kw)
    else:
        left, _ = integrate.quad(g, 0.0, t_mode, **kw)
        right, _ = integrate.quad(g, t_mode, t_hi, **kw)
        val = left + right
    if val <= 0.0:
        return -math.inf, 0.0, peak
    return math.log(val) + peak, val, peak


def log_exact_normalizer(stats: SuffStats, prior: PriorSpec, shift: float = 0.0,
                         check: bool = True) -> float:
    """Log of ``integral_0^1 theta**(A+shift-1) prod(1 - theta**w_i) dtheta``.

    Both routes run when the expansion is affordable and must agree to
    ``ROUTE_RTOL``; otherwise quadrature alone is used.
    """
    A = prior.a + float(stats.w1.sum()) + shift
    log_q, _, _ = quadrature_integral(A, stats.w)
    if not check:
        return log_q
    _, _, size = _expansion_groups(stats.w)
    if size > MAX_EXPANSION_TERMS:
        return log_q
    e = expansion_integral(A, stats.w)
    if not e > 0:
        raise InternalConsistencyError(f"inclusion-exclusion returned non-positive value {e}")
    log_e = float(mpmath.log(e))
    if abs(math.expm1(log_q - log_e)) > ROUTE_RTOL:
        raise InternalConsistencyError(
            f"normalizer routes disagree: expansion={log_e!r} quadrature={log_q!r} (log scale)"
        )
    return log_e


def exact_normalizer(stats: SuffStats, prior: PriorSpec) -> float:
    """Exact posterior normalizer, comparable with :func:`product_normalizer`."""
    return math.exp(log_exact_normalizer(stats, prior))


def exact_posterior_mean(stats: SuffStats, prior: PriorSpec) -> float:
    """``E[theta | x]`` as the ratio of normalizers at ``A + 1`` and ``A``."""
    if stats.n == 0:
        return prior.a / (prior.a + 1.0)
    A = prior.a + float(stats.w1.sum())
    _, _, size = _expansion_groups(stats.w)
    if size <= MAX_EXPANSION_TERMS:
        # high-precision ratio; quadrature cross-check runs inside the normalizer calls
        log_exact_normalizer(stats, prior)
        log_exact_normalizer(stats, prior, shift=1.0)
        num = expansion_integral(A + 1.0, stats.w)
        den = expansion_integral(A, stats.w)
        return float(num / den)
    return math.exp(log_exact_normalizer(stats, prior, 1.0) - log_exact_normalizer(stats, prior))


def exact_posterior_density(theta, stats: SuffStats, prior: PriorSpec):
    """Normalized posterior density of theta."""
    theta = np.asarray(theta, dtype=float)
    log_z = log_exact_normalizer(stats, prior, check=False)
    A = prior.a + float(stats.w1.sum())
    lt = np.log(theta)
    logf = (A - 1.0) * lt
    for wi in stats.w:
        logf = logf + log1mexp(wi * lt)
    out = np.exp(logf - log_z)
    return float(out) if out.ndim == 0 else out


def exact_posterior_cdf(theta: float, stats: SuffStats, prior: PriorSpec) -> float:
    """``P(Theta <= theta | x)`` by quadrature."""
    if theta <= 0.0:
        return 0.0
    if theta >= 1.0:
        return 1.0
    A = prior.a + float(stats.w1.sum())
    if stats.n == 0:
        return theta**A
    log_total, _, _ = quadrature_integral(A, stats.w)
    log_upper, _, _ = quadrature_integral(A, stats.w, lower_theta=theta)
    # mass on (theta, 1) over total mass
    return float(-math.expm1(log_upper - log_total))


def exact_posterior_median(stats: SuffStats, prior: PriorSpec, xtol: float = 1e-10) -> float:
    """Root of ``CDF(theta) = 1/2`` by bisection."""
    if stats.n == 0:
        return 0.5 ** (1.0 / prior.a)
    return float(optimize.bisect(lambda t: exact_posterior_cdf(t, stats, prior) - 0.5,
                                 1e-300, 1.0 - 1e-16, xtol=xtol, maxiter=500))
