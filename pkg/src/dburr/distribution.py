"""Discrete Burr distribution DBD(alpha, theta) and the continuous Burr-XII
law it is discretized from.

The discrete variable is the integer part of a Burr-XII variable with
survival ``(1 + x**alpha) ** -beta``.  Writing ``theta = exp(-beta)`` the
discrete survival function is ``S(x) = theta ** log(1 + x**alpha)`` and the
mass function is ``p(x) = S(x) - S(x + 1)`` for ``x = 0, 1, 2, ...``.

Logarithms are natural throughout.  All functions accept scalars or array
likes for ``x`` and return a float for scalar input.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import ConvergenceError, DomainError, MomentDoesNotExistError

__all__ = [
    "BurrParams",
    "DBurrParams",
    "theta_from_beta",
    "beta_from_theta",
    "log1mexp",
    "log1p_pow",
    "log_survival_step",
    "dburr_survival",
    "dburr_log_survival",
    "dburr_pmf",
    "dburr_log_pmf",
    "dburr_cdf",
    "second_rate_of_failure",
    "survival_cutoff",
    "burr_pdf",
    "burr_survival",
    "burr_cdf",
    "burr_hazard",
    "burr_moment",
    "dburr_moment",
]

MAX_MOMENT_TERMS = 10**8
_CHUNK = 1 << 20


@dataclass(frozen=True)
class BurrParams:
    """Shape parameters of the continuous Burr-XII distribution."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise DomainError(f"alpha must be a positive finite number, got {self.alpha!r}")
        if not (self.beta > 0 and math.isfinite(self.beta)):
            raise DomainError(f"beta must be a positive finite number, got {self.beta!r}")

    def to_discrete(self) -> "DBurrParams":
        return DBurrParams(self.alpha, theta_from_beta(self.beta))


@dataclass(frozen=True)
class DBurrParams:
    """Parameters of DBD(alpha, theta): ``alpha > 0`` and ``0 < theta < 1``."""

    alpha: float
    theta: float

    def __post_init__(self):
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise DomainError(f"alpha must be a positive finite number, got {self.alpha!r}")
        if not (0.0 < self.theta < 1.0):
            raise DomainError(f"theta must lie in (0, 1), got {self.theta!r}")

    @property
    def beta(self) -> float:
        return beta_from_theta(self.theta)

    @property
    def log_theta(self) -> float:
        return math.log(self.theta)

    def to_continuous(self) -> BurrParams:
        return BurrParams(self.alpha, self.beta)


def theta_from_beta(beta: float) -> float:
    """Map the Burr-XII shape ``beta`` to ``theta = exp(-beta)``."""
    if not beta > 0:
        raise DomainError(f"beta must be positive, got {beta!r}")
    return math.exp(-beta)


def beta_from_theta(theta: float) -> float:
    """Inverse of :func:`theta_from_beta`."""
    if not (0.0 < theta < 1.0):
        raise DomainError(f"theta must lie in (0, 1), got {theta!r}")
    return -math.log(theta)


def _scalar_or_array(out, x):
    return float(out) if np.ndim(x) == 0 else out


def _as_count(x):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(np.isnan(x)) or np.any(x != np.floor(x)):
        raise DomainError("x must be a non-negative integer")
    return x


def _as_positive(x):
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise DomainError("x must be strictly positive")
    return x


def log1mexp(z):
    """``log(1 - exp(z))`` for ``z < 0`` without cancellation."""
    z = np.asarray(z, dtype=float)
    with np.errstate(divide="ignore"):
        out = np.where(z > -math.log(2.0), np.log(-np.expm1(z)), np.log1p(-np.exp(z)))
    return _scalar_or_array(out, z)


def log1p_pow(x, alpha: float):
    """``log(1 + x**alpha)`` for ``x >= 0``; finite even when ``x**alpha`` overflows."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        t = alpha * np.log(x)
    out = np.logaddexp(0.0, t)
    return _scalar_or_array(out, x)


def log_survival_step(x, alpha: float):
    """``log(1 + (x+1)**alpha) - log(1 + x**alpha)``, always positive.

    Evaluated without subtracting two nearly equal logarithms when ``x`` is
    large.
    """
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        g = alpha * np.log1p(1.0 / x)  # log(((x+1)/x)**alpha); inf at x=0
        small = g < 1.0
        # cancellation-free branch: log1p(x^a/(1+x^a) * ((1+1/x)^a - 1))
        frac = 1.0 / (1.0 + np.exp(-alpha * np.log(x)))
        near = np.log1p(frac * np.expm1(np.where(small, g, 0.0)))
        far = log1p_pow(x + 1.0, alpha) - log1p_pow(x, alpha)
        out = np.where(small, near, far)
    return _scalar_or_array(out, x)


def dburr_log_survival(x, p: DBurrParams):
    """``log S(x) = log(1 + x**alpha) * log(theta)``."""
    x = _as_count(x)
    out = log1p_pow(x, p.alpha) * p.log_theta
    return _scalar_or_array(out, x)


def dburr_survival(x, p: DBurrParams):
    """``P(X >= x) = theta ** log(1 + x**alpha)``; equals 1 at ``x = 0``."""
    out = np.exp(dburr_log_survival(x, p))
    return _scalar_or_array(out, x)


def dburr_cdf(x, p: DBurrParams):
    """``P(X <= x) = 1 - S(x + 1)``."""
    x = _as_count(x)
    out = -np.expm1(dburr_log_survival(x + 1.0, p))
    return _scalar_or_array(out, x)


def dburr_log_pmf(x, p: DBurrParams):
    """Log mass ``w1*log(theta) + log(1 - theta**w)`` with ``w = w2 - w1``."""
    x = _as_count(x)
    lt = p.log_theta
    w1 = log1p_pow(x, p.alpha)
    w = log_survival_step(x, p.alpha)
    out = w1 * lt + log1mexp(w * lt)
    return _scalar_or_array(out, x)


def dburr_pmf(x, p: DBurrParams):
    """Probability mass ``S(x) - S(x + 1)``.

    Computed as ``S(x) * (1 - theta**w)`` so that it keeps full relative
    precision when ``S(x)`` and ``S(x + 1)`` nearly coincide.
    """
    x = _as_count(x)
    lt = p.log_theta
    w1 = log1p_pow(x, p.alpha)
    w = log_survival_step(x, p.alpha)
    out = np.exp(w1 * lt) * -np.expm1(w * lt)
    return _scalar_or_array(out, x)


def second_rate_of_failure(x, p: DBurrParams):
    """``log[S(x) / S(x + 1)] = beta * (log(1 + (1+x)**alpha) - log(1 + x**alpha))``."""
    x = _as_count(x)
    out = p.beta * log_survival_step(x, p.alpha)
    return _scalar_or_array(out, x)


def survival_cutoff(eps: float, p: DBurrParams) -> int:
    """Smallest integer ``X`` with ``S(X + 1) < eps``, found by inverting S.

    The result may exceed the float range of exact integers for heavy
    tails; it is returned as a Python int.
    """
    if not 0.0 < eps < 1.0:
        raise DomainError(f"eps must lie in (0, 1), got {eps!r}")
    c = math.log(eps) / p.log_theta  # need log(1 + y**alpha) > c with y = X + 1
    # y* = (exp(c) - 1) ** (1/alpha), in logs to avoid overflow
    log_y = (c + math.log(-math.expm1(-c))) / p.alpha
    if log_y > 709.0:
        raise DomainError("survival cutoff exceeds the floating point range")
    x = max(0, math.floor(math.exp(log_y)))
    if x > 2**52:
        # integers are no longer exactly representable; S is flat at this scale
        return x
    while dburr_survival(float(x + 1), p) >= eps:
        x += 1
    while x > 0 and dburr_survival(float(x), p) < eps:
        x -= 1
    return x


def burr_survival(x, p: BurrParams):
    """Burr-XII survival ``(1 + x**alpha) ** -beta`` for ``x >= 0``."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("x must be non-negative")
    out = np.exp(-p.beta * log1p_pow(x, p.alpha))
    return _scalar_or_array(out, x)


def burr_cdf(x, p: BurrParams):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("x must be non-negative")
    out = -np.expm1(-p.beta * log1p_pow(x, p.alpha))
    return _scalar_or_array(out, x)


def burr_pdf(x, p: BurrParams):
    """Density ``alpha*beta*x**(alpha-1) / (1 + x**alpha) ** (beta + 1)``."""
    x = _as_positive(x)
    log_f = (
        math.log(p.alpha * p.beta)
        + (p.alpha - 1.0) * np.log(x)
        - (p.beta + 1.0) * log1p_pow(x, p.alpha)
    )
    return _scalar_or_array(np.exp(log_f), x)


def burr_hazard(x, p: BurrParams):
    """Failure rate ``alpha*beta*x**(alpha-1) / (1 + x**alpha)``."""
    x = _as_positive(x)
    log_r = math.log(p.alpha * p.beta) + (p.alpha - 1.0) * np.log(x) - log1p_pow(x, p.alpha)
    return _scalar_or_array(np.exp(log_r), x)


def burr_moment(r: int, p: BurrParams) -> float:
    """``E[X**r] = beta * B(r/alpha + 1, beta - r/alpha)``, finite iff ``alpha*beta > r``."""
    if r < 1 or int(r) != r:
        raise DomainError(f"r must be a positive integer, got {r!r}")
    if not p.alpha * p.beta > r:
        raise MomentDoesNotExistError(
            f"moment of order {r} does not exist: alpha*beta = {p.alpha * p.beta:g} <= {r}"
        )
    a = r / p.alpha + 1.0
    b = p.beta - r / p.alpha
    log_beta_fn = gammaln(a) + gammaln(b) - gammaln(a + b)
    return float(p.beta * math.exp(log_beta_fn))


def _moment_tail_bound(X: int, r: int, p: DBurrParams) -> float:
    # sum_{x>X} x^r p(x) = (X+1)^r S(X+1) + sum_{x>=X+2} (x^r - (x-1)^r) S(x)
    #                   <= (X+1)^r S(X+1) + r (X+1)^(r - ab) / (ab - r)
    ab = p.alpha * p.beta
    y = float(X + 1)
    head = math.exp(r * math.log(y) + float(dburr_log_survival(y, p)))
    return head + r * y ** (r - ab) / (ab - r)


def _partial_moment(r: int, p: DBurrParams, X: int) -> float:
    parts = []
    for start in range(1, X + 1, _CHUNK):
        xs = np.arange(start, min(start + _CHUNK, X + 1), dtype=float)
        parts.append(float(np.sum(xs**r * dburr_pmf(xs, p))))
    return math.fsum(parts)


def dburr_moment(r: int, p: DBurrParams, tol: float = 1e-10,
                 max_terms: int = MAX_MOMENT_TERMS) -> float:
    """Raw moment ``E[X**r]`` of DBD by series summation.

    The series is truncated at the first ``X`` whose rigorous tail bound is
    below ``tol``; the bound uses ``S(x) <= x**(-alpha*beta)``.
    """
    if r < 0 or int(r) != r:
        raise DomainError(f"r must be a non-negative integer, got {r!r}")
    if not tol > 0:
        raise DomainError("tol must be positive")
    if r == 0:
        return 1.0
    if not p.alpha * p.beta > r:
        raise MomentDoesNotExistError(
            f"moment of order {r} does not exist: alpha*(-log theta) = "
            f"{p.alpha * p.beta:g} <= {r}"
        )
    X = 16
    while _moment_tail_bound(X, r, p) >= tol:
        if X >= max_terms:
            raise ConvergenceError(
                f"tail bound not below {tol:g} within {max_terms} terms",
                best=_partial_moment(r, p, max_terms),
            )
        X = min(2 * X, max_terms)
    return _partial_moment(r, p, X)
