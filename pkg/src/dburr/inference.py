"""Likelihood, priors and unnormalized log-posteriors for DBD samples, plus
maximum likelihood search.

Three scenarios are covered:

* alpha known, theta unknown: prior ``theta ** (a - 1)`` (Beta(a, 1));
* theta known, alpha unknown: prior ``1 / alpha``;
* both unknown: prior ``theta ** (a - 1) / alpha``.

The log-posteriors drop every factor that does not depend on the
parameters and return ``-inf`` outside the open parameter domain so they can
be used directly as Metropolis-Hastings targets.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize
from scipy.special import expit, logit

from .distribution import log1mexp, log1p_pow, log_survival_step
from .errors import ConvergenceError, DegenerateDataError, DomainError
from .sampling import Sample

__all__ = [
    "ALPHA_BOUNDS",
    "THETA_BOUNDS",
    "SuffStats",
    "PriorSpec",
    "MLEResult",
    "AlphaPropriety",
    "suff_stats",
    "log_likelihood",
    "log_posterior_theta",
    "log_posterior_theta_stats",
    "log_posterior_alpha",
    "log_posterior_joint",
    "mle",
    "alpha_propriety",
]

log = logging.getLogger(__name__)

ALPHA_BOUNDS = (1e-3, 1e3)
THETA_BOUNDS = (1e-8, 1.0 - 1e-8)
MLE_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class SuffStats:
    """Per-observation transforms at a fixed alpha.

    ``w1[i] = log(1 + x_i**alpha)``, ``w2[i] = log(1 + (1 + x_i)**alpha)`` and
    ``w[i] = w2[i] - w1[i]`` (computed without cancellation).
    """

    w1: np.ndarray
    w2: np.ndarray
    w: np.ndarray
    alpha_at: float

    @property
    def n(self) -> int:
        return int(self.w1.size)

    @classmethod
    def from_arrays(cls, w1, w, alpha_at=float("nan")):
        """Build stats directly from ``w1`` and ``w`` (used by oracles and tests)."""
        w1 = np.asarray(w1, dtype=float).reshape(-1)
        w = np.asarray(w, dtype=float).reshape(-1)
        if w1.shape != w.shape:
            raise DomainError("w1 and w must have the same length")
        if np.any(w1 < 0) or np.any(w <= 0):
            raise DomainError("need w1 >= 0 and w > 0")
        return cls(w1, w1 + w, w, alpha_at)


@dataclass(frozen=True)
class PriorSpec:
    """Beta(a, 1) prior on theta; ``a = 1`` is the uniform prior."""

    a: float = 1.0

    def __post_init__(self):
        if not (self.a > 0 and math.isfinite(self.a)):
            raise DomainError(f"prior hyperparameter a must be positive, got {self.a!r}")


@dataclass(frozen=True)
class MLEResult:
    alpha: float
    theta: float
    loglik: float
    mode: str
    at_boundary: bool = False
    iterations: int = 0
    plateau: bool = False


@dataclass(frozen=True)
class AlphaPropriety:
    """Numerical check that the alpha posterior mass decays inside the support.

    ``log_mass`` is the log of the unnormalized posterior mass over the
    support bracket, ``edge_ratio`` the density at the
    bracket edges relative to its peak on the log-alpha scale.
    """

    log_mass: float
    edge_ratio: float
    proper: bool


def suff_stats(s: Sample, alpha: float) -> SuffStats:
    if not alpha > 0:
        raise DomainError(f"alpha must be positive, got {alpha!r}")
    x = s.values
    w1 = np.asarray(log1p_pow(x, alpha), dtype=float)
    w = np.asarray(log_survival_step(x, alpha), dtype=float)
    return SuffStats(w1, w1 + w, w, float(alpha))


def _in_domain(alpha, theta) -> bool:
    return alpha > 0 and 0.0 < theta < 1.0 and math.isfinite(alpha)


def _loglik(s: Sample, alpha: float, theta: float) -> float:
    lt = math.log(theta)
    w1 = log1p_pow(s.support, alpha)
    w = log_survival_step(s.support, alpha)
    return float(np.dot(s.counts, w1 * lt + log1mexp(w * lt)))


def log_likelihood(s: Sample, alpha: float, theta: float) -> float:
    """Sum of log masses of the sample under DBD(alpha, theta)."""
    if not _in_domain(alpha, theta):
        raise DomainError(f"parameters outside domain: alpha={alpha!r}, theta={theta!r}")
    return _loglik(s, alpha, theta)


def log_posterior_theta_stats(stats: SuffStats, theta: float, prior: PriorSpec) -> float:
    """``(a + sum(w1) - 1) * log(theta) + sum(log(1 - theta**w))``."""
    if not 0.0 < theta < 1.0:
        return -math.inf
    lt = math.log(theta)
    return float((prior.a + stats.w1.sum() - 1.0) * lt + np.sum(log1mexp(stats.w * lt)))


def log_posterior_theta(s: Sample, alpha: float, theta: float, prior: PriorSpec) -> float:
    """Unnormalized log-posterior of theta with alpha held fixed."""
    if not _in_domain(alpha, theta):
        return -math.inf
    return (prior.a - 1.0) * math.log(theta) + _loglik(s, alpha, theta)


def log_posterior_alpha(s: Sample, alpha: float, theta: float) -> float:
    """Unnormalized log-posterior of alpha with theta held fixed (prior 1/alpha)."""
    if not _in_domain(alpha, theta):
        return -math.inf
    return -math.log(alpha) + _loglik(s, alpha, theta)


def log_posterior_joint(s: Sample, alpha: float, theta: float, prior: PriorSpec) -> float:
    """Unnormalized joint log-posterior under the prior ``theta**(a-1) / alpha``."""
    if not _in_domain(alpha, theta):
        return -math.inf
    return -math.log(alpha) + (prior.a - 1.0) * math.log(theta) + _loglik(s, alpha, theta)


def alpha_propriety(s: Sample, theta: float, bounds=ALPHA_BOUNDS,
                    edge_tol: float = 1e-6) -> AlphaPropriety:
    """Integrate the alpha posterior over ``bounds`` on the log-alpha scale.

    Under the prior 1/alpha the density in ``u = log(alpha)`` is the
    likelihood itself.  When it has not decayed at the bracket edges the
    posterior is not numerically proper on the bracket's scale and the
    support truncation drives the result.
    """
    lo, hi = math.log(bounds[0]), math.log(bounds[1])
    grid = np.linspace(lo, hi, 241)
    vals = np.array([_loglik(s, math.exp(u), theta) for u in grid])
    peak = float(vals.max())
    u_peak = float(grid[int(vals.argmax())])

    def f(u):
        return math.exp(_loglik(s, math.exp(u), theta) - peak)

    pts = [p for p in (u_peak,) if lo < p < hi]
    mass, _ = integrate.quad(f, lo, hi, points=pts or None, limit=200, epsabs=0.0, epsrel=1e-8)
    edge = max(math.exp(vals[0] - peak), math.exp(vals[-1] - peak))
    return AlphaPropriety(math.log(mass) + peak, edge, edge < edge_tol)


def _plateau_start(f, grid, j, level):
    """Smallest point in ``(grid[j-1], grid[j]]`` where ``f`` reaches ``level``."""
    lo, hi = grid[j - 1], grid[j]
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) >= level:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-9 * max(1.0, abs(hi)):
            break
    return hi


def _golden_1d(f, grid, lo, hi):
    """Maximize ``f`` over ``[lo, hi]`` from a grid warm start.

    Returns ``(x, f(x), at_boundary, plateau, iterations)``.  When ``f`` is
    constant to working precision on an interval reaching the upper end of
    the bracket, the left end of that interval is returned with
    ``plateau=True``: the smallest numerical maximizer.
    """
    vals = np.array([f(g) for g in grid])
    i = int(np.argmax(vals))
    tol = 1e-12 * max(1.0, abs(vals[i]))
    flat = np.flatnonzero(vals >= vals[i] - tol)
    last = len(grid) - 1
    if flat[-1] == last and flat[0] > 0 and np.all(np.diff(flat) == 1) and len(flat) > 1:
        x = _plateau_start(f, grid, int(flat[0]), vals[i] - tol)
        return float(x), float(f(x)), False, True, 0
    if flat[-1] == last and (flat[0] > 0 or vals[-1] >= vals[0]):
        i = last
    elif flat[0] == 0:
        i = 0
    if i == 0 or i == last:
        # the maximum may sit in the outermost cell; search it before clamping
        a, b = (grid[0], grid[1]) if i == 0 else (grid[-2], grid[-1])
        res = optimize.minimize_scalar(lambda t: -f(t), bounds=(a, b), method="bounded",
                                       options={"xatol": 1e-12, "maxiter": 500})
        edge = grid[i]
        if res.success and -res.fun > vals[i] and abs(res.x - edge) > MLE_TOL:
            return float(res.x), float(-res.fun), False, False, int(res.nit)
        return float(edge), float(vals[i]), True, False, int(res.nit)
    if len(flat) > 1 or not (vals[i - 1] < vals[i] > vals[i + 1]):
        a, b = grid[max(flat[0] - 1, 0)], grid[min(flat[-1] + 1, last)]
        res = optimize.minimize_scalar(lambda t: -f(t), bounds=(a, b), method="bounded",
                                       options={"xatol": 1e-12, "maxiter": 500})
    else:
        res = optimize.minimize_scalar(
            lambda t: -f(t), bracket=(grid[i - 1], grid[i], grid[i + 1]), method="golden",
            options={"xtol": 1e-11, "maxiter": 5000},
        )
    if not res.success:
        raise ConvergenceError("1-D likelihood search did not converge",
                               best=(float(res.x), -float(res.fun)))
    return float(res.x), float(-res.fun), False, False, int(res.nit)


def _joint_start(s: Sample):
    us = np.linspace(math.log(ALPHA_BOUNDS[0]), math.log(ALPHA_BOUNDS[1]), 41)
    vs = np.linspace(logit(THETA_BOUNDS[0]), logit(THETA_BOUNDS[1]), 41)
    best = (-math.inf, 0.0, 0.0)
    for u in us:
        alpha = math.exp(u)
        for v in vs:
            ll = _loglik(s, alpha, float(expit(v)))
            if ll > best[0]:
                best = (ll, u, v)
    return np.array(best[1:])


def _mle_joint(s: Sample) -> MLEResult:
    if np.all(s.values == 0):
        raise DegenerateDataError(
            "all observations are 0: the likelihood depends on theta only and alpha is unidentified"
        )
    lo = np.array([math.log(ALPHA_BOUNDS[0]), logit(THETA_BOUNDS[0])])
    hi = np.array([math.log(ALPHA_BOUNDS[1]), logit(THETA_BOUNDS[1])])

    def nll(z):
        return -_loglik(s, math.exp(z[0]), float(expit(z[1])))

    z = _joint_start(s)
    f_prev = nll(z)
    nit = 0
    for _ in range(10):
        simplex = np.array([z, z + [0.1, 0.0], z + [0.0, 0.1]])
        simplex = np.clip(simplex, lo, hi)
        if np.linalg.matrix_rank(simplex[1:] - simplex[0]) < 2:
            simplex = np.array([z, z - [0.1, 0.0], z - [0.0, 0.1]])
        res = optimize.minimize(
            nll, z, method="Nelder-Mead", bounds=list(zip(lo, hi)),
            # fatol scaled to the objective: an absolute 1e-13 sits below its rounding noise
            options={"xatol": 1e-10, "fatol": 1e-13 * max(1.0, abs(f_prev)), "maxiter": 20000,
                     "initial_simplex": simplex},
        )
        nit += int(res.nit)
        if not res.success:
            best = (math.exp(res.x[0]), float(expit(res.x[1])))
            raise ConvergenceError(f"Nelder-Mead failed: {res.message}", best=best)
        improved = f_prev - res.fun
        z, f_prev = res.x, float(res.fun)
        if improved < 1e-12:
            break
    at_edge = bool(np.any(np.isclose(z, lo, atol=1e-6) | np.isclose(z, hi, atol=1e-6)))
    return MLEResult(math.exp(z[0]), float(expit(z[1])), -f_prev, "joint", at_edge, nit)


def mle(s: Sample, mode: str = "joint", alpha: float | None = None,
        theta: float | None = None) -> MLEResult:
    """Maximum likelihood estimate in one of three modes.

    ``"theta_only"`` needs ``alpha``; ``"alpha_only"`` needs ``theta``.
    One-dimensional modes use a grid warm start followed by golden-section
    search; the joint mode runs restarted Nelder-Mead on
    ``(log alpha, logit theta)``.  Maxima on the edge of the search box are
    returned clamped with ``at_boundary=True``.  A one-dimensional
    likelihood that is flat to working precision up to the upper edge
    yields the start of the flat stretch with ``plateau=True``.
    """
    if mode == "theta_only":
        if alpha is None or not alpha > 0:
            raise DomainError("theta_only mode needs a positive alpha")
        grid = expit(np.linspace(logit(THETA_BOUNDS[0]), logit(THETA_BOUNDS[1]), 161))
        t, ll, edge, flat, nit = _golden_1d(lambda t: _loglik(s, alpha, t), grid, *THETA_BOUNDS)
        return MLEResult(float(alpha), t, ll, mode, edge, nit, flat)
    if mode == "alpha_only":
        if theta is None or not 0.0 < theta < 1.0:
            raise DomainError("alpha_only mode needs theta in (0, 1)")
        grid = np.geomspace(*ALPHA_BOUNDS, 161)
        a, ll, edge, flat, nit = _golden_1d(lambda a: _loglik(s, a, theta), grid, *ALPHA_BOUNDS)
        return MLEResult(a, float(theta), ll, mode, edge, nit, flat)
    if mode == "joint":
        return _mle_joint(s)
    raise DomainError(f"unknown MLE mode {mode!r}")
