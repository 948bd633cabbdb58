"""Metropolis-Hastings engine, proposal kernels and posterior summaries.

States are updated one coordinate at a time.  Each coordinate has its own
proposal kernel; the acceptance probability is
``min(1, exp(dlog_target + dlog_proposal))`` where the second term is the
Hastings correction (zero for symmetric kernels).
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import DegenerateDataError, DomainError, ConvergenceError
from .inference import (
    ALPHA_BOUNDS,
    PriorSpec,
    alpha_propriety,
    log_posterior_alpha,
    log_posterior_joint,
    mle,
)
from .sampling import Sample, SeededGenerator

__all__ = [
    "ProposalKernel",
    "GammaIndependence",
    "Uniform01",
    "PositiveRandomWalk",
    "hastings_log_ratio",
    "Chain",
    "PosteriorSummary",
    "MHConfig",
    "mh_run",
    "summarize",
    "effective_sample_size",
    "fit_alpha_mh",
    "fit_joint_mh",
    "write_chain_csv",
    "read_chain_csv",
]

log = logging.getLogger(__name__)


class ProposalKernel:
    """Per-coordinate proposal ``q(to | frm)``."""

    kind = "abstract"

    def propose(self, gen: SeededGenerator, current: float) -> float:
        raise NotImplementedError

    def log_density(self, to: float, frm: float) -> float:
        raise NotImplementedError

    def in_support(self, x: float) -> bool:
        return True


@dataclass(frozen=True)
class GammaIndependence(ProposalKernel):
    """Gamma proposal with fixed ``mean`` and ``shape``, independent of the state."""

    mean: float
    shape: float = 10.0
    kind = "gamma_independence"

    def __post_init__(self):
        if not (self.mean > 0 and self.shape > 0):
            raise DomainError("gamma kernel needs mean > 0 and shape > 0")

    @property
    def scale(self) -> float:
        return self.mean / self.shape

    def propose(self, gen, current):
        return gen.gamma(self.shape, self.scale)

    def log_density(self, to, frm):
        if not to > 0:
            return -math.inf
        k, s = self.shape, self.scale
        return (k - 1.0) * math.log(to) - to / s - math.lgamma(k) - k * math.log(s)

    def in_support(self, x):
        return x > 0


@dataclass(frozen=True)
class Uniform01(ProposalKernel):
    """Independence proposal uniform on (0, 1)."""

    kind = "uniform_01"

    def propose(self, gen, current):
        return gen.uniform()

    def log_density(self, to, frm):
        return 0.0 if 0.0 < to < 1.0 else -math.inf

    def in_support(self, x):
        return 0.0 < x < 1.0


@dataclass(frozen=True)
class PositiveRandomWalk(ProposalKernel):
    """Gaussian random walk; proposals at or below zero are rejected."""

    scale: float
    kind = "positive_random_walk"

    def __post_init__(self):
        if not self.scale > 0:
            raise DomainError("random-walk scale must be positive")

    def propose(self, gen, current):
        return current + gen.normal(0.0, self.scale)

    def log_density(self, to, frm):
        z = (to - frm) / self.scale
        return -0.5 * z * z - math.log(self.scale) - 0.5 * math.log(2.0 * math.pi)

    def in_support(self, x):
        return x > 0


def hastings_log_ratio(kernel: ProposalKernel, proposed: float, current: float) -> float:
    """``log q(current | proposed) - log q(proposed | current)``."""
    return kernel.log_density(current, proposed) - kernel.log_density(proposed, current)


@dataclass(eq=False)
class Chain:
    """MH output.  ``states[0]`` is the initial state; ``accepted[i, j]`` records
    whether the proposal for coordinate ``j`` at iteration ``i`` was taken."""

    states: np.ndarray
    accepted: np.ndarray
    burn_in: int
    seed: int
    names: tuple = ("alpha", "theta")
    out_of_support: int = 0

    @property
    def iters(self) -> int:
        return int(self.states.shape[0])

    @property
    def dim(self) -> int:
        return int(self.states.shape[1])

    @property
    def accepted_any(self) -> np.ndarray:
        return self.accepted.any(axis=1)


@dataclass(frozen=True, eq=False)
class PosteriorSummary:
    """Loss-based point estimates from the post-burn-in part of a chain.

    ``est_sq`` (posterior mean) is optimal under squared error, ``est_abs``
    (posterior median) under absolute error.
    """

    names: tuple
    est_sq: np.ndarray
    est_abs: np.ndarray
    variances: np.ndarray
    corr_alpha_theta: float | None
    acceptance_rate: float
    ess: np.ndarray
    n_total: int
    n_post: int
    warnings: tuple = ()

    def get(self, name: str, loss: str = "squared") -> float:
        i = self.names.index(name)
        return float((self.est_sq if loss == "squared" else self.est_abs)[i])

    def var(self, name: str) -> float:
        return float(self.variances[self.names.index(name)])

    def with_warnings(self, *extra) -> "PosteriorSummary":
        return PosteriorSummary(**{**self.__dict__, "warnings": self.warnings + tuple(extra)})


@dataclass(frozen=True)
class MHConfig:
    iters: int = 10_000
    burn_in: int | None = None
    kernel_shape: float = 10.0
    seed: int = 0
    init_theta: float = 0.5
    fallback_alpha: float = 1.0

    def __post_init__(self):
        if self.iters < 1:
            raise DomainError("iters must be at least 1")
        if not self.kernel_shape > 0:
            raise DomainError("kernel_shape must be positive")
        if self.burn_in is not None and not 0 <= self.burn_in < self.iters:
            raise DomainError("burn_in must satisfy 0 <= burn_in < iters")

    @property
    def resolved_burn_in(self) -> int:
        return self.iters // 10 if self.burn_in is None else int(self.burn_in)


def mh_run(target: Callable[[np.ndarray], float], init: Sequence[float],
           kernels: Sequence[ProposalKernel], iters: int, gen: SeededGenerator,
           burn_in: int = 0, names: tuple | None = None) -> Chain:
    """Metropolis-within-Gibbs sampler.

    ``target`` maps a state vector to an unnormalized log-density.  The
    chain has ``iters`` rows; row 0 is ``init`` and each later row follows
    one sweep over all coordinates.
    """
    x = np.array(init, dtype=float).reshape(-1)
    d = x.size
    if len(kernels) != d:
        raise DomainError(f"need one kernel per coordinate: {len(kernels)} kernels, {d} coordinates")
    if iters < 1:
        raise DomainError("iters must be at least 1")
    if not 0 <= burn_in < iters:
        raise DomainError("burn_in must satisfy 0 <= burn_in < iters")
    lp = float(target(x))
    if not math.isfinite(lp):
        raise DomainError(f"target is not finite at the initial state {x.tolist()}")

    states = np.empty((iters, d))
    accepted = np.zeros((iters, d), dtype=bool)
    states[0] = x
    outside = 0
    for i in range(1, iters):
        for j in range(d):
            kern = kernels[j]
            cur = x[j]
            prop = kern.propose(gen, cur)
            u = gen.uniform()
            if not kern.in_support(prop):
                outside += 1
                continue
            y = x.copy()
            y[j] = prop
            lp_new = float(target(y))
            if not math.isfinite(lp_new):
                outside += 1
                continue
            log_a = lp_new - lp + hastings_log_ratio(kern, prop, cur)
            if math.log(u) < log_a:
                x, lp = y, lp_new
                accepted[i, j] = True
        states[i] = x
    return Chain(states, accepted, burn_in, gen.seed,
                 names or tuple(f"x{j}" for j in range(d)), outside)


def effective_sample_size(x) -> float:
    """Autocorrelation-adjusted sample size (Geyer initial monotone sequence)."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 4:
        return float(n)
    xc = x - x.mean()
    v = float(np.dot(xc, xc)) / n
    if v == 0.0:
        return float(n)
    f = np.fft.rfft(xc, 2 * n)
    acov = np.fft.irfft(f * np.conj(f))[:n] / n
    rho = acov / acov[0]
    m = (n - 1) // 2
    pairs = rho[0:2 * m:2] + rho[1:2 * m:2]
    pos = np.flatnonzero(pairs <= 0)
    pairs = pairs[: pos[0]] if pos.size else pairs
    pairs = np.minimum.accumulate(pairs)
    tau = -1.0 + 2.0 * float(pairs.sum())
    return float(min(n, n / max(tau, 1e-12)))


def summarize(chain: Chain, burn_in: int | None = None) -> PosteriorSummary:
    b = chain.burn_in if burn_in is None else int(burn_in)
    post = chain.states[b:]
    if post.shape[0] == 0:
        raise DomainError(f"no draws after burn-in ({b} of {chain.iters})")
    k = post.shape[0]
    mean = post.mean(axis=0)
    med = np.median(post, axis=0)
    var = post.var(axis=0, ddof=1) if k > 1 else np.zeros(chain.dim)
    corr = None
    if chain.dim == 2:
        if k > 1 and var[0] > 0 and var[1] > 0:
            corr = float(np.clip(np.corrcoef(post[:, 0], post[:, 1])[0, 1], -1.0, 1.0))
        else:
            corr = 0.0
    props = chain.accepted[max(b, 1):]
    rate = float(props.mean()) if props.size else 0.0
    ess = np.array([effective_sample_size(post[:, j]) for j in range(chain.dim)])
    return PosteriorSummary(chain.names, mean, med, var, corr, rate, ess, chain.iters, k)


def _alpha_center(s: Sample, theta: float | None, config: MHConfig):
    """Gamma-kernel mean: the alpha MLE, or the fallback when the MLE fails or
    sits on the edge of the search bracket."""
    try:
        r = mle(s, "alpha_only", theta=theta) if theta is not None else mle(s, "joint")
    except ConvergenceError as exc:
        return config.fallback_alpha, None, (f"alpha MLE failed ({exc}); kernel mean {config.fallback_alpha}",)
    if r.at_boundary:
        return config.fallback_alpha, r, (
            f"alpha MLE on search boundary ({r.alpha:g}); kernel mean {config.fallback_alpha}",
        )
    if r.plateau:
        return r.alpha, r, (f"likelihood flat in alpha beyond {r.alpha:.4g}; kernel centred there",)
    return r.alpha, r, ()


def _alpha_supported(alpha: float) -> bool:
    return ALPHA_BOUNDS[0] < alpha < ALPHA_BOUNDS[1]


def _reject_all_zero(s: Sample):
    if np.all(s.values == 0):
        raise DegenerateDataError("all observations are 0: alpha is not identified by the data")


def fit_alpha_mh(s: Sample, theta_known: float, config: MHConfig = MHConfig()):
    """Posterior of alpha with theta known: prior 1/alpha, gamma independence kernel
    centred at the alpha MLE.  Returns ``(chain, summary)``."""
    if not 0.0 < theta_known < 1.0:
        raise DomainError(f"theta must lie in (0, 1), got {theta_known!r}")
    _reject_all_zero(s)
    center, _, warns = _alpha_center(s, theta_known, config)
    prop = alpha_propriety(s, theta_known)
    if not prop.proper:
        warns += (f"alpha posterior has not decayed at the support edges (ratio {prop.edge_ratio:.3g})",)

    def target(state):
        a = state[0]
        if not _alpha_supported(a):
            return -math.inf
        return log_posterior_alpha(s, a, theta_known)

    kernel = GammaIndependence(center, config.kernel_shape)
    chain = mh_run(target, [center], [kernel], config.iters, SeededGenerator(config.seed),
                   burn_in=config.resolved_burn_in, names=("alpha",))
    summary = summarize(chain)
    if warns:
        for w in warns:
            log.warning(w)
        summary = summary.with_warnings(*warns)
    return chain, summary


def fit_joint_mh(s: Sample, prior: PriorSpec = PriorSpec(), config: MHConfig = MHConfig()):
    """Joint posterior of (alpha, theta): gamma independence kernel for alpha
    centred at the joint alpha MLE, uniform (0, 1) kernel for theta."""
    _reject_all_zero(s)
    center, r, warns = _alpha_center(s, None, config)
    theta_ref = r.theta if r is not None else config.init_theta
    prop = alpha_propriety(s, min(max(theta_ref, 1e-6), 1 - 1e-6))
    if not prop.proper:
        warns += (f"alpha posterior has not decayed at the support edges (ratio {prop.edge_ratio:.3g})",)

    def target(state):
        a, t = state
        if not _alpha_supported(a):
            return -math.inf
        return log_posterior_joint(s, a, t, prior)

    kernels = [GammaIndependence(center, config.kernel_shape), Uniform01()]
    chain = mh_run(target, [center, config.init_theta], kernels, config.iters,
                   SeededGenerator(config.seed), burn_in=config.resolved_burn_in,
                   names=("alpha", "theta"))
    summary = summarize(chain)
    if warns:
        for w in warns:
            log.warning(w)
        summary = summary.with_warnings(*warns)
    return chain, summary


CHAIN_HEADER = ("iter", "alpha", "theta", "accepted")


def write_chain_csv(path, chain: Chain, fixed: dict | None = None):
    """Write ``iter,alpha,theta,accepted``.

    A coordinate absent from the chain is filled from ``fixed`` (e.g. the
    known theta).  ``accepted`` is 1 when any coordinate moved at that
    iteration.
    """
    fixed = fixed or {}
    cols = []
    for name in ("alpha", "theta"):
        if name in chain.names:
            cols.append(chain.states[:, chain.names.index(name)])
        else:
            cols.append(np.full(chain.iters, float(fixed.get(name, math.nan))))
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CHAIN_HEADER)
            for i, (a, t, acc) in enumerate(zip(cols[0], cols[1], chain.accepted_any)):
                w.writerow((i, repr(float(a)), repr(float(t)), int(acc)))
    except OSError as exc:
        raise OSError(f"cannot write chain file {path}: {exc.strerror or exc}") from exc
    return path


def read_chain_csv(path):
    """Return ``(iter, alpha, theta, accepted)`` arrays from a chain CSV."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    if tuple(rows[0]) != CHAIN_HEADER:
        raise DomainError(f"{path}: unexpected chain header {rows[0]}")
    data = np.array(rows[1:], dtype=float).reshape(-1, 4)
    return data[:, 0].astype(int), data[:, 1], data[:, 2], data[:, 3].astype(bool)
