"""Seeded random variate generation for DBD(alpha, theta) and Burr-XII.

The default discrete sampler draws a continuous Burr-XII variate by
inverting its survival function and takes the integer part.  A direct
inverse-CDF sampler on the integers is kept as a cross-check.

Sample values are stored as integer-valued float64: heavy-tailed parameter
choices produce observations far beyond the int64 range.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .distribution import BurrParams, DBurrParams, dburr_survival
from .errors import DomainError

__all__ = [
    "SeededGenerator",
    "Sample",
    "uniform_to_burr",
    "sample_continuous_burr",
    "sample_dburr",
    "dburr_quantile",
    "sample_dburr_quantile",
    "write_sample_csv",
    "read_sample_csv",
]

_TWO_53 = 1 << 53
_FLOAT_MAX_LOG = math.log(np.finfo(float).max)


class SeededGenerator:
    """PCG64 stream with an explicit 64-bit seed.

    Uniforms are produced as ``(k + 0.5) / 2**53`` for a 53-bit integer
    ``k`` and therefore never equal 0 or 1.  A generator is single-owner;
    use :meth:`spawn_seeds` for independent streams.
    """

    def __init__(self, seed: int):
        seed = int(seed)
        if not 0 <= seed < 2**64:
            raise DomainError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = seed
        self._seq = np.random.SeedSequence(seed)
        self.rng = np.random.Generator(np.random.PCG64(self._seq))

    def uniform(self, size=None):
        k = self.rng.integers(0, _TWO_53, size=size, dtype=np.uint64)
        out = (k.astype(float) + 0.5) / _TWO_53 if size is not None else (float(k) + 0.5) / _TWO_53
        return out

    def gamma(self, shape: float, scale: float) -> float:
        return float(self.rng.gamma(shape, scale))

    def normal(self, loc: float = 0.0, scale: float = 1.0) -> float:
        return float(self.rng.normal(loc, scale))

    def spawn_seeds(self, n: int) -> list[int]:
        """Derive ``n`` child seeds that depend only on this generator's seed."""
        children = self._seq.spawn(n)
        return [int(c.generate_state(1, np.uint64)[0]) for c in children]

    def __repr__(self):
        return f"SeededGenerator(seed={self.seed})"


@dataclass(frozen=True, eq=False)
class Sample:
    """Ordered non-negative integer observations."""

    values: np.ndarray = field(repr=False)
    seed: int | None = None
    support: np.ndarray = field(init=False, repr=False, compare=False)
    counts: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).reshape(-1)
        if v.size < 1:
            raise DomainError("a sample needs at least one observation")
        if np.any(~np.isfinite(v)) or np.any(v < 0) or np.any(v != np.floor(v)):
            raise DomainError("sample values must be non-negative integers")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        support, counts = np.unique(v, return_counts=True)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "counts", counts.astype(float))

    @property
    def n(self) -> int:
        return int(self.values.size)

    def __len__(self):
        return self.n

    def __repr__(self):
        head = ", ".join(f"{v:.0f}" for v in self.values[:8])
        more = ", ..." if self.n > 8 else ""
        return f"Sample(n={self.n}, values=[{head}{more}], seed={self.seed})"


def uniform_to_burr(u, p: BurrParams):
    """Invert the Burr-XII survival: ``x = (u**(-1/beta) - 1) ** (1/alpha)``.

    Values past the float range saturate at the largest finite double.
    """
    u = np.asarray(u, dtype=float)
    # log(u^(-1/b) - 1) = log(expm1(-log(u)/b))
    t = -np.log(u) / p.beta
    with np.errstate(over="ignore", divide="ignore"):
        log_em1 = np.where(t > 30.0, t + np.log1p(-np.exp(-t)), np.log(np.expm1(t)))
    log_x = np.minimum(log_em1 / p.alpha, _FLOAT_MAX_LOG)
    out = np.minimum(np.exp(log_x), np.finfo(float).max)
    return float(out) if out.ndim == 0 else out


def sample_continuous_burr(gen: SeededGenerator, p: BurrParams, size=None):
    """Burr-XII variate(s) by survival inversion of open-interval uniforms."""
    return uniform_to_burr(gen.uniform(size), p)


def sample_dburr(gen: SeededGenerator, p: DBurrParams, n: int) -> Sample:
    """``n`` DBD draws as the integer part of Burr-XII draws with ``beta = -log(theta)``."""
    if n < 1:
        raise DomainError(f"n must be at least 1, got {n}")
    x = sample_continuous_burr(gen, p.to_continuous(), size=int(n))
    return Sample(np.floor(x), seed=gen.seed)


def dburr_quantile(u, p: DBurrParams):
    """Smallest ``x`` with ``P(X <= x) >= u``, i.e. ``S(x + 1) <= 1 - u``."""
    scalar = np.ndim(u) == 0
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if np.any(~((u > 0) & (u < 1))):
        raise DomainError("u must lie in (0, 1)")
    lt = p.log_theta
    # S(y) <= 1-u  <=>  log(1 + y^a) >= log1p(-u)/log(theta) =: c
    c = np.log1p(-u) / lt
    with np.errstate(over="ignore", divide="ignore"):
        log_y = np.where(c > 30.0, c + np.log1p(-np.exp(-c)), np.log(np.expm1(c))) / p.alpha
    y = np.exp(np.minimum(log_y, _FLOAT_MAX_LOG))
    x = np.maximum(np.ceil(y) - 1.0, 0.0)
    # rounding repair where integers are still exact
    v = 1.0 - u
    for _ in range(8):
        exact = x < 2.0**52
        up = exact & (dburr_survival(x + 1.0, p) > v)
        down = exact & (x > 0) & (dburr_survival(np.maximum(x, 0.0), p) <= v)
        if not (up.any() or down.any()):
            break
        x = x + up - down
    return float(x[0]) if scalar else x


def sample_dburr_quantile(gen: SeededGenerator, p: DBurrParams, n: int) -> Sample:
    """``n`` DBD draws by discrete inverse-CDF; slower than :func:`sample_dburr`."""
    if n < 1:
        raise DomainError(f"n must be at least 1, got {n}")
    return Sample(dburr_quantile(gen.uniform(int(n)), p), seed=gen.seed)


def _format_count(v: float) -> str:
    return str(int(v))


def write_sample_csv(path, sample: Sample, seed: int | None = None, extra: dict | None = None):
    """Write ``# seed=...`` metadata, an ``x`` header, then one value per line."""
    path = Path(path)
    seed = sample.seed if seed is None else seed
    meta = [f"seed={seed}"] if seed is not None else []
    meta += [f"{k}={v}" for k, v in (extra or {}).items()]
    lines = []
    if meta:
        lines.append("# " + " ".join(meta))
    lines.append("x")
    lines.extend(_format_count(v) for v in sample.values)
    try:
        path.write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write sample file {path}: {exc.strerror or exc}") from exc
    return path


def read_sample_csv(path) -> Sample:
    """Parse a file written by :func:`write_sample_csv` (metadata optional)."""
    path = Path(path)
    seed = None
    values = []
    header_seen = False
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            for tok in line[1:].split():
                key, _, val = tok.partition("=")
                if key == "seed" and val not in ("", "None"):
                    seed = int(val)
            continue
        if not header_seen:
            if line != "x":
                raise DomainError(f"{path}:{lineno}: expected header 'x', got {line!r}")
            header_seen = True
            continue
        try:
            values.append(float(int(line)))
        except ValueError:
            raise DomainError(f"{path}:{lineno}: not a non-negative integer: {line!r}") from None
    if not header_seen:
        raise DomainError(f"{path}: missing 'x' header")
    return Sample(np.array(values, dtype=float), seed=seed)
