"""Simulation-study harness: per-cell datasets, MH fits and table assembly.

A master seed derives one seed per (theta, alpha) cell; each cell seed in
turn derives the data stream and the two chain streams, so every emitted
row can be regenerated from its own seed and the configuration alone.
"""
from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .distribution import DBurrParams
from .errors import DBurrError, DomainError
from .inference import PriorSpec
from .mcmc import MHConfig, fit_alpha_mh, fit_joint_mh
from .sampling import Sample, SeededGenerator, sample_dburr, write_sample_csv

__all__ = [
    "ExperimentConfig",
    "TableRow",
    "CellResult",
    "cell_seed",
    "cell_streams",
    "simulate_cell",
    "run_cell",
    "run_tables",
    "write_tables",
    "read_table_csv",
    "format_table",
    "write_cell_samples",
    "TABLE_FILES",
    "ALPHA_COLUMNS",
    "JOINT_COLUMNS",
]

log = logging.getLogger(__name__)

TABLE_FILES = {
    ("alpha", "squared"): "table1_alpha_squared.csv",
    ("alpha", "absolute"): "table2_alpha_absolute.csv",
    ("joint", "squared"): "table3_joint_squared.csv",
    ("joint", "absolute"): "table4_joint_absolute.csv",
}
ALPHA_COLUMNS = ("theta_true", "alpha_true", "alpha_hat", "var_alpha", "loss", "seed")
JOINT_COLUMNS = ("theta_true", "alpha_true", "alpha_hat", "theta_hat", "var_alpha",
                 "var_theta", "corr", "loss", "seed")


def _floats(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).replace(",", " ").split()]


@dataclass(frozen=True)
class ExperimentConfig:
    theta_grid: tuple = (0.1, 0.2, 0.3)
    alpha_grid: tuple = (1.0, 2.0, 3.0, 4.0)
    n: int = 25
    iters: int = 10_000
    burn_in: int | None = None
    a: float = 1.0
    seed: int = 1
    kernel_shape: float = 10.0

    def __post_init__(self):
        object.__setattr__(self, "theta_grid", tuple(_floats(self.theta_grid)))
        object.__setattr__(self, "alpha_grid", tuple(_floats(self.alpha_grid)))
        if not self.theta_grid or not self.alpha_grid:
            raise DomainError("theta_grid and alpha_grid must be non-empty")
        for t in self.theta_grid:
            if not 0.0 < t < 1.0:
                raise DomainError(f"theta grid value {t} outside (0, 1)")
        for a in self.alpha_grid:
            if not a > 0:
                raise DomainError(f"alpha grid value {a} is not positive")
        if int(self.n) < 1 or int(self.iters) < 1:
            raise DomainError("n and iters must be positive")
        if not self.a > 0 or not self.kernel_shape > 0:
            raise DomainError("a and kernel_shape must be positive")
        if not 0 <= int(self.seed) < 2**64:
            raise DomainError("seed must be a 64-bit unsigned integer")
        if self.burn_in is not None and not 0 <= int(self.burn_in) < int(self.iters):
            raise DomainError("burn_in must satisfy 0 <= burn_in < iters")

    @property
    def resolved_burn_in(self) -> int:
        return int(self.iters) // 10 if self.burn_in is None else int(self.burn_in)

    @property
    def cells(self):
        """``(index, theta, alpha)`` in row-major order (theta outer)."""
        k = 0
        for t in self.theta_grid:
            for a in self.alpha_grid:
                yield k, t, a
                k += 1

    @classmethod
    def from_text(cls, text: str, **overrides) -> "ExperimentConfig":
        """Parse ``key = value`` lines; ``#`` starts a comment."""
        known = {f.name: f for f in fields(cls)}
        values = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, val = line.partition("=")
            key = key.strip()
            if not sep or key not in known:
                raise DomainError(f"config line {lineno}: cannot parse {raw!r}")
            values[key] = val.strip()
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls._coerce(values)

    @classmethod
    def from_file(cls, path, **overrides) -> "ExperimentConfig":
        return cls.from_text(Path(path).read_text(), **overrides)

    @classmethod
    def _coerce(cls, values: dict) -> "ExperimentConfig":
        out = {}
        for k, v in values.items():
            if k in ("theta_grid", "alpha_grid"):
                out[k] = _floats(v)
            elif k in ("n", "iters", "seed"):
                out[k] = int(v)
            elif k == "burn_in":
                out[k] = None if str(v).lower() in ("", "none") else int(v)
            else:
                out[k] = float(v)
        return cls(**out)

    def with_overrides(self, **overrides) -> "ExperimentConfig":
        merged = asdict(self)
        merged.update({k: v for k, v in overrides.items() if v is not None})
        return self._coerce(merged)

    def to_text(self) -> str:
        def fmt(v):
            if isinstance(v, tuple):
                return ", ".join(repr(x) for x in v)
            return "none" if v is None else repr(v)

        lines = [f"{k} = {fmt(v)}" for k, v in asdict(self).items()]
        lines.append(f"# resolved burn_in = {self.resolved_burn_in}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class TableRow:
    theta_true: float
    alpha_true: float
    alpha_hat: float
    var_alpha: float
    loss: str
    seed: int
    theta_hat: float | None = None
    var_theta: float | None = None
    corr: float | None = None

    @property
    def joint(self) -> bool:
        return self.theta_hat is not None

    def as_dict(self) -> dict:
        cols = JOINT_COLUMNS if self.joint else ALPHA_COLUMNS
        return {c: getattr(self, c) for c in cols}


@dataclass(frozen=True)
class CellResult:
    index: int
    theta: float
    alpha: float
    seed: int
    sample: Sample
    rows: tuple = field(default=())
    acceptance: dict = field(default_factory=dict)
    warnings: tuple = ()


def cell_seed(master: int, index: int) -> int:
    """Seed of cell ``index`` derived from the master seed."""
    ss = np.random.SeedSequence(int(master), spawn_key=(int(index),))
    return int(ss.generate_state(1, np.uint64)[0])


def cell_streams(seed: int) -> tuple[int, int, int]:
    """``(data, alpha_chain, joint_chain)`` seeds for one cell."""
    d, a, j = SeededGenerator(seed).spawn_seeds(3)
    return d, a, j


def simulate_cell(seed: int, theta: float, alpha: float, n: int) -> Sample:
    data_seed, _, _ = cell_streams(seed)
    s = sample_dburr(SeededGenerator(data_seed), DBurrParams(alpha, theta), n)
    return Sample(s.values, seed=seed)


def _nan_rows(theta, alpha, seed):
    nan = math.nan
    rows = []
    for loss in ("squared", "absolute"):
        rows.append(TableRow(theta, alpha, nan, nan, loss, seed))
        rows.append(TableRow(theta, alpha, nan, nan, loss, seed, nan, nan, nan))
    return rows


def run_cell(config: ExperimentConfig, index: int, theta: float, alpha: float) -> CellResult:
    """Simulate one dataset and fit both scenarios from the same data."""
    seed = cell_seed(config.seed, index)
    _, alpha_seed, joint_seed = cell_streams(seed)
    sample = simulate_cell(seed, theta, alpha, config.n)
    base = dict(iters=config.iters, burn_in=config.resolved_burn_in,
                kernel_shape=config.kernel_shape)
    try:
        _, sa = fit_alpha_mh(sample, theta, MHConfig(seed=alpha_seed, **base))
        _, sj = fit_joint_mh(sample, PriorSpec(config.a), MHConfig(seed=joint_seed, **base))
    except DBurrError as exc:
        log.warning("cell theta=%g alpha=%g (seed %d): %s", theta, alpha, seed, exc)
        return CellResult(index, theta, alpha, seed, sample, tuple(_nan_rows(theta, alpha, seed)),
                          {}, (str(exc),))
    rows = []
    for loss in ("squared", "absolute"):
        rows.append(TableRow(theta, alpha, sa.get("alpha", loss), sa.var("alpha"), loss, seed))
        rows.append(TableRow(
            theta, alpha, sj.get("alpha", loss), sj.var("alpha"), loss, seed,
            theta_hat=sj.get("theta", loss), var_theta=sj.var("theta"), corr=sj.corr_alpha_theta,
        ))
    acc = {"alpha": sa.acceptance_rate, "joint": sj.acceptance_rate}
    return CellResult(index, theta, alpha, seed, sample, tuple(rows), acc,
                      tuple(sa.warnings) + tuple(sj.warnings))


def _run_cell_args(args):
    return run_cell(*args)


def run_tables(config: ExperimentConfig, jobs: int = 1) -> list[CellResult]:
    """Fit every cell of the grid; ``jobs > 1`` runs cells in worker processes."""
    tasks = [(config, k, t, a) for k, t, a in config.cells]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(_run_cell_args, tasks))
    return [run_cell(*t) for t in tasks]


def _fmt_full(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_tables(results: list[CellResult], out_dir, config: ExperimentConfig) -> dict:
    """Write the four table CSVs, a 4-decimal text rendering and the config."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc.strerror or exc}") from exc
    paths = {}
    for (scenario, loss), name in TABLE_FILES.items():
        cols = JOINT_COLUMNS if scenario == "joint" else ALPHA_COLUMNS
        rows = [r for c in results for r in c.rows if r.loss == loss and r.joint == (scenario == "joint")]
        path = out / name
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for r in rows:
                d = r.as_dict()
                w.writerow([_fmt_full(d[c]) for c in cols])
        paths[(scenario, loss)] = path
    (out / "tables.txt").write_text(format_table(results, config))
    (out / "config.txt").write_text(config.to_text())
    return paths


def read_table_csv(path) -> list[dict]:
    """Parse a table CSV back into dicts with numeric fields converted."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for r in rows:
        d = {}
        for k, v in r.items():
            if k == "loss":
                d[k] = v
            elif k == "seed":
                d[k] = int(v)
            else:
                d[k] = float(v)
        out.append(d)
    return out


def format_table(results: list[CellResult], config: ExperimentConfig) -> str:
    """Human-readable rendering with four decimals, one block per table."""
    lines = []
    titles = {
        ("alpha", "squared"): "alpha unknown (theta known), squared error loss",
        ("alpha", "absolute"): "alpha unknown (theta known), absolute error loss",
        ("joint", "squared"): "alpha and theta unknown, squared error loss",
        ("joint", "absolute"): "alpha and theta unknown, absolute error loss",
    }
    by_cell = {(c.theta, c.alpha): c for c in results}
    head = "theta  stat          " + "".join(f"alpha={a:<8g}" for a in config.alpha_grid)
    for (scenario, loss), title in titles.items():
        lines.append(f"[{title}]")
        lines.append(head)
        stats = [("alpha_hat", "alpha_hat"), ("var_alpha", "var(alpha)")]
        if scenario == "joint":
            stats = [("alpha_hat", "alpha_hat"), ("theta_hat", "theta_hat"),
                     ("var_alpha", "var(alpha)"), ("var_theta", "var(theta)"), ("corr", "corr")]
        for t in config.theta_grid:
            for j, (attr, label) in enumerate(stats):
                cells = []
                for a in config.alpha_grid:
                    c = by_cell[(t, a)]
                    row = next(r for r in c.rows if r.loss == loss and r.joint == (scenario == "joint"))
                    cells.append(f"{getattr(row, attr):<14.4f}")
                lead = f"{t:<6g} " if j == 0 else " " * 7
                lines.append(f"{lead}{label:<14}" + "".join(cells))
        lines.append("")
    return "\n".join(lines)


def write_cell_samples(config: ExperimentConfig, out_dir) -> list[Path]:
    """Write one sample CSV per cell, each tagged with its cell seed."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc.strerror or exc}") from exc
    paths = []
    for k, t, a in config.cells:
        seed = cell_seed(config.seed, k)
        s = simulate_cell(seed, t, a, config.n)
        p = out / f"sample_theta{t:g}_alpha{a:g}.csv"
        write_sample_csv(p, s, seed=seed, extra={"theta": repr(t), "alpha": repr(a), "n": config.n})
        paths.append(p)
    return paths
