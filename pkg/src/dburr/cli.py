"""Command-line entry point: ``dburr {simulate,fit,tables,pmf}``.

Exit codes: 0 success, 1 usage error, 2 data/domain/I-O error,
3 internal-consistency error (exact-oracle routes disagree).
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from pathlib import Path

import numpy as np

from .closed_form import (
    exact_normalizer,
    exact_posterior_mean,
    exact_posterior_median,
    product_normalizer,
    theta_bayes_product,
)
from .distribution import (
    DBurrParams,
    dburr_cdf,
    dburr_pmf,
    dburr_survival,
    second_rate_of_failure,
)
from .errors import DBurrError, InternalConsistencyError
from .experiment import ExperimentConfig, format_table, run_tables, write_cell_samples, write_tables
from .inference import PriorSpec, mle, suff_stats
from .mcmc import MHConfig, fit_alpha_mh, fit_joint_mh, write_chain_csv
from .sampling import read_sample_csv

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3
METHODS = ("closed-form", "mh-alpha", "mh-joint", "mle")

log = logging.getLogger("dburr")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _common(p: argparse.ArgumentParser, out_help: str):
    p.add_argument("--seed", type=int, help="master seed (overrides the config file)")
    p.add_argument("--config", type=Path, help="key = value configuration file")
    p.add_argument("--out", type=Path, help=out_help)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dburr", description="Discrete Burr distribution toolkit")
    parser.add_argument("-v", "--verbose", action="store_true", help="log warnings to stderr")
    sub = parser.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="write one sample CSV per (theta, alpha) cell")
    _common(p, "output directory (default: samples)")
    p.add_argument("--n", type=int, help="sample size per cell")
    p.add_argument("--theta", type=float, help="single theta instead of the configured grid")
    p.add_argument("--alpha", type=float, help="single alpha instead of the configured grid")

    p = sub.add_parser("fit", help="fit a sample CSV")
    _common(p, "report CSV path (method,quantity,value)")
    p.add_argument("--data", type=Path, required=True, help="sample CSV")
    p.add_argument("--method", choices=METHODS, required=True)
    p.add_argument("--alpha", type=float, help="known alpha (closed-form; optional for mle)")
    p.add_argument("--theta", type=float, help="known theta (mh-alpha; optional for mle)")
    p.add_argument("--a", type=float, help="prior exponent of theta")
    p.add_argument("--iters", type=int, help="MH iterations including burn-in")
    p.add_argument("--burn-in", type=int, help="discarded initial iterations")
    p.add_argument("--kernel-shape", type=float, help="gamma kernel shape")
    p.add_argument("--chain-out", type=Path, help="write the MH chain CSV here")

    p = sub.add_parser("tables", help="regenerate the four simulation tables")
    _common(p, "output directory (default: tables)")
    p.add_argument("--n", type=int, help="sample size per cell")
    p.add_argument("--iters", type=int, help="MH iterations including burn-in")
    p.add_argument("--burn-in", type=int)
    p.add_argument("--jobs", type=int, default=1, help="worker processes")

    p = sub.add_parser("pmf", help="tabulate pmf, survival, cdf and second rate of failure")
    _common(p, "CSV path (default: stdout)")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--xmax", type=int, default=20, help="largest x tabulated")
    return parser


def _config(args, **overrides) -> ExperimentConfig:
    overrides["seed"] = args.seed
    if args.config is not None:
        return ExperimentConfig.from_file(args.config, **overrides)
    return ExperimentConfig().with_overrides(**overrides)


def cmd_simulate(args, stdout) -> int:
    grids = {}
    if args.theta is not None:
        grids["theta_grid"] = [args.theta]
    if args.alpha is not None:
        grids["alpha_grid"] = [args.alpha]
    cfg = _config(args, n=args.n, **grids)
    paths = write_cell_samples(cfg, args.out or Path("samples"))
    for p in paths:
        print(p, file=stdout)
    return EXIT_OK


def _write_report(path, rows):
    try:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("method", "quantity", "value"))
            w.writerows(rows)
    except OSError as exc:
        raise OSError(f"cannot write report {path}: {exc.strerror or exc}") from exc


def _fmt(v) -> str:
    return v if isinstance(v, str) else repr(float(v))


def cmd_fit(args, stdout) -> int:
    method = args.method
    if method == "closed-form" and args.alpha is None:
        raise UsageError("fit --method closed-form requires --alpha")
    if method == "mh-alpha" and args.theta is None:
        raise UsageError("fit --method mh-alpha requires --theta")
    cfg = _config(args, a=args.a, iters=args.iters, burn_in=args.burn_in,
                  kernel_shape=args.kernel_shape)
    s = read_sample_csv(args.data)
    rows = [("data", "n", s.n)]

    if method == "closed-form":
        stats = suff_stats(s, args.alpha)
        prior = PriorSpec(cfg.a)
        est = theta_bayes_product(stats, prior)
        rows += [
            ("closed-form", "alpha_fixed", args.alpha),
            ("closed-form", "theta_sq_product", est.value),
            ("closed-form", "theta_sq_product_raw", est.raw),
            ("closed-form", "theta_sq_clamped", int(est.clamped)),
            ("closed-form", "theta_sq_exact", exact_posterior_mean(stats, prior)),
            ("closed-form", "theta_abs_exact", exact_posterior_median(stats, prior)),
            ("closed-form", "normalizer_product", product_normalizer(stats, prior)),
            ("closed-form", "normalizer_exact", exact_normalizer(stats, prior)),
        ]
    elif method == "mle":
        mode = "alpha_only" if args.theta is not None else "theta_only" if args.alpha is not None else "joint"
        r = mle(s, mode, alpha=args.alpha, theta=args.theta)
        rows += [("mle", "mode", mode), ("mle", "alpha_hat", r.alpha), ("mle", "theta_hat", r.theta),
                 ("mle", "loglik", r.loglik), ("mle", "at_boundary", int(r.at_boundary)),
                 ("mle", "plateau", int(r.plateau))]
    else:
        mh = MHConfig(iters=cfg.iters, burn_in=cfg.resolved_burn_in,
                      kernel_shape=cfg.kernel_shape, seed=cfg.seed)
        if method == "mh-alpha":
            chain, summ = fit_alpha_mh(s, args.theta, mh)
            fixed = {"theta": args.theta}
        else:
            chain, summ = fit_joint_mh(s, PriorSpec(cfg.a), mh)
            fixed = {}
        for name in summ.names:
            rows += [(method, f"{name}_sq", summ.get(name, "squared")),
                     (method, f"{name}_abs", summ.get(name, "absolute")),
                     (method, f"var_{name}", summ.var(name)),
                     (method, f"ess_{name}", summ.ess[summ.names.index(name)])]
        if summ.corr_alpha_theta is not None:
            rows.append((method, "corr", summ.corr_alpha_theta))
        rows += [(method, "acceptance_rate", summ.acceptance_rate),
                 (method, "iters_total", summ.n_total),
                 (method, "iters_post_burn_in", summ.n_post),
                 (method, "seed", mh.seed)]
        for w in summ.warnings:
            print(f"warning: {w}", file=sys.stderr)
        if args.chain_out is not None:
            write_chain_csv(args.chain_out, chain, fixed)

    width = max(len(q) for _, q, _ in rows)
    for m, q, v in rows:
        text = v if isinstance(v, str) else (str(v) if isinstance(v, (int, np.integer)) else f"{v:.10g}")
        print(f"{q:<{width}}  {text}", file=stdout)
    if args.out is not None:
        _write_report(args.out, [(m, q, v if isinstance(v, (str, int, np.integer)) else _fmt(v))
                                 for m, q, v in rows])
    return EXIT_OK


def cmd_tables(args, stdout) -> int:
    if args.jobs < 1:
        raise UsageError("--jobs must be at least 1")
    cfg = _config(args, n=args.n, iters=args.iters, burn_in=args.burn_in)
    results = run_tables(cfg, jobs=args.jobs)
    paths = write_tables(results, args.out or Path("tables"), cfg)
    print(format_table(results, cfg), file=stdout, end="")
    for p in paths.values():
        print(p, file=stdout)
    return EXIT_OK


def cmd_pmf(args, stdout) -> int:
    if args.xmax < 0:
        raise UsageError("--xmax must be non-negative")
    p = DBurrParams(args.alpha, args.theta)
    x = np.arange(args.xmax + 1, dtype=float)
    cols = (x, dburr_pmf(x, p), dburr_survival(x, p), dburr_cdf(x, p), second_rate_of_failure(x, p))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("x", "pmf", "survival", "cdf", "second_rate"))
    for xi, *vals in zip(*cols):
        w.writerow([int(xi)] + [repr(float(v)) for v in vals])
    if args.out is None:
        stdout.write(buf.getvalue())
    else:
        try:
            Path(args.out).write_text(buf.getvalue())
        except OSError as exc:
            raise OSError(f"cannot write {args.out}: {exc.strerror or exc}") from exc
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "fit": cmd_fit, "tables": cmd_tables, "pmf": cmd_pmf}


def main(argv=None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.verb](args, stdout)
    except UsageError as exc:
        print(f"dburr {args.verb}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InternalConsistencyError as exc:
        print(f"internal consistency error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except (DBurrError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
