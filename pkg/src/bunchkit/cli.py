"""Command-line front end: ``bunchkit {ingest,estimate,policy,simulate,bootstrap,diagnose}``.

Exit codes: 0 success, 1 usage, 2 data validation, 3 estimation, 4 I/O.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import warnings

import numpy as np

from . import __version__
from .boundary_density import blc_diagnostic, kink_estimates, side_bandwidth
from .empirical_dist import GRID_TOL, EmpiricalCDF, bunching_mass, histogram
from .errors import BunchkitError, DataValidationError
from .paycheck_data import SampleFilter, apply_sample_filters, load_paychecks, serialize_paychecks
from .pipeline import EstimateConfig, estimate_table, group_tables, policy_analysis
from .simulator import MphSpec, SimConfig, latent_csv, simulate_general_convex

log = logging.getLogger("bunchkit")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_ESTIMATION, EXIT_IO = 0, 1, 2, 3, 4
P_METHOD_NAMES = {"fixed": "fixed", "pto": "pto", "nonchanger": "nonchanger_upper"}
CONTINUOUS_TOL = 1e-9
SIG_DIGITS = 12


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _round(obj):
    """Round floats to 12 significant digits; NaN and infinities become null."""
    if isinstance(obj, dict):
        return {str(k): _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return None
        return float(f"{x:.{SIG_DIGITS}g}")
    return obj


def dumps_report(report: dict) -> str:
    return json.dumps(_round(report), indent=2) + "\n"


def _fmt(x: float) -> str:
    return f"{float(x):.{SIG_DIGITS}g}"


def _write(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# argument parsing


def _common(p: argparse.ArgumentParser, needs_input: bool = True) -> None:
    if needs_input:
        p.add_argument("--input", required=True, help="paycheck CSV")
    p.add_argument("--output-dir", required=True, help="directory for reports (created if missing)")
    p.add_argument("--k", type=float, default=40.0, help="kink location in hours (default 40)")
    p.add_argument("--threads", type=int, default=1, help="maximum worker threads")


def _data_opts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--no-snap", action="store_true", help="keep hours as given (simulated data)")
    p.add_argument("--tol", type=float, default=None,
                   help="half-width of the kink point mass (default 1/16, or 1e-9 with --no-snap)")
    p.add_argument("--filters", choices=("none", "all"), default="none", help="sample filters to apply")


def _estimate_opts(p: argparse.ArgumentParser, reps_default: int, multi: bool = True) -> None:
    p.add_argument("--p-method", choices=tuple(P_METHOD_NAMES), action="append" if multi else "store",
                   default=None, help="counterfactual-mass method" + (" (repeatable)" if multi else ""))
    p.add_argument("--p-value", type=float, default=0.0, help="p for the fixed method")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--reps", type=int, default=reps_default, help="bootstrap replicates")
    p.add_argument("--seed", type=int, default=None, help="bootstrap seed (required when --reps > 0)")
    p.add_argument("--bandwidth", type=float, default=None, help="override the plug-in bandwidth")
    p.add_argument("--degree", type=int, default=2, help="local polynomial degree")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bunchkit", description="Treatment effects from bunching at a kink.")
    parser.add_argument("--version", action="version", version=f"bunchkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="validate, filter and re-emit a paycheck CSV")
    _common(p)
    _data_opts(p)

    p = sub.add_parser("estimate", help="bunching, buncher ATE and elasticity bounds")
    _common(p)
    _data_opts(p)
    _estimate_opts(p, reps_default=0)
    p.add_argument("--group-by", default=None, help="repeat estimation within groups of this column")

    p = sub.add_parser("bootstrap", help="estimate with firm-clustered bootstrap inference")
    _common(p)
    _data_opts(p)
    _estimate_opts(p, reps_default=500)
    p.add_argument("--group-by", default=None)

    p = sub.add_parser("policy", help="ex-post kink effect, wage effect and reforms")
    _common(p)
    _data_opts(p)
    _estimate_opts(p, reps_default=0, multi=False)
    p.add_argument("--rho-bar", type=float, default=2.0, help="reformed overtime premium")
    p.add_argument("--k-min", type=float, default=None, help="smallest k' of the kink-shift curve")
    p.add_argument("--k-max", type=float, default=None, help="largest k' of the kink-shift curve")
    p.add_argument("--k-step", type=float, default=0.5)

    p = sub.add_parser("simulate", help="write a synthetic paycheck panel and its latent outcomes")
    _common(p, needs_input=False)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--family", choices=("isoelastic", "exponential"), default="isoelastic")
    p.add_argument("--gamma", type=float, default=4.0, help="exponential-family curvature")
    p.add_argument("--epsilon", type=float, default=-0.17)
    p.add_argument("--latent-dist", choices=("normal_log", "logistic_log", "uniform_log"), default="normal_log")
    p.add_argument("--loc", type=float, default=math.log(40.0), help="location of log h0")
    p.add_argument("--scale", type=float, default=0.15, help="scale of log h0")
    p.add_argument("--n-workers", type=int, default=4000)
    p.add_argument("--n-weeks", type=int, default=52)
    p.add_argument("--n-firms", type=int, default=500)
    p.add_argument("--p-mass", type=float, default=0.0)
    p.add_argument("--kstar-persistence", type=float, default=0.0)
    p.add_argument("--pto-prob", type=float, default=0.0)
    p.add_argument("--pto-hours", type=float, default=8.0)
    p.add_argument("--snap", action="store_true", help="round hours to the 1/8-hour grid")

    p = sub.add_parser("diagnose", help="histogram, bandwidths and shape diagnostics at the kink")
    _common(p)
    _data_opts(p)
    p.add_argument("--bin-width", type=float, default=0.25)
    p.add_argument("--window", type=float, default=10.0, help="half-width of the histogram range")
    p.add_argument("--bandwidth", type=float, default=None)
    p.add_argument("--seed", type=int, default=0, help="seed for the diagnostic noise bootstrap")
    return parser


# ---------------------------------------------------------------------------
# subcommands


# execution settings that cannot change results stay out of reports
_UNREPORTED = ("func", "output_dir", "threads")


def _config_dict(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in _UNREPORTED}


def _tol(args) -> float:
    if args.tol is not None:
        return args.tol
    return CONTINUOUS_TOL if args.no_snap else GRID_TOL


def _load(args):
    table = load_paychecks(args.input, snap=not args.no_snap)
    if args.filters == "all":
        table = apply_sample_filters(table, SampleFilter.all_on())
    return table


def _estimate_config(args, methods) -> EstimateConfig:
    if not 0.0 < args.alpha < 1.0:
        raise UsageError("--alpha must lie in (0, 1)")
    if not 0.0 <= args.p_value <= 1.0:
        raise UsageError("--p-value must lie in [0, 1]")
    if args.bandwidth is not None and not args.bandwidth > 0:
        raise UsageError("--bandwidth must be positive")
    return EstimateConfig(k=args.k, p_methods=tuple(methods), p_value=args.p_value,
                          bandwidth=args.bandwidth, degree=args.degree, tol=_tol(args), alpha=args.alpha)


def _require_seed(args) -> None:
    if args.reps > 0 and args.seed is None:
        raise UsageError("--seed is required when bootstrapping (--reps > 0)")
    if args.reps < 0:
        raise UsageError("--reps must be nonnegative")


def _estimate_block(table, cfg: EstimateConfig, args) -> dict:
    results = estimate_table(table, cfg, n_reps=args.reps, seed=args.seed, threads=args.threads)
    cols = {}
    for method, res in results.items():
        cols[method] = {"error": res} if isinstance(res, str) else res.to_dict()
    return {"n_rows": len(table), "n_workers": table.n_workers, "n_firms": table.n_firms, "p_methods": cols}


def cmd_estimate(args) -> dict:
    _require_seed(args)
    names = args.p_method or ["fixed"]
    cfg = _estimate_config(args, [P_METHOD_NAMES[m] for m in dict.fromkeys(names)])
    table = _load(args)
    report = {"command": args.command, "config": _config_dict(args), "seed": args.seed,
              "estimate_config": cfg.to_dict()}
    if args.group_by:
        groups = group_tables(table, args.group_by)
        report["groups"] = {g: _estimate_block(t, cfg, args) for g, t in groups.items()}
        report["pooled_n_rows"] = len(table)
    else:
        report.update(_estimate_block(table, cfg, args))
    _write(os.path.join(args.output_dir, f"{args.command}.json"), dumps_report(report))
    return report


def cmd_policy(args) -> dict:
    _require_seed(args)
    method = P_METHOD_NAMES[args.p_method or "fixed"]
    cfg = _estimate_config(args, [method])
    table = _load(args)
    res = estimate_table(table, cfg)[method]
    p = res.p.value
    k_primes = None
    if args.k_min is not None or args.k_max is not None:
        lo = args.k if args.k_min is None else args.k_min
        hi = args.k if args.k_max is None else args.k_max
        if not (lo <= hi and args.k_step > 0):
            raise UsageError("need k-min <= k-max and a positive k-step")
        k_primes = list(np.arange(lo, hi + 1e-9, args.k_step))
    report, dt, est, curve = policy_analysis(table, cfg, p, rho_bar=args.rho_bar, k_primes=k_primes)
    out = {"command": "policy", "config": _config_dict(args), "seed": args.seed,
           "estimate_config": cfg.to_dict(), "p": res.p.to_dict(), "kink_estimates": est.to_dict(),
           "policy": report.to_dict(), "double_time": {**dt.to_dict(), "rho_bar": args.rho_bar}}
    _write(os.path.join(args.output_dir, "policy.json"), dumps_report(out))
    _write(os.path.join(args.output_dir, "kink_shift.csv"),
           _csv_text(("k_prime", "bunch_lo", "bunch_hi", "hours_lo", "hours_hi"), curve))
    return out


def cmd_ingest(args) -> dict:
    table = _load(args)
    tol = _tol(args)
    b = bunching_mass(table, args.k, tol)
    out = {"command": "ingest", "config": _config_dict(args), "seed": None, "n_rows": len(table),
           "n_workers": table.n_workers, "n_firms": table.n_firms, "bunching_mass": b.mass,
           "n_at_k": b.n_at_k, "notes": list(table.notes)}
    _write(os.path.join(args.output_dir, "paychecks_clean.csv"), serialize_paychecks(table))
    _write(os.path.join(args.output_dir, "ingest.json"), dumps_report(out))
    return out


def cmd_simulate(args) -> dict:
    try:
        config = SimConfig(epsilon=args.epsilon, latent_dist=args.latent_dist, loc=args.loc,
                           scale=args.scale, n_workers=args.n_workers, n_weeks=args.n_weeks,
                           n_firms=args.n_firms, p_mass=args.p_mass,
                           kstar_persistence=args.kstar_persistence, pto_prob=args.pto_prob,
                           pto_hours=args.pto_hours, k=args.k, seed=args.seed, snap_to_grid=args.snap)
        spec = MphSpec(args.family, gamma=args.gamma)
    except ValueError as exc:
        raise UsageError(f"invalid simulation settings: {exc}") from None
    table, latent = simulate_general_convex(spec, config, threads=args.threads)
    _write(os.path.join(args.output_dir, "paychecks.csv"), serialize_paychecks(table))
    _write(os.path.join(args.output_dir, "latent.csv"), latent_csv(latent))
    out = {"command": "simulate", "config": _config_dict(args), "seed": args.seed,
           "sim_config": config.to_dict(), "n_rows": len(table),
           "bunching_mass": bunching_mass(table, args.k, CONTINUOUS_TOL if not args.snap else GRID_TOL).mass}
    _write(os.path.join(args.output_dir, "simulate.json"), dumps_report(out))
    return out


def cmd_diagnose(args) -> dict:
    table = _load(args)
    tol = _tol(args)
    F = EmpiricalCDF(table.hours)
    est = kink_estimates(F, args.k, 0.0, bandwidth=args.bandwidth, tol=tol)
    hist = histogram(table, args.bin_width, (args.k - args.window, args.k + args.window), k=args.k,
                     align="center")
    diag = {}
    for side in ("left", "right"):
        span = (args.k - args.window, args.k) if side == "left" else (args.k, args.k + args.window)
        grid = np.linspace(span[0], span[1], 41)[1:-1]
        d = blc_diagnostic(F, args.k, side, grid, bandwidth=est.bandwidth, seed=args.seed)
        diag[side] = {"bandwidth": side_bandwidth(F, args.k, side), **d.to_dict()}
    out = {"command": "diagnose", "config": _config_dict(args), "seed": args.seed,
           "kink_estimates": est.to_dict(), "B": est.B, "blc": diag}
    _write(os.path.join(args.output_dir, "histogram.csv"),
           _csv_text(tuple(hist.columns), hist.itertuples(index=False)))
    _write(os.path.join(args.output_dir, "diagnose.json"), dumps_report(out))
    return out


COMMANDS = {"ingest": cmd_ingest, "estimate": cmd_estimate, "bootstrap": cmd_estimate,
            "policy": cmd_policy, "simulate": cmd_simulate, "diagnose": cmd_diagnose}


def run(argv=None) -> int:
    """Parse ``argv``, run the subcommand and return the exit status."""
    logging.basicConfig(level=os.environ.get("BUNCHKIT_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if hasattr(args, "threads") and args.threads < 1:
            raise UsageError("--threads must be at least 1")
        os.makedirs(args.output_dir, exist_ok=True)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            COMMANDS[args.command](args)
        for w in caught:
            log.warning("%s", w.message)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except DataValidationError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except BunchkitError as exc:
        print(f"estimation error: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION
    except (ValueError, ArithmeticError) as exc:
        print(f"estimation error: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
