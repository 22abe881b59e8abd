"""Command-line entry point: ``trajsim <group> <command> [options]``.

Exit status: 0 on success, 1 on a domain or validation error, 2 on I/O
errors, malformed input files and usage errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .calibration import (
    CalibrationError,
    ZeroCouponCurve,
    ar1_to_vasicek,
    fit_adhoc,
    fit_ar1,
    fit_indirect,
    naive_estimate,
)
from .dist_transforms import NormalSource, poisson_sample
from .experiments import RECIPES, run_recipe
from .pricing import CallSpec, mc_call_price
from .rng_core import TorusPrecisionError, make_source
from .rng_tests import run_battery
from .sde import (
    CirParams,
    GbmParams,
    VasicekParams,
    cir_model,
    gbm_model,
    measure_strong_order,
    simulate_ensemble,
    steps_for,
    vasicek_model,
)


class InputFormatError(ValueError):
    """Malformed input file (reported with exit status 2)."""


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    return str(v)


def _atomic_write(path: str, text: str) -> None:
    target = Path(path)
    fd, tmp = tempfile.mkstemp(dir=target.parent if str(target.parent) else ".",
                               prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        _atomic_write(path, text)


def write_csv(path: str | None, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if header:
        w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    _emit(path, buf.getvalue())


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def write_json(path: str | None, payload: dict, args: argparse.Namespace) -> None:
    payload = dict(payload)
    payload["config_echo"] = _config_echo(args)
    _emit(path, json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")


def _config_echo(args: argparse.Namespace) -> dict:
    # threads does not affect results; leaving it out keeps reports machine-independent
    skip = ("func", "out", "csv_out", "threads")
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def read_series(path: str) -> np.ndarray:
    """First column of a CSV; a non-numeric first line is taken as a header."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except UnicodeDecodeError as exc:
        raise InputFormatError(f"{path}: not a text file ({exc})") from None
    values = []
    for lineno, row in enumerate(rows, start=1):
        if not row or not row[0].strip():
            continue
        try:
            values.append(float(row[0]))
        except ValueError:
            if lineno == 1:
                continue
            raise InputFormatError(f"{path}:{lineno}: non-numeric value {row[0]!r}") from None
    if not values:
        raise InputFormatError(f"{path}: no data rows")
    return np.array(values)


def read_curve(path: str) -> ZeroCouponCurve:
    try:
        return ZeroCouponCurve.from_csv(path)
    except (ValueError, UnicodeDecodeError) as exc:
        raise InputFormatError(str(exc)) from None


# ---------------------------------------------------------------------------
# commands


def _source(args, count: int):
    return make_source(args.source, prime=args.prime, seed=args.seed, count=count,
                       alpha=args.alpha, mixer_prime=getattr(args, "mixer_prime", None))


def cmd_rng_gen(args) -> None:
    u = _source(args, args.count).uniforms(args.count)
    write_csv(args.out, None, ([v] for v in u))


def cmd_rng_transform(args) -> None:
    if args.dist == "normal":
        x = NormalSource(_source(args, args.count), args.method).normals(args.count)
        write_csv(args.out, None, ([v] for v in x))
    else:
        src = _source(args, args.count)
        write_csv(args.out, None, ([poisson_sample(args.lam, src)] for _ in range(args.count)))


def cmd_rng_test(args) -> None:
    u = _source(args, args.count).uniforms(args.count)
    tests = [t.strip() for t in args.battery.split(",") if t.strip()]
    reports = run_battery(u, tests, bins=args.bins, max_lag=args.max_lag)
    write_json(args.out, {"source": args.source, "count": args.count, "reports": reports}, args)


def _model(args):
    if args.model == "vasicek":
        return vasicek_model(VasicekParams(args.a, args.b, args.r0, args.sigma))
    if args.model == "cir":
        return cir_model(CirParams(args.a, args.b, args.r0, args.sigma))
    return gbm_model(GbmParams(args.s0, args.mu, args.sigma))


def cmd_sde_simulate(args) -> None:
    model = _model(args)
    n_steps = steps_for(args.T, args.delta)
    normals = NormalSource(_source(args, args.n * n_steps))
    ens = simulate_ensemble(model, args.scheme, args.delta, args.T, args.n, normals)
    header = ["t"] + [f"path_{i}" for i in range(ens.n_paths)]
    rows = (np.concatenate([[t], ens.values[:, k]]) for k, t in enumerate(ens.times))
    write_csv(args.out, header, rows)


def cmd_sde_convergence(args) -> None:
    model = _model(args)
    deltas = [float(d) for d in args.deltas.split(",")]
    n_fine = steps_for(args.T, min(deltas))
    normals = NormalSource(_source(args, args.n * n_fine))
    rep = measure_strong_order(model, args.scheme, deltas, args.n, args.T, normals)
    write_json(args.out, rep.to_dict(), args)
    if args.csv_out:
        rows = ([d, math.log(d), e, math.log(e) if e > 0 else float("nan")]
                for d, e in zip(rep.deltas, rep.mean_abs_terminal_errors))
        write_csv(args.csv_out, ["delta", "log_delta", "mean_abs_error", "log_error"], rows)


def cmd_price_call(args) -> None:
    spec = CallSpec(args.s, args.k, args.r, args.sigma, t_expiry=args.tau)
    checkpoints = range(args.step, args.n + 1, args.step) if args.step else None
    _, rep = mc_call_price(spec, args.n, NormalSource(_source(args, args.n)), checkpoints)
    write_csv(args.out, ["n", "estimate", "rho"], rep.rows())


def _parse_fix(items) -> dict[str, float]:
    fixed = {}
    for item in items or []:
        name, sep, value = item.partition("=")
        if not sep or name not in ("a", "b", "sigma"):
            raise ValueError(f"--fix expects a=..., b=... or sigma=..., got {item!r}")
        fixed[name] = float(value)
    return fixed


def cmd_calib_adhoc(args) -> None:
    curve = read_curve(args.curve)
    fixed = _parse_fix(args.fix)
    free = [n for n in ("a", "b", "sigma") if n not in fixed]
    est = fit_adhoc(curve, args.objective, free=free, fixed=fixed, r0=args.r0)
    write_json(args.out, est.to_dict(), args)


def cmd_calib_indirect(args) -> None:
    series = read_series(args.series)
    est = fit_indirect(series, args.delta, args.model, args.aux, H=args.H, seed=args.seed,
                       substeps=args.substeps)
    naive = naive_estimate(series, args.delta, args.model, args.aux)
    payload = est.to_dict()
    payload["naive"] = naive.to_dict()
    write_json(args.out, payload, args)


def cmd_calib_ar1(args) -> None:
    series = read_series(args.series)
    fit = fit_ar1(series, args.delta)
    est = ar1_to_vasicek(fit, args.delta, r0=float(series[0]))
    payload = est.to_dict()
    payload["ar1"] = {"alpha": fit.alpha, "beta": fit.beta, "sigma1": fit.sigma1, "n": fit.n}
    write_json(args.out, payload, args)


def cmd_sim(args) -> None:
    header, rows = run_recipe(args.recipe, n=args.n, seed=args.seed, prime=args.prime,
                              delta=args.delta)
    write_csv(args.out, header, rows)


# ---------------------------------------------------------------------------
# parser


def _add_source(p: argparse.ArgumentParser, default: str = "lcg") -> None:
    p.add_argument("--source", choices=["lcg", "spreadsheet", "torus", "mixed"], default=default,
                   help="uniform generator (default: %(default)s)")
    p.add_argument("--prime", type=int, default=2, help="torus prime p (default: %(default)s)")
    p.add_argument("--seed", type=int, default=1, help="LCG / mixer seed (default: %(default)s)")
    p.add_argument("--alpha", type=float, default=10.0,
                   help="mixed-torus index spread factor (default: %(default)s)")
    p.add_argument("--mixer-prime", type=int, default=None,
                   help="mix with a second torus of this prime instead of the LCG")


def _add_model(p: argparse.ArgumentParser, default_model: str) -> None:
    p.add_argument("--model", choices=["vasicek", "cir", "gbm"], default=default_model)
    p.add_argument("--scheme", choices=["exact", "euler", "milstein"], default="euler")
    p.add_argument("--a", type=float, default=0.5, help="mean-reversion speed")
    p.add_argument("--b", type=float, default=0.05, help="long-run level")
    p.add_argument("--r0", type=float, default=0.04, help="initial short rate")
    p.add_argument("--sigma", type=float, default=0.1, help="volatility")
    p.add_argument("--s0", type=float, default=100.0, help="GBM initial price")
    p.add_argument("--mu", type=float, default=0.04, help="GBM drift")
    p.add_argument("-T", "--T", dest="T", type=float, default=10.0, help="horizon in years")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trajsim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--threads", type=_positive_int, default=os.cpu_count() or 1,
                        help="worker cap (computation is vectorised in-process)")
    groups = parser.add_subparsers(dest="group", required=True)

    # rng
    rng = groups.add_parser("rng", help="uniform generation, transforms, quality tests")
    rng_sub = rng.add_subparsers(dest="command", required=True)
    p = rng_sub.add_parser("gen", help="emit uniforms, one per line")
    _add_source(p)
    p.add_argument("--count", type=int, default=10_000)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_rng_gen)

    p = rng_sub.add_parser("transform", help="emit normal or Poisson variates")
    _add_source(p)
    p.add_argument("--dist", choices=["normal", "poisson"], required=True)
    p.add_argument("--method", choices=["moro", "box_muller"], default="moro")
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--count", type=int, default=10_000)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_rng_transform)

    p = rng_sub.add_parser("test", help="run the statistical battery, JSON report")
    _add_source(p)
    p.add_argument("--count", type=int, default=10_000)
    p.add_argument("--battery", default="chi2,ks,ad,poker,correlogram")
    p.add_argument("--bins", type=int, default=20)
    p.add_argument("--max-lag", type=int, default=50)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_rng_test)

    # sde
    sde = groups.add_parser("sde", help="path simulation and convergence order")
    sde_sub = sde.add_subparsers(dest="command", required=True)
    p = sde_sub.add_parser("simulate", help="CSV of paths: t, path_0, ...")
    _add_model(p, "vasicek")
    _add_source(p, default="mixed")
    p.add_argument("--delta", type=float, default=1 / 12)
    p.add_argument("-n", "--n", dest="n", type=int, default=10)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_sde_simulate)

    p = sde_sub.add_parser("convergence", help="strong-order report (JSON) and log-log CSV")
    _add_model(p, "gbm")
    _add_source(p)
    p.set_defaults(T=1.0, sigma=0.2, s0=1.0, mu=0.05)
    p.add_argument("--deltas", default="0.125,0.0625,0.03125,0.015625,0.0078125")
    p.add_argument("-n", "--n", dest="n", type=int, default=20_000)
    p.add_argument("--out", default=None)
    p.add_argument("--csv", dest="csv_out", default=None)
    p.set_defaults(func=cmd_sde_convergence)

    # price
    price = groups.add_parser("price", help="Monte-Carlo vs closed-form call")
    price_sub = price.add_subparsers(dest="command", required=True)
    p = price_sub.add_parser("call", help="CSV of n, estimate, rho")
    _add_source(p, default="torus")
    p.add_argument("--s", type=float, default=100.0)
    p.add_argument("--k", type=float, default=100.0)
    p.add_argument("--r", type=float, default=0.04)
    p.add_argument("--sigma", type=float, default=0.2)
    p.add_argument("--tau", type=float, default=0.5)
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--step", type=int, default=100, help="checkpoint spacing")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_price_call)

    # calib
    calib = groups.add_parser("calib", help="Vasicek calibration")
    calib_sub = calib.add_subparsers(dest="command", required=True)
    p = calib_sub.add_parser("adhoc", help="least squares on a zero-coupon curve")
    p.add_argument("--curve", required=True, help="CSV: maturity_years,zero_rate")
    p.add_argument("--objective", choices=["prices", "rates"], default="prices")
    p.add_argument("--fix", action="append", metavar="NAME=VALUE")
    p.add_argument("--r0", type=float, default=None, help="default: shortest-maturity rate")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_calib_adhoc)

    p = calib_sub.add_parser("indirect", help="indirect inference on a rate series")
    p.add_argument("--series", required=True, help="CSV, first column = rates")
    p.add_argument("--delta", type=float, default=1 / 12)
    p.add_argument("--model", choices=["vasicek", "cir"], default="vasicek")
    p.add_argument("--aux", choices=["euler", "milstein"], default="euler")
    p.add_argument("--H", type=int, default=10)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--substeps", type=int, default=10)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_calib_indirect)

    p = calib_sub.add_parser("ar1", help="AR(1) maximum likelihood on a rate series")
    p.add_argument("--series", required=True)
    p.add_argument("--delta", type=float, default=1 / 12)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_calib_ar1)

    # recipes
    sim = groups.add_parser("sim", help="figure / table reproduction recipes")
    sim.add_argument("recipe", choices=sorted(RECIPES))
    sim.add_argument("-n", "--n", dest="n", type=int, default=None, help="paths or draws")
    sim.add_argument("--seed", type=int, default=None)
    sim.add_argument("--prime", type=int, default=None)
    sim.add_argument("--delta", type=float, default=None)
    sim.add_argument("--out", default=None)
    sim.set_defaults(func=cmd_sim)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except InputFormatError as exc:
        print(f"trajsim: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"trajsim: I/O error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, CalibrationError, TorusPrecisionError, ZeroDivisionError) as exc:
        print(f"trajsim: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
