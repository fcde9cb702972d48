"""
Command-line entry point ``mixedfbm``.

Every command writes its primary output (to ``--out`` or stdout) and a
:class:`RunManifest` JSON next to it (``<out>.manifest.json``, or stderr when
writing to stdout).  Exit codes: 0 success, 2 parameter domain, 3 resolution,
4 I/O or file format, 5 regime / inconclusive.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import sys
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable

from . import __version__
from . import asymptotics as asy
from . import estimators as est
from . import experiments
from . import montecarlo as mc
from .errors import MixedModelError, ParameterError, ResolutionError
from .fgn import ModelParams, read_path_csv, sample_mixed_path, write_path_csv
from .variation import dyadic_difference, power_variation_ladder

EXIT_IO = 4


@dataclass
class RunManifest:
    command: str
    config: dict
    seed: int | None
    version: str = __version__
    started: str = ""
    finished: str = ""
    outputs: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _emit(args, text: str, manifest: RunManifest, extra: dict[str, str] | None = None) -> None:
    """Write ``text`` (and ``extra`` files keyed by suffix) plus the manifest."""
    manifest.finished = _now()
    if args.out is None:
        sys.stdout.write(text)
        manifest.outputs = ["<stdout>"]
        sys.stderr.write(manifest.to_json() + "\n")
        return
    out = Path(args.out)
    out.write_text(text)
    manifest.outputs = [str(out)]
    for suffix, body in (extra or {}).items():
        p = out.with_name(f"{out.stem}.{suffix}{out.suffix}")
        p.write_text(body)
        manifest.outputs.append(str(p))
    out.with_name(out.name + ".manifest.json").write_text(manifest.to_json() + "\n")


def _manifest(args, command: str) -> RunManifest:
    config = {k: v for k, v in vars(args).items() if k not in ("func", "out")}
    return RunManifest(command, config, getattr(args, "seed", None), started=_now())


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def _read_path(name: str):
    with open(name, newline="") as fh:
        return read_path_csv(fh)


# --------------------------------------------------------------------------
# commands


def cmd_simulate(args) -> None:
    m = _manifest(args, "simulate")
    params = ModelParams(args.H, args.a, args.b, args.T)
    mixed, fbm, wiener = sample_mixed_path(params, args.n, args.seed, args.replication)

    def csv_text(path):
        buf = io.StringIO()
        write_path_csv(path, buf)
        return buf.getvalue()

    extra = {"fbm": csv_text(fbm), "wiener": csv_text(wiener)} if args.components else None
    _emit(args, csv_text(mixed), m, extra)


ALL_ESTIMATORS = tuple(est.CATALOGUE)


def _estimate_one(name, quad, quart, k, args):
    if name in ("hat_H", "tilde_H", "tilde_H2", "hat_H2"):
        return [getattr(est, name)(quad, k)]
    if name in ("hat_H4", "tilde_H4"):
        hat, tilde = est.quartic_estimators(quart, k)
        return [hat if name == "hat_H4" else tilde]
    if name == "tilde_a2":
        return [est.scale_estimators_low(quad, k)[0]]
    if name == "tilde_b2":
        return [est.scale_estimators_low(quad, k)[1]]
    if name == "hat_a2":
        return [est.hat_a2(quad, k)]
    if name == "hat_b2":
        return [est.hat_b2(quad, k)]
    if name == "hat_H_a":
        return [est.hat_H_a(quad, k, _need(args.known_a, "a"))]
    if name == "tilde_H_b":
        return [est.tilde_H_b(quad, k, _need(args.known_b, "b"))]
    if name == "hat_H_ab":
        return [est.hat_H_ab(quad, k, _need(args.known_a, "a"), _need(args.known_b, "b"))]
    raise ParameterError(f"unknown estimator id {name!r}")


def _need(value, name):
    if value is None:
        raise ParameterError(f"estimator needs the known coefficient --known-{name}")
    return value


def _default_estimators(known_a, known_b) -> list[str]:
    """Every catalogue entry whose known coefficients were supplied."""
    needs = {"hat_H_a": (known_a,), "tilde_H_b": (known_b,), "hat_H_ab": (known_a, known_b)}
    return [n for n in ALL_ESTIMATORS if all(v is not None for v in needs.get(n, ()))]


def cmd_estimate(args) -> None:
    m = _manifest(args, "estimate")
    path = _read_path(args.input)
    names = args.estimators or _default_estimators(args.known_a, args.known_b)
    if args.k is not None:
        k_lo = k_hi = args.k
    else:
        k_lo, k_hi = args.k_range
    levels = int(math.log2(path.n))
    if 2**levels != path.n:
        raise ResolutionError(f"path length n={path.n} is not a power of two")
    if k_hi > levels:
        raise ResolutionError(
            f"level k={k_hi} needs a path with at least 2^{k_hi} steps, got n={path.n}"
        )
    quad = power_variation_ladder(path, "quadratic")
    quart = power_variation_ladder(path, "quartic") if any("4" in n for n in names) else None
    records = []
    for name in names:
        if name in ("bar_H2", "bar_H4"):
            ladder = quad if name == "bar_H2" else quart
            starts = args.bar2_starts if name == "bar_H2" else args.bar4_starts
            records.append(est.regression_H(ladder, starts, k_hi))
            continue
        for k in range(k_lo, k_hi + 1):
            records.extend(_estimate_one(name, quad, quart, k, args))
    out = {"records": [r.to_dict() for r in records]}
    if args.classify:
        out["regime"] = est.classify_regime(quad, tuple(args.window)).to_dict()
    _emit(args, _dumps(out), m)


def cmd_table(args) -> None:
    m = _manifest(args, "table")
    if args.preset == "table3":
        hs = args.H or mc.PRESETS["table3"]["H"]
        report = mc.classifier_validation(
            hs, n=args.n or mc.PROTOCOL["n"],
            replications=args.reps or mc.PROTOCOL["replications"],
            seed=args.seed, workers=args.workers,
        )
        if args.format == "json":
            text = _dumps(report)
        else:
            lines = ["H,replication," + ",".join(f"k={k}" for k in range(10, 20)) + ",verdict"]
            for row in report["rows"]:
                for i, (us, v) in enumerate(zip(row["U"], row["verdicts"])):
                    lines.append(f"{row['H']:g},{i}," + ",".join(
                        str(math.floor(1e4 * u)) for u in us) + f",{v}")
            text = "\n".join(lines) + "\n"
        _emit(args, text, m)
        return
    cfg = mc.preset_config(args.preset, seed=args.seed, replications=args.reps,
                           n=args.n, workers=args.workers, H=args.H)
    summary = mc.run_table(cfg)
    if args.format == "json":
        text = summary.to_json() + "\n"
    elif args.format == "text":
        text = summary.text_table() + "\n"
    else:
        buf = io.StringIO()
        summary.write_csv(buf)
        text = buf.getvalue()
    _emit(args, text, m)


def cmd_clt(args) -> None:
    m = _manifest(args, "clt")
    if args.scaling:
        report = mc.rosenblatt_scaling_check(args.H, args.p, args.r, replications=args.reps,
                                             seed=args.seed, workers=args.workers)
    else:
        report = mc.clt_check(args.H, args.p, args.r, n=args.n, replications=args.reps,
                              seed=args.seed, alpha=args.alpha, workers=args.workers)
    _emit(args, _dumps(report), m)


def cmd_rate(args) -> None:
    m = _manifest(args, "rate")
    report = mc.rate_check(args.H, args.p, args.r, args.gamma, args.eps,
                           levels=tuple(args.levels), family=args.family,
                           seed=args.seed, workers=args.workers)
    _emit(args, _dumps(report), m)


def _series(ev) -> dict:
    return {"value": ev.value, "truncation_lag": ev.truncation_lag,
            "tail_bound": ev.tail_bound, "extrapolated": ev.extrapolated}


LIMITS: dict[str, Callable] = {
    "sigma2_Hr": lambda a: _series(asy.sigma2_Hr(a.H, a.r, a.tol)),
    "sigma2_pr": lambda a: {"value": asy.sigma2_pr(a.p, a.r)},
    "sigma_prime": lambda a: _series(asy.sigma_prime_H(a.H, a.tol)),
    "sigma_double_prime": lambda a: _series(
        asy.sigma_double_prime_H(a.H, a.T, a.tol, a.a, a.b, printed=a.printed)),
    "sigma_34": lambda a: {"value": asy.sigma2_34_limit(a.r), "printed": asy.sigma_34_r(a.r)},
    "rho_prime": lambda a: {"value": float(asy.rho_prime(a.H, a.m))},
    "rho_double_prime": lambda a: {"value": float(asy.rho_double_prime(a.H, a.m))},
    "clt_variance": lambda a: dict(zip(("value", "normalizer"), asy.clt_variance(a.H, a.p, a.r))),
    "tilde_H_bias": lambda a: {"value": asy.tilde_H_bias(a.H, a.a, a.b, a.T, a.k)},
}


def cmd_limits(args) -> None:
    m = _manifest(args, "limits")
    result = LIMITS[args.quantity](args)
    result["quantity"] = args.quantity
    result["H"] = args.H
    _emit(args, _dumps(result), m)


def cmd_classify(args) -> None:
    m = _manifest(args, "classify")
    if args.input:
        path = _read_path(args.input)
        quad = power_variation_ladder(path)
        v = est.classify_regime(quad, tuple(args.window), args.theta_lo, args.theta_hi)
        out = v.to_dict()
        out["U"] = [dyadic_difference(quad, k) for k in range(args.window[0], args.window[1] + 1)]
    else:
        if not args.H:
            raise ParameterError("classify needs --input or --H values to validate")
        out = mc.classifier_validation(args.H, T=args.T, a=args.a, b=args.b,
                                       n=args.n, replications=args.reps, seed=args.seed,
                                       window=tuple(args.window), workers=args.workers,
                                       theta_lo=args.theta_lo, theta_hi=args.theta_hi)
    _emit(args, _dumps(out), m)


def cmd_experiment(args) -> None:
    m = _manifest(args, "experiment")
    kwargs = json.loads(args.config) if args.config else {}
    fn = experiments.EXPERIMENTS[args.name]
    if args.name == "sigma_high":
        kwargs.setdefault("workers", args.workers)
    _emit(args, _dumps(fn(**kwargs)), m)


# --------------------------------------------------------------------------
# parser


def _common(p, seed=0, reps=None, n=None):
    p.add_argument("--seed", type=int, default=seed, help="master seed")
    p.add_argument("--out", help="output file (default: stdout)")
    if reps is not False:
        p.add_argument("--reps", type=int, default=reps, help="replications")
    if n is not False:
        p.add_argument("--n", type=int, default=n, help="path length (power of two)")
    p.add_argument("--workers", type=int, default=mc.default_workers(),
                   help=f"worker processes (default from ${mc.WORKERS_ENV} or 1)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mixedfbm", description=__doc__.split("\n\n")[0].strip())
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a mixed path to CSV")
    p.add_argument("--H", type=float, required=True)
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--b", type=float, default=1.0)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--replication", type=int, default=0)
    p.add_argument("--components", action="store_true",
                   help="also write the fBm and Wiener components")
    _common(p, reps=False, n=2**10)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="estimate H, a^2, b^2 from a path CSV")
    p.add_argument("input")
    p.add_argument("--estimators", nargs="+", choices=ALL_ESTIMATORS)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--k", type=int)
    g.add_argument("--k-range", type=int, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--known-a", type=float)
    p.add_argument("--known-b", type=float)
    p.add_argument("--bar2-starts", type=int, nargs="+", default=[11, 12, 13, 14, 15])
    p.add_argument("--bar4-starts", type=int, nargs="+", default=[11, 12, 13, 14, 15, 16])
    p.add_argument("--classify", action="store_true", help="include the regime verdict")
    p.add_argument("--window", type=int, nargs=2, default=[10, 19])
    p.add_argument("--out")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("table", help="Monte Carlo reproduction of a table preset")
    p.add_argument("--preset", required=True, choices=sorted(mc.PRESETS))
    p.add_argument("--H", type=float, nargs="+", help="override the H grid")
    p.add_argument("--format", choices=("csv", "json", "text"), default="csv")
    _common(p)
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("clt", help="CLT check of the mixed power variation")
    p.add_argument("--H", type=float, required=True)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--alpha", type=float, default=0.01, help="KS level")
    p.add_argument("--scaling", action="store_true",
                   help="variance-scaling mode for the non-Gaussian regime")
    _common(p, reps=2000, n=2**14)
    p.set_defaults(func=cmd_clt)

    p = sub.add_parser("rate", help="almost-sure growth rate check")
    p.add_argument("--H", type=float, required=True)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--levels", type=int, nargs=2, default=[8, 18])
    p.add_argument("--family", type=int, default=16)
    _common(p, reps=False, n=False)
    p.set_defaults(func=cmd_rate)

    p = sub.add_parser("limits", help="evaluate an asymptotic constant")
    p.add_argument("--quantity", required=True, choices=sorted(LIMITS))
    p.add_argument("--H", type=float, default=0.5)
    p.add_argument("--p", type=int, default=0)
    p.add_argument("--r", type=int, default=2)
    p.add_argument("--m", type=float, default=0.0, help="lag")
    p.add_argument("--k", type=int, default=19)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--b", type=float, default=1.0)
    p.add_argument("--tol", type=float, default=asy.DEFAULT_TOL)
    p.add_argument("--printed", action="store_true",
                   help="sigma_double_prime: use the printed high-regime closed form")
    p.add_argument("--out")
    p.set_defaults(func=cmd_limits)

    p = sub.add_parser("classify", help="H < 3/4 versus H > 3/4 from the signs of U_k")
    p.add_argument("--input", help="path CSV; without it, validate on simulations at --H")
    p.add_argument("--H", type=float, nargs="+")
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--b", type=float, default=1.0)
    p.add_argument("--T", type=float, default=3.0)
    p.add_argument("--window", type=int, nargs=2, default=[10, 19])
    p.add_argument("--theta-lo", type=float, default=est.THETA_LO)
    p.add_argument("--theta-hi", type=float, default=est.THETA_HI)
    _common(p, reps=10, n=2**20)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("experiment", help="run a constant-resolution experiment")
    p.add_argument("--name", required=True, choices=sorted(experiments.EXPERIMENTS))
    p.add_argument("--config", help="JSON object of keyword overrides")
    p.add_argument("--out")
    p.add_argument("--workers", type=int, default=mc.default_workers())
    p.set_defaults(func=cmd_experiment)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except MixedModelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    return 0


if __name__ == "__main__":
    sys.exit(main())
