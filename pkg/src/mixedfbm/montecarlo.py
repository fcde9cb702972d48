"""
Replication harness: estimator tables, CLT and almost-sure rate checks, and
classifier validation.

Every replication is a pure function of ``(params, n, seed, replication)``
(see :mod:`mixedfbm.fgn` for the stream rule), so work is spread over a
process pool and folded back in replication order.  Results do not depend on
the number of workers.  The same replication indices are used for every
``H`` in a grid (common random numbers).
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence, TextIO

import numpy as np
from scipy import stats

from . import estimators as est
from .asymptotics import clt_variance
from .errors import MixedModelError, ParameterError, RegimeError
from .fgn import ModelParams, sample_mixed_path
from .variation import (
    MixedVariationSpec,
    centered_sum,
    dyadic_difference,
    power_variation_ladder,
)

WORKERS_ENV = "MIXEDFBM_WORKERS"


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def parallel_map(func: Callable, tasks: Sequence, workers: int = 1) -> list:
    """Ordered map over ``tasks``, in-process for ``workers <= 1``."""
    if workers <= 1 or len(tasks) <= 1:
        return [func(t) for t in tasks]
    chunk = max(1, len(tasks) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, tasks, chunksize=chunk))


# --------------------------------------------------------------------------
# statistics evaluated per replication


H_STATS = {
    "hat_H", "tilde_H", "tilde_H2", "hat_H2", "hat_H4", "tilde_H4",
    "bar_H2", "bar_H4", "hat_H_a", "tilde_H_b", "hat_H_ab",
}
SCALE_STATS = {"tilde_a": "a", "hat_a": "a", "tilde_b": "b", "hat_b": "b"}


@dataclass(frozen=True)
class StatSpec:
    """One table row: an estimator id and its level (``None`` for regressions)."""

    name: str
    k: int | None = None

    @classmethod
    def parse(cls, text: str) -> "StatSpec":
        name, _, k = text.partition("@")
        if name not in H_STATS and name not in SCALE_STATS:
            raise ParameterError(f"unknown statistic {name!r}")
        if name.startswith("bar_"):
            if k:
                raise ParameterError(f"{name} takes no level; use the window options")
            return cls(name)
        if not k:
            raise ParameterError(f"statistic {name!r} needs a level, e.g. {name}@19")
        return cls(name, int(k))

    @property
    def label(self) -> str:
        return self.name if self.k is None else f"{self.name}@{self.k}"

    @property
    def target(self) -> str:
        return SCALE_STATS.get(self.name, "H")

    @property
    def quartic(self) -> bool:
        return self.name in ("hat_H4", "tilde_H4", "bar_H4")


def _evaluate(stat: StatSpec, quad, quart, params: ModelParams, cfg: "ExperimentConfig"):
    k = stat.k
    name = stat.name
    if name == "hat_H":
        return est.hat_H(quad, k)
    if name == "tilde_H":
        return est.tilde_H(quad, k)
    if name == "tilde_H2":
        return est.tilde_H2(quad, k)
    if name == "hat_H2":
        return est.hat_H2(quad, k)
    if name in ("hat_H4", "tilde_H4"):
        hat, tilde = est.quartic_estimators(quart, k)
        return hat if name == "hat_H4" else tilde
    if name == "bar_H2":
        return est.regression_H(quad, cfg.bar2_starts, cfg.bar_top)
    if name == "bar_H4":
        return est.regression_H(quart, cfg.bar4_starts, cfg.bar_top)
    if name == "hat_H_a":
        return est.hat_H_a(quad, k, params.a)
    if name == "tilde_H_b":
        return est.tilde_H_b(quad, k, params.b)
    if name == "hat_H_ab":
        return est.hat_H_ab(quad, k, params.a, params.b)
    if name == "tilde_a":
        return est.scale_estimators_low(quad, k, tilde_h2=0.0)[0]
    if name == "tilde_b":
        return est.scale_estimators_low(quad, k)[1]
    if name == "hat_a":
        return est.hat_a2(quad, k)
    if name == "hat_b":
        return est.hat_b2(quad, k)
    raise ParameterError(f"unknown statistic {name!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    params: tuple[ModelParams, ...]
    n: int = 2**20
    replications: int = 10
    seed: int = 0
    estimators: tuple[str, ...] = ()
    workers: int = 1
    replication_offset: int = 0
    bar2_starts: tuple[int, ...] = (11, 12, 13, 14, 15)
    bar4_starts: tuple[int, ...] = (11, 12, 13, 14, 15, 16)
    bar_top: int = 19
    keep_values: bool = False

    def __post_init__(self):
        if self.replications < 1:
            raise ParameterError("replications must be >= 1")
        if self.n < 2 or self.n & (self.n - 1):
            raise ParameterError(f"n must be a power of two, got {self.n}")
        for s in self.estimators:
            StatSpec.parse(s)

    def to_dict(self) -> dict:
        return {
            "params": [{"H": p.H, "a": p.a, "b": p.b, "T": p.T} for p in self.params],
            "n": self.n,
            "replications": self.replications,
            "seed": self.seed,
            "estimators": list(self.estimators),
            "replication_offset": self.replication_offset,
            "bar2_starts": list(self.bar2_starts),
            "bar4_starts": list(self.bar4_starts),
            "bar_top": self.bar_top,
        }


def _replicate(task):
    cfg, index, rep = task
    params = cfg.params[index]
    mixed, _, _ = sample_mixed_path(params, cfg.n, cfg.seed, rep)
    specs = [StatSpec.parse(s) for s in cfg.estimators]
    quad = power_variation_ladder(mixed, "quadratic")
    quart = power_variation_ladder(mixed, "quartic") if any(s.quartic for s in specs) else None
    out = []
    for spec in specs:
        try:
            rec = _evaluate(spec, quad, quart, params, cfg)
        except MixedModelError as exc:
            out.append((None, True, f"{type(exc).__name__}: {exc}"))
            continue
        value = rec.estimate
        degenerate = rec.degenerate
        if spec.target != "H":
            value = math.sqrt(value) if value > 0 else None
        out.append((value, degenerate, None))
    return out


@dataclass
class CellSummary:
    """Aggregate of one (statistic, H) cell; sums are kept so cells merge exactly."""

    statistic: str
    H: float
    truth: float
    count: int = 0
    total: float = 0.0
    abs_error_total: float = 0.0
    degenerate: int = 0
    errors: list[str] = field(default_factory=list)
    values: list[float | None] | None = None

    @property
    def mean(self) -> float:
        return self.total / self.count if self.count else float("nan")

    @property
    def mae(self) -> float:
        return self.abs_error_total / self.count if self.count else float("nan")

    def add(self, value, degenerate, error):
        if value is not None:
            self.count += 1
            self.total += value
            self.abs_error_total += abs(value - self.truth)
        self.degenerate += bool(degenerate)
        if error and error not in self.errors:
            self.errors.append(error)
        if self.values is not None:
            self.values.append(value)

    def merge(self, other: "CellSummary") -> "CellSummary":
        if (other.statistic, other.H) != (self.statistic, self.H):
            raise ParameterError("cannot merge different cells")
        values = None
        if self.values is not None and other.values is not None:
            values = self.values + other.values
        return CellSummary(
            self.statistic, self.H, self.truth,
            self.count + other.count,
            self.total + other.total,
            self.abs_error_total + other.abs_error_total,
            self.degenerate + other.degenerate,
            self.errors + [e for e in other.errors if e not in self.errors],
            values,
        )

    def to_dict(self) -> dict:
        d = {
            "statistic": self.statistic,
            "H": self.H,
            "truth": self.truth,
            "mean": self.mean,
            "mae": self.mae,
            "count": self.count,
            "degenerate": self.degenerate,
            "errors": self.errors,
        }
        if self.values is not None:
            d["values"] = self.values
        return d


@dataclass
class McSummary:
    config: ExperimentConfig
    cells: list[CellSummary]

    def cell(self, statistic: str, H: float) -> CellSummary:
        for c in self.cells:
            if c.statistic == statistic and c.H == H:
                return c
        raise KeyError((statistic, H))

    def merge(self, other: "McSummary") -> "McSummary":
        merged = [a.merge(b) for a, b in zip(self.cells, other.cells)]
        cfg = replace(
            self.config,
            replications=self.config.replications + other.config.replications,
            replication_offset=min(self.config.replication_offset, other.config.replication_offset),
        )
        return McSummary(cfg, merged)

    def to_json(self) -> str:
        return json.dumps(
            {"config": self.config.to_dict(), "cells": [c.to_dict() for c in self.cells]},
            indent=2,
            sort_keys=True,
        )

    def write_csv(self, fh: TextIO) -> None:
        """Table layout: one row per (mean|mae, statistic), one column per H."""
        hs = sorted({c.H for c in self.cells}, key=[p.H for p in self.config.params].index)
        fh.write("row," + ",".join(f"H={h:g}" for h in hs) + "\n")
        for label in dict.fromkeys(c.statistic for c in self.cells):
            for kind in ("mean", "mae"):
                vals = [getattr(self.cell(label, h), kind) for h in hs]
                fh.write(f"{kind} {label}," + ",".join(f"{v:.17g}" for v in vals) + "\n")

    def text_table(self, digits: int = 4) -> str:
        hs = [p.H for p in self.config.params]
        head = ["row"] + [f"{h:g}" for h in hs]
        rows = [head]
        for label in dict.fromkeys(c.statistic for c in self.cells):
            for kind, sym in (("mean", "mu"), ("mae", "delta")):
                rows.append([f"{sym} {label}"] + [
                    f"{getattr(self.cell(label, h), kind):.{digits}f}" for h in hs
                ])
        widths = [max(len(r[i]) for r in rows) for i in range(len(head))]
        return "\n".join("  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in rows)


def run_table(config: ExperimentConfig) -> McSummary:
    """Simulate, estimate and aggregate mean and mean absolute error per cell."""
    specs = [StatSpec.parse(s) for s in config.estimators]
    reps = range(config.replication_offset, config.replication_offset + config.replications)
    tasks = [(config, i, r) for i in range(len(config.params)) for r in reps]
    results = parallel_map(_replicate, tasks, config.workers)
    cells = []
    for i, p in enumerate(config.params):
        for j, spec in enumerate(specs):
            truth = {"H": p.H, "a": p.a, "b": p.b}[spec.target]
            cells.append(CellSummary(spec.label, p.H, truth,
                                     values=[] if config.keep_values else None))
    per_h = len(specs)
    for (_, i, _), out in zip(tasks, results):
        for j, (value, degenerate, error) in enumerate(out):
            cells[i * per_h + j].add(value, degenerate, error)
    return McSummary(config, cells)


# --------------------------------------------------------------------------
# dyadic differences and the regime classifier


def u_sequence(params: ModelParams, n: int, seed: int, replication: int,
               ks: Iterable[int] = range(10, 20)) -> list[float]:
    mixed, _, _ = sample_mixed_path(params, n, seed, replication)
    ladder = power_variation_ladder(mixed)
    return [dyadic_difference(ladder, k) for k in ks]


def _classify_task(task):
    params, n, seed, rep, window, thetas = task
    mixed, _, _ = sample_mixed_path(params, n, seed, rep)
    ladder = power_variation_ladder(mixed)
    verdict = est.classify_regime(ladder, window, *thetas)
    us = [dyadic_difference(ladder, k) for k in range(window[0], window[1] + 1)]
    return verdict.verdict, verdict.evidence, us


def classifier_validation(
    H_list: Sequence[float],
    a: float = 1.0,
    b: float = 1.0,
    T: float = 3.0,
    n: int = 2**20,
    replications: int = 10,
    seed: int = 0,
    window: tuple[int, int] = (10, 19),
    workers: int = 1,
    theta_lo: float = est.THETA_LO,
    theta_hi: float = est.THETA_HI,
) -> dict:
    """Run :func:`~mixedfbm.estimators.classify_regime` per replication.

    Returns the confusion counts per ``H`` together with the verdicts, the
    negative fractions and the raw ``U_k`` of every replication.
    """
    tasks = [(ModelParams(h, a, b, T), n, seed, r, window, (theta_lo, theta_hi))
             for h in H_list for r in range(replications)]
    results = parallel_map(_classify_task, tasks, workers)
    report = {"config": {"H": list(H_list), "a": a, "b": b, "T": T, "n": n,
                         "replications": replications, "seed": seed,
                         "window": list(window), "theta_lo": theta_lo, "theta_hi": theta_hi},
              "rows": []}
    for i, h in enumerate(H_list):
        chunk = results[i * replications:(i + 1) * replications]
        counts = {"H_below_3_4": 0, "H_above_3_4": 0, "inconclusive": 0}
        for verdict, _, _ in chunk:
            counts[verdict] += 1
        truth = "H_below_3_4" if h < 0.75 else ("H_above_3_4" if h > 0.75 else None)
        report["rows"].append({
            "H": h,
            "truth": truth,
            "counts": counts,
            "correct": counts[truth] if truth else None,
            "verdicts": [v for v, _, _ in chunk],
            "evidence": [e for _, e, _ in chunk],
            "U": [u for _, _, u in chunk],
        })
    return report


# --------------------------------------------------------------------------
# limit theorems on [0, 1]


def _unit_paths(H: float, n: int, seed: int, rep: int):
    _, fbm, wiener = sample_mixed_path(ModelParams(H, 1.0, 1.0, 1.0), n, seed, rep)
    return wiener, fbm


def _clt_task(task):
    H, p, r, n, seed, rep = task
    w, bh = _unit_paths(H, n, seed, rep)
    return centered_sum(w, bh, MixedVariationSpec(p, r), H)


_NORMALIZERS = {
    "sqrt_n": lambda n, H: n ** -0.5,
    "n_H": lambda n, H: n ** -H,
    "sqrt_n_log_n": lambda n, H: (n * math.log(n)) ** -0.5,
    "rosenblatt": lambda n, H: n ** (1 - 2 * H),
}


def clt_check(
    H: float,
    p: int,
    r: int,
    n: int = 2**14,
    replications: int = 2000,
    seed: int = 0,
    alpha: float = 0.01,
    variance_rtol: float = 0.10,
    workers: int = 1,
) -> dict:
    """Compare the normalized centered sum against its Gaussian limit.

    Reports the sample variance, the analytic limit variance, the
    Kolmogorov-Smirnov distance to ``N(0, variance)`` and the ``1 - alpha``
    critical value for the replication count.
    """
    variance, norm = clt_variance(H, p, r)
    scale = _NORMALIZERS[norm](n, H)
    tasks = [(H, p, r, n, seed, rep) for rep in range(replications)]
    sums = np.array(parallel_map(_clt_task, tasks, workers)) * scale
    sample_var = float(np.var(sums, ddof=1))
    report = {
        "H": H, "p": p, "r": r, "n": n, "replications": replications, "seed": seed,
        "normalizer": norm,
        "sample_mean": float(np.mean(sums)),
        "sample_variance": sample_var,
        "limit_variance": variance,
    }
    if variance > 0:
        ks = stats.kstest(sums, "norm", args=(0.0, math.sqrt(variance)))
        crit = float(stats.kstwo.ppf(1 - alpha, replications))
        rel = abs(sample_var - variance) / variance
        report.update({
            "relative_variance_error": rel,
            "variance_ok": rel <= variance_rtol,
            "ks_distance": float(ks.statistic),
            "ks_critical": crit,
            "ks_ok": float(ks.statistic) <= crit,
        })
    else:
        report.update({"variance_ok": sample_var <= variance_rtol,
                       "ks_distance": None, "ks_critical": None, "ks_ok": None})
    return report


def _levels_task(task):
    H, p, r, j_lo, j_hi, seed, rep = task
    w, bh = _unit_paths(H, 2**j_hi, seed, rep)
    spec = MixedVariationSpec(p, r)
    return [centered_sum(w.subsample(2**j), bh.subsample(2**j), spec, H)
            for j in range(j_lo, j_hi + 1)]


def rosenblatt_scaling_check(
    H: float, p: int, r: int, levels: tuple[int, int] = (10, 16),
    replications: int = 200, seed: int = 0, workers: int = 1,
) -> dict:
    """Variance of ``n^{1-2H} S_n`` at dyadic ``n`` for the non-Gaussian regime."""
    if not (p % 2 == 0 and r % 2 == 0 and r >= 2 and H > 0.75):
        raise RegimeError("scaling mode applies to even p, r >= 2 and H > 3/4")
    j_lo, j_hi = levels
    tasks = [(H, p, r, j_lo, j_hi, seed, rep) for rep in range(replications)]
    sums = np.array(parallel_map(_levels_task, tasks, workers))
    js = np.arange(j_lo, j_hi + 1)
    scaled = sums * ((2.0 ** js) ** (1 - 2 * H))[None, :]
    variances = np.var(scaled, axis=0, ddof=1)
    return {
        "H": H, "p": p, "r": r, "levels": js.tolist(), "replications": replications,
        "variances": variances.tolist(),
        "max_min_ratio": float(variances.max() / variances.min()),
    }


def rate_check(
    H: float,
    p: int,
    r: int,
    gamma: float,
    eps: float = 0.1,
    levels: tuple[int, int] = (8, 18),
    family: int = 16,
    seed: int = 0,
    workers: int = 1,
) -> dict:
    """Growth exponent of ``|S_{2^j}|`` along dyadic refinements of one path family.

    Each of ``family`` paths on ``[0, 1]`` is simulated once at ``2^{j_max}``
    steps and subsampled.  The root mean square of ``S_{2^j}`` over the
    family is regressed (log2) on ``j``; the bound holds when the slope is at
    most ``gamma + eps``.
    """
    j_lo, j_hi = levels
    tasks = [(H, p, r, j_lo, j_hi, seed, rep) for rep in range(family)]
    sums = np.array(parallel_map(_levels_task, tasks, workers))
    rms = np.sqrt(np.mean(sums**2, axis=0))
    js = np.arange(j_lo, j_hi + 1, dtype=float)
    if np.any(rms == 0):
        return {"H": H, "p": p, "r": r, "gamma": gamma, "eps": eps,
                "slope": None, "margin": None, "ok": None, "inconclusive": True}
    slope, _ = np.polyfit(js, np.log2(rms), 1)
    margin = gamma + eps - float(slope)
    return {
        "H": H, "p": p, "r": r, "gamma": gamma, "eps": eps, "seed": seed,
        "levels": [j_lo, j_hi], "family": family,
        "slope": float(slope), "margin": margin, "ok": margin >= 0,
        "inconclusive": False,
    }


# --------------------------------------------------------------------------
# table presets (T=3, a=b=1, n=2^20, 10 replications)


def _grid(lo: float, hi: float, step: float) -> tuple[float, ...]:
    count = int(round((hi - lo) / step)) + 1
    return tuple(round(lo + i * step, 6) for i in range(count))


LOW_GRID = _grid(0.05, 0.45, 0.05)
MID_GRID = _grid(0.525, 0.725, 0.025)

PRESETS: dict[str, dict] = {
    "table1": {"H": LOW_GRID,
               "statistics": ("hat_H@20", "tilde_H@19", "tilde_H2@18", "tilde_a@19")},
    "table2": {"H": MID_GRID,
               "statistics": ("hat_H2@19", "tilde_H2@18", "bar_H2", "hat_b@20")},
    "table3": {"H": (0.7, 0.8)},
    "table4": {"H": MID_GRID,
               "statistics": ("hat_H4@19", "tilde_H4@18", "bar_H4")},
    "table5": {"H": LOW_GRID, "statistics": ("hat_H_a@20", "hat_H_ab@20")},
    "table6": {"H": _grid(0.5, 0.725, 0.025), "statistics": ("tilde_H_b@19", "hat_H_ab@20")},
}
PROTOCOL = {"T": 3.0, "a": 1.0, "b": 1.0, "n": 2**20, "replications": 10}


def preset_config(name: str, seed: int = 0, replications: int | None = None,
                  n: int | None = None, workers: int = 1,
                  H: Sequence[float] | None = None) -> ExperimentConfig:
    if name not in PRESETS or name == "table3":
        raise ParameterError(f"unknown table preset {name!r}")
    spec = PRESETS[name]
    hs = tuple(H) if H is not None else spec["H"]
    params = tuple(ModelParams(h, PROTOCOL["a"], PROTOCOL["b"], PROTOCOL["T"]) for h in hs)
    return ExperimentConfig(
        params=params,
        n=n or PROTOCOL["n"],
        replications=replications or PROTOCOL["replications"],
        seed=seed,
        estimators=spec["statistics"],
        workers=workers,
    )
