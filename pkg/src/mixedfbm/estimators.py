"""
Estimators of ``H``, ``a^2`` and ``b^2`` in the mixed model, built on
variation ladders of a single observed path.

Conventions
-----------
* ``U_k`` denotes :func:`~mixedfbm.variation.dyadic_difference` of the
  relevant ladder.
* Wherever a logarithm of a nonpositive quantity would arise, ``log2_plus``
  (which returns 0 there) is applied and the record is flagged
  ``degenerate=True``.
* ``valid_range`` lists the open H-intervals on which the estimator is
  strongly consistent.  It is advisory; estimates are computed for any input.

Known biases
------------
``hat_H`` carries a ``1/k`` bias, ``hat_H_k = H - (log2 a + H log2 T)/k + o(1/k)``
(see :func:`mixedfbm.asymptotics.hat_H_bias`); ``tilde_H`` has the geometric
bias of :func:`mixedfbm.asymptotics.tilde_H_bias` for ``H`` in (1/4, 1/2).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Literal, Sequence, TextIO

import numpy as np

from .errors import (
    InconclusiveError,
    ParameterError,
    UndefinedEstimateError,
)
from .variation import VariationLadder, dyadic_difference

Interval = tuple[float, float]

LOW = ((0.0, 0.5),)
LOW_AND_MID = ((0.0, 0.5), (0.5, 0.75))
MID = ((0.5, 0.75),)
HIGH = ((0.5, 1.0),)
BELOW_34 = ((0.0, 0.75),)

#: estimator id -> H-intervals of strong consistency
CATALOGUE: dict[str, tuple[Interval, ...]] = {
    "hat_H": LOW,
    "tilde_H": LOW,
    "tilde_H2": LOW_AND_MID,
    "hat_H2": LOW_AND_MID,
    "hat_H4": MID,
    "tilde_H4": MID,
    "bar_H2": LOW_AND_MID,
    "bar_H4": MID,
    "tilde_a2": LOW,
    "tilde_b2": ((0.25, 0.5),),
    "hat_a2": LOW_AND_MID,
    "hat_b2": HIGH,
    "hat_H_a": LOW,
    "tilde_H_b": BELOW_34,
    "hat_H_ab": BELOW_34,
}


@dataclass
class EstimateRecord:
    estimator: str
    k: int | None
    estimate: float
    sd: float | None = None
    degenerate: bool = False
    valid_range: tuple[Interval, ...] = field(default=())

    def __post_init__(self):
        if self.estimator not in CATALOGUE:
            raise ParameterError(f"unknown estimator id {self.estimator!r}")
        if not self.valid_range:
            self.valid_range = CATALOGUE[self.estimator]

    def in_range(self, H: float) -> bool:
        return any(lo < H < hi for lo, hi in self.valid_range)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["valid_range"] = [list(iv) for iv in self.valid_range]
        return d


def log2_plus(x: float) -> float:
    """``log2(x)`` for ``x > 0`` and 0 otherwise."""
    return math.log2(x) if x > 0 else 0.0


def _log2_flag(x: float) -> tuple[float, bool]:
    return log2_plus(x), not x > 0


def _ratio(num: float, den: float) -> tuple[float, bool]:
    """log2_plus of ``num/den`` plus a flag when either side is nonpositive."""
    degenerate = not (num > 0 and den > 0)
    if den == 0:
        return 0.0, True
    return log2_plus(num / den), degenerate


def _require(ladder: VariationLadder, kind: str) -> None:
    if ladder.kind != kind:
        raise ParameterError(f"expected a {kind} ladder, got {ladder.kind}")


def hat_H(ladder: VariationLadder, k: int) -> EstimateRecord:
    """``(1 - log2(V_{2^k}) / k) / 2``."""
    _require(ladder, "quadratic")
    if k < 1:
        raise ParameterError(f"k must be >= 1, got {k}")
    lg, deg = _log2_flag(ladder.value(k))
    return EstimateRecord("hat_H", k, 0.5 * (1 - lg / k), degenerate=deg)


def tilde_H(ladder: VariationLadder, k: int) -> EstimateRecord:
    """``(log2(V_{2^k} / V_{2^{k+1}}) + 1) / 2``."""
    _require(ladder, "quadratic")
    lg, deg = _ratio(ladder.value(k), ladder.value(k + 1))
    return EstimateRecord("tilde_H", k, 0.5 * (lg + 1), degenerate=deg)


def tilde_H2(ladder: VariationLadder, k: int) -> EstimateRecord:
    """``(log2+(U_k / U_{k+1}) + 1) / 2`` on quadratic dyadic differences."""
    _require(ladder, "quadratic")
    u0, u1 = dyadic_difference(ladder, k), dyadic_difference(ladder, k + 1)
    lg = log2_plus(u0 / u1) if u1 != 0 else 0.0
    return EstimateRecord("tilde_H2", k, 0.5 * (lg + 1), degenerate=not (u0 > 0 and u1 > 0))


def hat_H2(ladder: VariationLadder, k: int) -> EstimateRecord:
    """``(1 - log2+(U_k) / k) / 2``."""
    _require(ladder, "quadratic")
    if k < 1:
        raise ParameterError(f"k must be >= 1, got {k}")
    lg, deg = _log2_flag(dyadic_difference(ladder, k))
    return EstimateRecord("hat_H2", k, 0.5 * (1 - lg / k), degenerate=deg)


def quartic_estimators(ladder4: VariationLadder, k: int) -> tuple[EstimateRecord, EstimateRecord]:
    """``(hat_H4, tilde_H4)``: ``-log2+(U4_k)/(2k)`` and ``log2+(U4_k/U4_{k+1})/2``."""
    _require(ladder4, "quartic")
    if k < 1:
        raise ParameterError(f"k must be >= 1, got {k}")
    u0 = dyadic_difference(ladder4, k)
    lg0, deg0 = _log2_flag(u0)
    hat = EstimateRecord("hat_H4", k, -lg0 / (2 * k), degenerate=deg0)
    u1 = dyadic_difference(ladder4, k + 1)
    lg1 = log2_plus(u0 / u1) if u1 != 0 else 0.0
    tilde = EstimateRecord("tilde_H4", k, 0.5 * lg1, degenerate=not (u0 > 0 and u1 > 0))
    return hat, tilde


@dataclass(frozen=True)
class RegressionFit:
    start: int
    slope: float
    intercept: float
    r2: float
    degenerate: bool


def _ols(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    xc = x - x.mean()
    yc = y - y.mean()
    sxx = float(xc @ xc)
    syy = float(yc @ yc)
    slope = float(xc @ yc) / sxx
    intercept = float(y.mean() - slope * x.mean())
    if syy == 0:
        r2 = 1.0
    else:
        resid = yc - slope * xc
        r2 = 1.0 - float(resid @ resid) / syy
    return slope, intercept, r2


def regression_fits(
    ladder: VariationLadder, window_starts: Iterable[int], k_top: int
) -> list[RegressionFit]:
    """OLS of ``log2+(U_j)`` on ``j = m..k_top`` for every start ``m``.

    Windows with fewer than three levels or with every ``U_j <= 0`` are
    skipped.
    """
    fits = []
    for m in window_starts:
        js = np.arange(m, k_top + 1)
        if js.size < 3:
            continue
        us = np.array([dyadic_difference(ladder, int(j)) for j in js])
        if np.all(us <= 0):
            continue
        ys = np.array([log2_plus(u) for u in us])
        slope, intercept, r2 = _ols(js.astype(float), ys)
        fits.append(RegressionFit(int(m), slope, intercept, r2, bool(np.any(us <= 0))))
    return fits


def regression_H(
    ladder: VariationLadder, window_starts: Sequence[int], k_top: int
) -> EstimateRecord:
    """Regression estimator over the window with the largest R^2.

    Quadratic ladders give ``(1 - slope) / 2``; quartic ladders give
    ``-slope / 2``.
    """
    fits = regression_fits(ladder, window_starts, k_top)
    if not fits:
        raise InconclusiveError(
            f"no usable regression window among starts {list(window_starts)} up to k={k_top}"
        )
    best = max(fits, key=lambda f: f.r2)
    if ladder.kind == "quadratic":
        return EstimateRecord("bar_H2", k_top, 0.5 * (1 - best.slope), degenerate=best.degenerate)
    return EstimateRecord("bar_H4", k_top, -0.5 * best.slope, degenerate=best.degenerate)


def scale_estimators_low(
    ladder: VariationLadder,
    k: int,
    tilde_h: float | None = None,
    tilde_h2: float | None = None,
) -> tuple[EstimateRecord, EstimateRecord]:
    """``(tilde_a2, tilde_b2)`` for ``H`` below 1/2.

    ``tilde_a2 = 2^{k(2h-1)} T^{-2h} V_{2^k}`` with ``h = tilde_H_k`` and
    ``tilde_b2 = (c V_{2^k} - V_{2^{k+1}}) / ((c - 1) T)`` with
    ``c = 2^{1 - 2 h2}``, ``h2 = tilde_H2_k``.  Missing ``h``/``h2`` are
    computed from the ladder.  ``tilde_b2`` may come out negative; it is
    returned as is and flagged degenerate.
    """
    _require(ladder, "quadratic")
    T = ladder.T
    if tilde_h is None:
        tilde_h = tilde_H(ladder, k).estimate
    v0, v1 = ladder.value(k), ladder.value(k + 1)
    a2 = 2 ** (k * (2 * tilde_h - 1)) * T ** (-2 * tilde_h) * v0
    a_rec = EstimateRecord("tilde_a2", k, a2, degenerate=not a2 > 0)
    if tilde_h2 is None:
        tilde_h2 = tilde_H2(ladder, k).estimate
    c = 2 ** (1 - 2 * tilde_h2)
    if c == 1.0:
        raise UndefinedEstimateError("tilde_b2 is undefined when tilde_H2 = 1/2")
    b2 = (c * v0 - v1) / ((c - 1) * T)
    return a_rec, EstimateRecord("tilde_b2", k, b2, degenerate=not b2 > 0)


def hat_a2(ladder: VariationLadder, k: int, tilde_h2: float | None = None) -> EstimateRecord:
    """``2^{k(2h-1)} T^{-2h} U_k / (1 - 2^{1-2h})`` with ``h = tilde_H2_k``."""
    _require(ladder, "quadratic")
    T = ladder.T
    if tilde_h2 is None:
        tilde_h2 = tilde_H2(ladder, k).estimate
    denom = 1 - 2 ** (1 - 2 * tilde_h2)
    if denom == 0:
        raise UndefinedEstimateError("hat_a2 is undefined when tilde_H2 = 1/2")
    a2 = 2 ** (k * (2 * tilde_h2 - 1)) * T ** (-2 * tilde_h2) * dyadic_difference(ladder, k) / denom
    return EstimateRecord("hat_a2", k, a2, degenerate=not a2 > 0)


def hat_b2(ladder: VariationLadder, k: int) -> EstimateRecord:
    """``V_{2^k} / T``."""
    _require(ladder, "quadratic")
    return EstimateRecord("hat_b2", k, ladder.value(k) / ladder.T)


def scale_estimators_high(
    ladder: VariationLadder, k: int, tilde_h2: float | None = None
) -> tuple[EstimateRecord, EstimateRecord]:
    """``(hat_a2, hat_b2)``; see :func:`hat_a2` and :func:`hat_b2`."""
    return hat_a2(ladder, k, tilde_h2), hat_b2(ladder, k)


Known = Literal["a", "b", "a_and_b"]


def _known_denominator(k: int, T: float) -> float:
    d = 2 * (k - math.log2(T))
    if d == 0:
        raise UndefinedEstimateError(f"k={k} equals log2(T); estimator undefined")
    return d


def hat_H_a(ladder: VariationLadder, k: int, a: float) -> EstimateRecord:
    """``(k + 2 log2 a - log2 V_{2^k}) / (2 (k - log2 T))``."""
    _require(ladder, "quadratic")
    if not a > 0:
        raise ParameterError(f"known a must be > 0, got {a}")
    lg, deg = _log2_flag(ladder.value(k))
    est = (k + 2 * math.log2(a) - lg) / _known_denominator(k, ladder.T)
    return EstimateRecord("hat_H_a", k, est, degenerate=deg)


def tilde_H_b(ladder: VariationLadder, k: int, b: float) -> EstimateRecord:
    """``(log2+((V_{2^k} - b^2 T) / (V_{2^{k+1}} - b^2 T)) + 1) / 2``."""
    _require(ladder, "quadratic")
    if not b > 0:
        raise ParameterError(f"known b must be > 0, got {b}")
    w = b * b * ladder.T
    num, den = ladder.value(k) - w, ladder.value(k + 1) - w
    lg = log2_plus(num / den) if den != 0 else 0.0
    return EstimateRecord("tilde_H_b", k, 0.5 * (lg + 1), degenerate=not (num > 0 and den > 0))


def hat_H_ab(ladder: VariationLadder, k: int, a: float, b: float) -> EstimateRecord:
    """``(k + 2 log2 a - log2+(V_{2^k} - b^2 T)) / (2 (k - log2 T))``."""
    _require(ladder, "quadratic")
    if not (a > 0 and b > 0):
        raise ParameterError(f"known a, b must be > 0, got a={a}, b={b}")
    lg, deg = _log2_flag(ladder.value(k) - b * b * ladder.T)
    est = (k + 2 * math.log2(a) - lg) / _known_denominator(k, ladder.T)
    return EstimateRecord("hat_H_ab", k, est, degenerate=deg)


def known_coefficient_estimators(
    ladder: VariationLadder, k: int, known: Known, a: float | None = None, b: float | None = None
) -> EstimateRecord:
    """Dispatch to :func:`hat_H_a`, :func:`tilde_H_b` or :func:`hat_H_ab`."""
    if known == "a":
        if a is None:
            raise ParameterError("known='a' requires a")
        return hat_H_a(ladder, k, a)
    if known == "b":
        if b is None:
            raise ParameterError("known='b' requires b")
        return tilde_H_b(ladder, k, b)
    if known == "a_and_b":
        if a is None or b is None:
            raise ParameterError("known='a_and_b' requires a and b")
        return hat_H_ab(ladder, k, a, b)
    raise ParameterError(f"unknown known-coefficient mode {known!r}")


# Regime classifier: fraction of negative U_k over the window.
THETA_LO = 0.1
THETA_HI = 0.3
MIN_WINDOW = 6


@dataclass(frozen=True)
class RegimeVerdict:
    verdict: Literal["H_below_3_4", "H_above_3_4", "inconclusive"]
    evidence: float
    window: tuple[int, int]

    def to_dict(self) -> dict:
        return {"verdict": self.verdict, "evidence": self.evidence, "window": list(self.window)}


def classify_regime(
    ladder: VariationLadder,
    window: tuple[int, int] = (10, 19),
    theta_lo: float = THETA_LO,
    theta_hi: float = THETA_HI,
) -> RegimeVerdict:
    """Decide between ``H < 3/4`` and ``H > 3/4`` from the signs of ``U_k``.

    Meant for ``H > 1/2`` (below 1/2 the ``U_k`` are eventually negative for
    a different reason).  For ``H`` in (1/2, 3/4) the ``U_k`` are eventually
    positive, while for ``H > 3/4`` the normalized ``U_k`` behave like i.i.d.
    standard Gaussians, so about half are negative.  ``H = 3/4`` may come out
    either way or inconclusive.
    """
    _require(ladder, "quadratic")
    lo, hi = window
    if hi - lo + 1 < MIN_WINDOW:
        raise ParameterError(f"window {window} shorter than {MIN_WINDOW} levels")
    us = [dyadic_difference(ladder, k) for k in range(lo, hi + 1)]
    frac = sum(u < 0 for u in us) / len(us)
    if frac <= theta_lo:
        verdict = "H_below_3_4"
    elif frac >= theta_hi:
        verdict = "H_above_3_4"
    else:
        verdict = "inconclusive"
    return RegimeVerdict(verdict, frac, (lo, hi))


def records_to_json(records: Sequence[EstimateRecord]) -> str:
    return json.dumps([r.to_dict() for r in records], indent=2)


def write_records_csv(records: Sequence[EstimateRecord], fh: TextIO) -> None:
    fh.write("estimator,k,estimate,sd,degenerate\n")
    for r in records:
        sd = "" if r.sd is None else f"{r.sd:.17g}"
        k = "" if r.k is None else r.k
        fh.write(f"{r.estimator},{k},{r.estimate:.17g},{sd},{str(r.degenerate).lower()}\n")
