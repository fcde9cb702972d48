"""
Limit variances and bias constants for mixed power variations and for the
Hurst estimators.

Lag series (``sum_m rho_H(m)^q``, ``sum_m rho'_m``, ``sum_m rho''_m``) are
summed directly up to a lag ``M`` and the remainder is replaced by
``int_{M+1/2}^inf f(x) dx`` (midpoint rule on unit cells).  Beyond ``M`` the
summands are smooth with a second derivative of constant sign, so the
remaining error is bounded by ``|f'(M + 1/2)| / 24``; twice that estimate is
reported as ``tail_bound``.  ``M`` is doubled until ``tail_bound <= tol``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate

from .errors import ParameterError, RegimeError
from .fgn import check_hurst, fgn_autocovariance
from .variation import gaussian_moment
from .wick import form_cov, form_mean

LN2 = math.log(2.0)
DEFAULT_TOL = 1e-10
_M0 = 256
_M_MAX = 2**22
_LOG_SPAN = 120.0


@dataclass(frozen=True)
class SeriesEvaluation:
    value: float
    truncation_lag: int
    tail_bound: float
    extrapolated: bool = False

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "truncation_lag": self.truncation_lag,
            "tail_bound": self.tail_bound,
            "extrapolated": self.extrapolated,
        }


def hermite_moment(m: int) -> float:
    """``mu_m = E[N(0,1)^m]``: ``(m-1)!!`` for even ``m``, 0 for odd ``m``."""
    return gaussian_moment(m)


def double_factorial(m: int) -> int:
    return math.prod(range(m, 0, -2)) if m > 0 else 1


def sigma2_pr(p: int, r: int) -> float:
    """``mu_{2r} (mu_{2p} - mu_p^2)``."""
    return hermite_moment(2 * r) * (hermite_moment(2 * p) - hermite_moment(p) ** 2)


def _tail_sum(f: Callable[[np.ndarray], np.ndarray], tol: float) -> tuple[float, int, float]:
    """``sum_{m>=1} f(m)`` with midpoint-integral tail; returns (value, M, bound)."""
    M = _M0
    while True:
        head = float(np.sum(f(np.arange(1, M + 1, dtype=float))))
        edge = f(np.array([M, M + 1], dtype=float))
        bound = 2.0 * abs(edge[0] - edge[1]) / 24.0
        # x = (M + 1/2) e^y turns algebraic decay into exponential decay; past
        # x = a e^Y the summand is a pure power x^{-p} and is integrated exactly
        a = M + 0.5
        tail, qerr = integrate.quad(
            lambda y: a * math.exp(y) * float(f(np.array([a * math.exp(y)]))[0]),
            0.0, _LOG_SPAN, limit=400, epsabs=tol / 10, epsrel=1e-10,
        )
        X = a * math.exp(_LOG_SPAN)
        fx, fh = (float(v) for v in f(np.array([X, X / 2])))
        if fx != 0.0:
            p = math.log2(fh / fx)
            tail += fx * X / (p - 1)
        bound += qerr
        if bound <= tol or M >= _M_MAX:
            return head + tail, M, bound
        M *= 2


@functools.lru_cache(maxsize=256)
def rho_power_sum(H: float, q: int, tol: float = DEFAULT_TOL) -> SeriesEvaluation:
    """``sum_{m in Z} rho_H(m)^q``.

    ``q = 1`` is exact: 0 for ``H < 1/2`` (the sum telescopes), 1 at
    ``H = 1/2``; it diverges for ``H > 1/2``.  For ``q >= 2`` the series
    converges iff ``q (2 - 2H) > 1``.
    """
    H = check_hurst(H)
    if q < 1:
        raise ParameterError(f"power must be >= 1, got {q}")
    if q == 1:
        if H > 0.5:
            raise RegimeError(f"sum of rho_H(m) diverges for H={H} > 1/2")
        return SeriesEvaluation(1.0 if H == 0.5 else 0.0, 0, 0.0)
    if q * (2 - 2 * H) <= 1:
        raise RegimeError(f"sum of rho_H(m)^{q} diverges for H={H}")
    if H == 0.5:
        return SeriesEvaluation(1.0, 0, 0.0)
    value, M, bound = _tail_sum(lambda m: fgn_autocovariance(H, m) ** q, tol / 2)
    return SeriesEvaluation(1.0 + 2.0 * value, M, 2.0 * bound)


def hermite_coefficient(r: int, q: int) -> float:
    """Coefficient of ``H_q`` in the Hermite expansion of ``x^r``: ``r! / (q! (r-q)!!)``."""
    if q > r or (r - q) % 2:
        return 0.0
    return math.factorial(r) / (math.factorial(q) * double_factorial(r - q))


def sigma2_Hr(H: float, r: int, tol: float = DEFAULT_TOL) -> SeriesEvaluation:
    """Limit variance of ``n^{-1/2} sum_i (zeta_i^r - mu_r)`` for unit-step fGn ``zeta``.

    Equals ``sum_{q>=1} (r!)^2 / (q! ((r-q)!!)^2) * sum_m rho_H(m)^q`` over
    ``q`` of the parity of ``r``.  Even ``r`` needs ``H < 3/4``; odd ``r``
    needs ``H <= 1/2`` (the ``q = 1`` term is 0 below 1/2, so ``r = 1`` gives 0).
    """
    H = check_hurst(H)
    r = int(r)
    if r < 0:
        raise ParameterError(f"r must be >= 0, got {r}")
    if r % 2 == 0 and r > 0 and H >= 0.75:
        raise RegimeError(f"sigma2_Hr diverges for even r and H={H} >= 3/4")
    if r % 2 == 1 and H > 0.5:
        raise RegimeError(f"odd r has no n^(-1/2) Gaussian limit for H={H} > 1/2")
    qs = range(2 - r % 2, r + 1, 2)
    coefs = {q: hermite_coefficient(r, q) ** 2 * math.factorial(q) for q in qs}
    value, lag, bound = 0.0, 0, 0.0
    for q, coef in coefs.items():
        s = rho_power_sum(H, q, tol / sum(coefs.values()))
        value += coef * s.value
        lag = max(lag, s.truncation_lag)
        bound += coef * s.tail_bound
    return SeriesEvaluation(value, lag, bound)


def sigma_34_r(r: int) -> float:
    """The constant ``3 r (r - 1) / 4`` as printed for the ``H = 3/4`` limit.

    Monte Carlo shows this is neither the limit standard deviation nor the
    variance; :func:`sigma2_34_limit` gives the variance actually observed.
    """
    if r < 0 or r % 2:
        raise ParameterError(f"r must be even and >= 0, got {r}")
    return 3 * r * (r - 1) / 4


def sigma2_34_limit(r: int) -> float:
    """Limit variance of ``(n log n)^{-1/2} sum_i (zeta_i^r - mu_r)`` at ``H = 3/4``.

    Only the second Hermite component survives: ``2 c_2^2 * 2 (H(2H-1))^2``
    with ``c_2 = r! / (2 (r-2)!!)`` and natural logarithm, i.e.
    ``(9/16) c_2^2``.
    """
    if r < 2 or r % 2:
        raise ParameterError(f"r must be even and >= 2, got {r}")
    c2 = hermite_coefficient(r, 2)
    return 9.0 / 16.0 * c2 * c2


def finite_n_variance_fbm_power(H: float, r: int, n: int) -> float:
    """Exact ``Var(sum_{i<n} (zeta_i^r - mu_r))`` for unit-step fGn.

    Uses ``Cov(zeta_0^r, zeta_m^r) = sum_q c_q^2 q! rho(m)^q``.
    """
    H = check_hurst(H)
    lags = np.arange(1, n, dtype=float)
    rho = fgn_autocovariance(H, lags)
    weights = (n - lags)
    total = 0.0
    for q in range(1, r + 1):
        coef = hermite_coefficient(r, q) ** 2 * math.factorial(q)
        if coef == 0:
            continue
        total += coef * (n + 2.0 * float(np.sum(weights * rho**q)))
    return total


# Quadratic forms on one unit block; c = 2^{2H-1}.
def _eta_prime(H: float):
    c = 2 ** (2 * H - 1)
    return [(1.0, 0.0, 1.0), (-c, 0.0, 0.5), (-c, 0.5, 1.0)]


def _eta_double_prime(H: float):
    c = 2 ** (2 * H - 1)
    return [
        (1.0, 0.0, 1.0),
        (-(c + 1), 0.0, 0.5),
        (-(c + 1), 0.5, 1.0),
        (c, 0.0, 0.25),
        (c, 0.25, 0.5),
        (c, 0.5, 0.75),
        (c, 0.75, 1.0),
    ]


def eta_prime_form(H: float):
    """Block form ``B_1^2 - c B_{1/2}^2 - c (B_1 - B_{1/2})^2``."""
    return _eta_prime(check_hurst(H))


def eta_double_prime_form(H: float):
    """Block form of full, half and quarter squared increments, weights ``1, -(c+1), c``."""
    return _eta_double_prime(check_hurst(H))


def rho_prime(H: float, m):
    """``E[eta'_0 eta'_m]`` for the unit-block form :func:`eta_prime_form`."""
    form = eta_prime_form(H)
    return form_cov(H, form, form, m)


def rho_double_prime(H: float, m):
    """``E[eta''_0 eta''_m]`` for the unit-block form :func:`eta_double_prime_form`."""
    form = eta_double_prime_form(H)
    return form_cov(H, form, form, m)


@functools.lru_cache(maxsize=256)
def _long_run(H: float, which: str, tol: float) -> SeriesEvaluation:
    f = rho_prime if which == "prime" else rho_double_prime
    if H == 0.5:
        return SeriesEvaluation(float(f(H, 0.0)), 0, 0.0)
    value, M, bound = _tail_sum(lambda m: np.asarray(f(H, m)), tol / 2)
    return SeriesEvaluation(float(f(H, 0.0)) + 2.0 * value, M, 2.0 * bound)


def long_run_variance_prime(H: float, tol: float = DEFAULT_TOL) -> SeriesEvaluation:
    """``rho'_0 + 2 sum_{m>=1} rho'_m``."""
    return _long_run(check_hurst(H), "prime", tol)


def long_run_variance_double_prime(H: float, tol: float = DEFAULT_TOL) -> SeriesEvaluation:
    """``rho''_0 + 2 sum_{m>=1} rho''_m``."""
    return _long_run(check_hurst(H), "double_prime", tol)


def sigma_prime_H(H: float, tol: float = DEFAULT_TOL) -> SeriesEvaluation:
    """Asymptotic sd of ``2^{k/2} (tilde_H_k - H)``, proven for ``H`` in (0, 1/4).

    Evaluates on (0, 1/2]; outside (0, 1/4) the record is marked extrapolated.
    """
    H = check_hurst(H)
    if H > 0.5:
        raise RegimeError(f"sigma'_H is only defined for H <= 1/2, got {H}")
    lr = long_run_variance_prime(H, tol)
    if lr.value < 0:
        raise ArithmeticError(f"negative long-run variance {lr.value} for H={H}")
    scale = 1.0 / (2 * LN2)
    return SeriesEvaluation(
        scale * math.sqrt(lr.value),
        lr.truncation_lag,
        scale * lr.tail_bound / (2 * math.sqrt(lr.value)) if lr.value else lr.tail_bound,
        extrapolated=not H < 0.25,
    )


def sigma_double_prime_H(
    H: float,
    T: float = 1.0,
    tol: float = DEFAULT_TOL,
    a: float = 1.0,
    b: float = 1.0,
    printed: bool = False,
) -> SeriesEvaluation:
    """Asymptotic sd of the normalized ``tilde_H2_k - H``.

    * ``H < 1/2``: normalizer ``2^{k/2}``; sd is
      ``sqrt(rho''_0 + 2 sum rho''_m) / ((2^{2-2H} - 2) ln 2)``.
    * ``1/2 < H < 3/4``: normalizer ``2^{k(3/2-2H)}``; the variance is
      ``b^4 T^{2-4H} (2^{4H-3} + 1) / (a^4 (2 - 2^{2-2H})^2 ln^2 2)``
      (re-derived; ``printed=True`` returns the square root of
      :func:`sigma2_double_prime_high_printed` instead).
    """
    H = check_hurst(H)
    if H == 0.5:
        raise ParameterError("sigma''_H has a pole at H = 1/2")
    if H < 0.5:
        lr = long_run_variance_double_prime(H, tol)
        if lr.value < 0:
            raise ArithmeticError(f"negative long-run variance {lr.value} for H={H}")
        scale = 1.0 / ((2 ** (2 - 2 * H) - 2) * LN2)
        return SeriesEvaluation(
            scale * math.sqrt(lr.value),
            lr.truncation_lag,
            scale * lr.tail_bound / (2 * math.sqrt(lr.value)) if lr.value else lr.tail_bound,
        )
    if H >= 0.75:
        raise RegimeError(f"tilde_H2 is not asymptotically normal for H={H} >= 3/4")
    if printed:
        return SeriesEvaluation(math.sqrt(sigma2_double_prime_high_printed(H, T)), 0, 0.0)
    return SeriesEvaluation(math.sqrt(sigma2_double_prime_high(H, T, a, b)), 0, 0.0)


def sigma2_double_prime_high(H: float, T: float = 1.0, a: float = 1.0, b: float = 1.0) -> float:
    """Re-derived limit variance of ``2^{k(3/2-2H)} (tilde_H2_k - H)`` on (1/2, 3/4)."""
    denom = (2 - 2 ** (2 - 2 * H)) ** 2 * LN2**2
    return b**4 * T ** (2 - 4 * H) * (2 ** (4 * H - 3) + 1) / (a**4 * denom)


def sigma2_double_prime_high_printed(H: float, T: float) -> float:
    """The closed form ``(2^{4H-1}+1) T^{1-2H} / ((2 - 2^{2-2H}) ln 2)`` as printed."""
    return (2 ** (4 * H - 1) + 1) * T ** (1 - 2 * H) / ((2 - 2 ** (2 - 2 * H)) * LN2)


def wiener_block_variance(H: float, T: float, k: int) -> float:
    """Exact ``Var(P_k)`` for the Wiener part of ``U_k - 2^{2H-1} U_{k+1}``.

    Each of the ``2^k`` independent blocks of length ``tau = T 2^{-k}``
    contributes ``tau^2 (2^{4H-3} + 1)``.
    """
    tau = T * 2.0**-k
    return 2**k * tau * tau * (2 ** (4 * H - 3) + 1)


def wiener_block_variance_printed(H: float, T: float, k: int) -> float:
    """Same quantity with the printed per-block value ``T 2^{-2k} (2^{4H-1} + 1)``."""
    return 2**k * T * 2.0 ** (-2 * k) * (2 ** (4 * H - 1) + 1)


def tilde_H_bias(H: float, a: float, b: float, T: float, k: int) -> float:
    """Leading deterministic bias of ``tilde_H_k`` for ``H`` in (1/4, 1/2).

    ``(1 - 2^{2H-1}) b^2 T^{1-2H} 2^{k(2H-1)} / (2 a^2 ln 2)``, obtained by
    expanding ``log2`` of the ratio of expected variations to first order.
    """
    H = check_hurst(H)
    x = (b / a) ** 2 * T ** (1 - 2 * H) * 2.0 ** (k * (2 * H - 1))
    return (1 - 2 ** (2 * H - 1)) * x / (2 * LN2)


def hat_H_bias(H: float, a: float, T: float, k: int) -> float:
    """Leading ``1/k`` bias of ``hat_H_k``: ``-(log2 a + H log2 T) / k``."""
    return -(math.log2(a) + H * math.log2(T)) / k


def form_means(H: float) -> tuple[float, float]:
    """Expectations of the two unit-block forms (both vanish identically)."""
    return form_mean(H, eta_prime_form(H)), form_mean(H, eta_double_prime_form(H))


def clt_variance(H: float, p: int, r: int) -> tuple[float, str]:
    """Limit variance and normalizer name for ``S_n^{H,p,r}``.

    Returns ``(variance, normalizer)`` with normalizer one of ``"sqrt_n"``,
    ``"n_H"`` (``n^{-H}``), ``"sqrt_n_log_n"``.  Raises :class:`RegimeError`
    in the non-Gaussian regime (``p``, ``r`` even, ``r >= 2``, ``H > 3/4``).
    """
    H = check_hurst(H)
    mu_p = hermite_moment(p)
    if r == 0:
        return hermite_moment(2 * p) - mu_p**2, "sqrt_n"
    if p % 2 == 1:
        return hermite_moment(2 * p) * hermite_moment(2 * r), "sqrt_n"
    if r % 2 == 0:
        if H < 0.75:
            return sigma2_Hr(H, r).value * mu_p**2 + sigma2_pr(p, r), "sqrt_n"
        if H == 0.75:
            return sigma2_34_limit(r) * mu_p**2, "sqrt_n_log_n"
        raise RegimeError(
            f"p={p}, r={r} even with H={H} > 3/4: Rosenblatt limit, no Gaussian check"
        )
    if H <= 0.5:
        return sigma2_Hr(H, r).value * mu_p**2 + sigma2_pr(p, r), "sqrt_n"
    return mu_p**2 * hermite_moment(r + 1) ** 2, "n_H"
