"""
Second moments of centered quadratic forms in fBm increments.

A form is a list of ``(coef, s, t)`` terms standing for
``sum coef * (B_t - B_s)^2``.  For jointly Gaussian centered ``X, Y`` Wick's
rule gives ``Cov(X^2, Y^2) = 2 E[XY]^2``, so the covariance of two forms is
``2 sum_ij c_i d_j Cov(I_i, J_j)^2`` with the fBm increment covariance

    Cov(B_t - B_s, B_v - B_u) = (|t-u|^{2H} + |s-v|^{2H} - |t-v|^{2H} - |s-u|^{2H}) / 2.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy.special import binom

Form = Sequence[tuple[float, float, float]]

# Shifts at least this multiple of the form span use the cancellation-free series.
_FAR = 16.0


def _g(H: float, x: np.ndarray) -> np.ndarray:
    return np.abs(x) ** (2 * H)


def increment_cov(H: float, s: float, t: float, u, v) -> np.ndarray:
    """``Cov(B_t - B_s, B_v - B_u)``; ``u``, ``v`` may be arrays."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    return 0.5 * (_g(H, t - u) + _g(H, s - v) - _g(H, t - v) - _g(H, s - u))


def _far_cov(H: float, s: float, t: float, u: float, v: float, m: np.ndarray) -> np.ndarray:
    # Increments [s,t] and [u+m, v+m] with m large and positive.  Writing each
    # distance as m (1 + d/m), the orders m^{2H} and m^{2H-1} cancel exactly.
    d = np.array([u - t, v - s, v - t, u - s])
    sign = np.array([1.0, 1.0, -1.0, -1.0])
    total = np.zeros_like(m)
    inv = 1.0 / m
    ratio = np.max(np.abs(d)) * inv
    for j in range(2, 80):
        total += binom(2 * H, j) * float(sign @ d**j) * inv**j
        # |binom(2H, j)| <= 1 for j >= 2, so the remainder is below 4 ratio^(j+1) / (1 - ratio)
        if np.all(4 * ratio ** (j + 1) / (1 - ratio) <= 1e-17 * np.abs(total)):
            break
    return 0.5 * m ** (2 * H) * total


def form_mean(H: float, form: Form) -> float:
    return float(sum(c * abs(t - s) ** (2 * H) for c, s, t in form))


def form_cov(H: float, f1: Form, f2: Form, shift=0.0) -> np.ndarray | float:
    """``Cov(Q1, Q2 shifted by shift)`` for quadratic forms ``Q1``, ``Q2``."""
    scalar = np.ndim(shift) == 0
    m = np.atleast_1d(np.asarray(shift, dtype=float))
    span = max(max(s, t) for _, s, t in list(f1) + list(f2)) - min(
        min(s, t) for _, s, t in list(f1) + list(f2)
    )
    far = m >= _FAR * max(span, 1.0)
    out = np.zeros_like(m)
    for c1, s, t in f1:
        for c2, u, v in f2:
            cov = np.empty_like(m)
            cov[~far] = increment_cov(H, s, t, u + m[~far], v + m[~far])
            if far.any():
                cov[far] = _far_cov(H, s, t, u, v, m[far])
            out += c1 * c2 * cov * cov
    out *= 2.0
    return float(out[0]) if scalar else out


def covariance_matrix(H: float, points: np.ndarray) -> np.ndarray:
    """fBm covariance ``(t^{2H} + s^{2H} - |t-s|^{2H}) / 2`` on ``points``."""
    t = np.asarray(points, dtype=float)
    return 0.5 * (
        _g(H, t)[:, None] + _g(H, t)[None, :] - _g(H, t[:, None] - t[None, :])
    )
