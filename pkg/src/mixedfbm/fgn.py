"""
Exact simulation of fractional Gaussian noise and of the mixed model
``M = a B^H + b W`` on a uniform grid of ``[0, T]``.

Fractional Gaussian noise (fGn) is sampled by circulant embedding: the
Toeplitz autocovariance of ``n`` unit-step increments is embedded into a
circulant matrix of size ``2n`` whose eigenvalues are obtained with one FFT.
For fGn this embedding is nonnegative definite for every ``H`` in (0, 1), so
the method is exact.

Random streams
--------------
Every draw is derived from a single integer master seed.  The stream used
for a given purpose is ``numpy.random.SeedSequence(seed, spawn_key=(tag,
replication))`` where ``tag`` is the integer code of the stream (see
``STREAM_TAGS``).  Replications can therefore be executed in any order or in
parallel and still reproduce bit-identical paths.
"""

from __future__ import annotations

import csv
import functools
import math
from dataclasses import dataclass
from typing import Iterable, TextIO

import numpy as np
from scipy.special import binom

from .errors import EmbeddingError, FormatError, ParameterError

#: Integer codes for the independent random streams derived from a master seed.
STREAM_TAGS = {"fgn": 0, "wiener": 1}

#: Relative tolerance for negative circulant eigenvalues that are clamped to 0.
EIGENVALUE_TOL = 1e-8

# Lags at or above this value use the series form of the second difference.
_SERIES_LAG = 16


def check_hurst(H: float) -> float:
    H = float(H)
    if not 0.0 < H < 1.0:
        raise ParameterError(f"Hurst index must lie in (0, 1), got H={H}")
    return H


@dataclass(frozen=True)
class ModelParams:
    """Parameters of the mixed model ``M_t = a B^H_t + b W_t`` on ``[0, T]``.

    Zero scales are accepted so that the pure fBm (``b=0``) and pure Wiener
    (``a=0``) paths can be produced by the same code path.
    """

    H: float
    a: float = 1.0
    b: float = 1.0
    T: float = 1.0

    def __post_init__(self):
        check_hurst(self.H)
        if not (math.isfinite(self.a) and self.a >= 0):
            raise ParameterError(f"fBm scale a must be >= 0, got a={self.a}")
        if not (math.isfinite(self.b) and self.b >= 0):
            raise ParameterError(f"Wiener scale b must be >= 0, got b={self.b}")
        if not (math.isfinite(self.T) and self.T > 0):
            raise ParameterError(f"horizon T must be > 0, got T={self.T}")


@dataclass(frozen=True)
class GridPath:
    """Values of a process on the uniform grid ``{i T / n, i = 0..n}``."""

    n: int
    T: float
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if self.n < 1:
            raise ParameterError(f"n must be >= 1, got {self.n}")
        if not self.T > 0:
            raise ParameterError(f"horizon T must be > 0, got {self.T}")
        if values.shape != (self.n + 1,):
            raise ParameterError(
                f"expected {self.n + 1} grid values, got shape {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ParameterError("grid path contains non-finite values")
        object.__setattr__(self, "values", values)

    @property
    def times(self) -> np.ndarray:
        return self.T * np.arange(self.n + 1) / self.n

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.values)

    def subsample(self, m: int) -> "GridPath":
        """Restrict the path to the coarser grid with ``m`` steps."""
        if m < 1 or self.n % m:
            raise ParameterError(f"cannot subsample n={self.n} onto {m} steps")
        return GridPath(m, self.T, self.values[:: self.n // m])

    def __add__(self, other):
        if isinstance(other, GridPath):
            if other.n != self.n or other.T != self.T:
                raise ParameterError("grid paths live on different grids")
            return GridPath(self.n, self.T, self.values + other.values)
        return NotImplemented

    def scale(self, c: float) -> "GridPath":
        return GridPath(self.n, self.T, c * self.values)


@dataclass(frozen=True)
class CirculantSpectrum:
    """Eigenvalues of the size-``2n`` circulant embedding of the fGn covariance.

    ``eigenvalues[j]`` is the DFT of the first row
    ``(rho(0), rho(1), ..., rho(n), rho(n-1), ..., rho(1))`` after clamping
    round-off negatives to zero.  ``eigenvalues[0]`` is the sum of that row.
    """

    H: float
    n: int
    eigenvalues: np.ndarray


def _second_difference_series(H: float, u: np.ndarray) -> np.ndarray:
    # (1+u)^{2H} + (1-u)^{2H} - 2 = 2 * sum_{j>=1} binom(2H, 2j) u^{2j}, |u| < 1
    u2 = u * u
    total = np.zeros_like(u)
    power = np.ones_like(u)
    for j in range(1, 40):
        power = power * u2
        term = binom(2 * H, 2 * j) * power
        total += term
        if np.all(np.abs(term) <= 1e-18 * np.abs(total)):
            break
    return 2.0 * total


def fgn_autocovariance(H: float, m) -> np.ndarray | float:
    """Autocovariance of unit-step fGn,
    ``rho_H(m) = (|m+1|^{2H} + |m-1|^{2H}) / 2 - |m|^{2H}``.

    Accepts scalars or arrays of (real) lags.  Large lags are evaluated with
    a cancellation-free series so that the tail of lag sums stays accurate.
    """
    H = check_hurst(H)
    scalar = np.ndim(m) == 0
    x = np.abs(np.asarray(m, dtype=float))
    out = np.empty_like(x)
    small = x < _SERIES_LAG
    xs = x[small]
    out[small] = (
        0.5 * (np.abs(xs + 1) ** (2 * H) + np.abs(xs - 1) ** (2 * H)) - xs ** (2 * H)
    )
    xl = x[~small]
    if xl.size:
        out[~small] = 0.5 * xl ** (2 * H) * _second_difference_series(H, 1.0 / xl)
    return float(out) if scalar else out


def build_spectrum(H: float, n: int) -> CirculantSpectrum:
    """Circulant-embedding eigenvalues for ``n`` unit-step fGn values.

    Raises
    ------
    EmbeddingError
        If some eigenvalue is below ``-EIGENVALUE_TOL * max(eigenvalues)``.
    """
    H = check_hurst(H)
    n = int(n)
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    rho = fgn_autocovariance(H, np.arange(n + 1))
    row = np.concatenate([rho, rho[-2:0:-1]])
    lam = np.fft.fft(row).real
    top = lam.max()
    worst = lam.min()
    if worst < -EIGENVALUE_TOL * top:
        raise EmbeddingError(
            f"circulant embedding not nonnegative for H={H}, n={n}: "
            f"min eigenvalue {worst:.3e}"
        )
    lam = np.where(lam < 0, 0.0, lam)
    lam.setflags(write=False)
    return CirculantSpectrum(H, n, lam)


@functools.lru_cache(maxsize=8)
def cached_spectrum(H: float, n: int) -> CirculantSpectrum:
    """``build_spectrum`` memoized per ``(H, n)``; the arrays are read-only."""
    return build_spectrum(H, n)


def stream(seed, tag: str, replication: int = 0) -> np.random.Generator:
    """Independent generator for ``(seed, tag, replication)``."""
    if tag not in STREAM_TAGS:
        raise ParameterError(f"unknown stream tag {tag!r}")
    ss = np.random.SeedSequence(int(seed), spawn_key=(STREAM_TAGS[tag], int(replication)))
    return np.random.Generator(np.random.PCG64(ss))


def sample_fgn(spectrum: CirculantSpectrum, seed, size: int | None = None) -> np.ndarray:
    """Draw stationary standard fGn with unit time step.

    Parameters
    ----------
    spectrum : CirculantSpectrum
        Output of :func:`build_spectrum`.
    seed : int, SeedSequence or Generator
        Anything accepted by ``numpy.random.default_rng``.
    size : int, optional
        Number of independent draws; when given the result has shape
        ``(size, n)``.

    Returns
    -------
    numpy.ndarray
        One draw (shape ``(n,)``) or ``size`` draws.
    """
    rng = np.random.default_rng(seed)
    lam = spectrum.eigenvalues
    big_n = lam.size
    shape = (big_n,) if size is None else (int(size), big_n)
    z = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    x = np.fft.fft(np.sqrt(lam / big_n) * z, axis=-1)
    return np.ascontiguousarray(x[..., : spectrum.n].real)


def _cumulative(increments: np.ndarray) -> np.ndarray:
    out = np.empty(increments.size + 1)
    out[0] = 0.0
    np.cumsum(increments, out=out[1:])
    return out


def sample_mixed_path(params: ModelParams, n: int, seed, replication: int = 0):
    """Simulate ``(mixed, fbm, wiener)`` on ``n`` steps of ``[0, T]``.

    The fBm is the cumulative sum of unit-step fGn scaled by ``(T/n)^H``;
    the Wiener path uses independent ``N(0, T/n)`` increments from a second
    stream.  ``mixed = a * fbm + b * wiener`` pointwise.
    """
    n = int(n)
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    dt = params.T / n
    noise = sample_fgn(cached_spectrum(params.H, n), stream(seed, "fgn", replication))
    fbm = _cumulative(dt ** params.H * noise)
    dw = stream(seed, "wiener", replication).standard_normal(n) * math.sqrt(dt)
    wiener = _cumulative(dw)
    mixed = params.a * fbm + params.b * wiener
    return (
        GridPath(n, params.T, mixed),
        GridPath(n, params.T, fbm),
        GridPath(n, params.T, wiener),
    )


def write_path_csv(path: GridPath, fh: TextIO) -> None:
    """Write ``index,t,value`` rows with 17 significant digits."""
    fh.write("index,t,value\n")
    for i, (t, v) in enumerate(zip(path.times, path.values)):
        fh.write(f"{i},{t:.17g},{v:.17g}\n")


def read_path_csv(lines: Iterable[str]) -> GridPath:
    """Parse the ``index,t,value`` format back into a :class:`GridPath`."""
    reader = csv.reader(lines)
    try:
        header = next(reader)
    except StopIteration:
        raise FormatError("empty path file", line=1) from None
    if [h.strip() for h in header] != ["index", "t", "value"]:
        raise FormatError(f"expected header 'index,t,value', got {','.join(header)!r}", line=1)
    times, values = [], []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 3:
            raise FormatError(f"expected 3 fields, got {len(row)}", line=lineno)
        try:
            i, t, v = int(row[0]), float(row[1]), float(row[2])
        except ValueError as exc:
            raise FormatError(str(exc), line=lineno) from None
        if i != len(values):
            raise FormatError(f"index {i} out of sequence", line=lineno)
        if not (math.isfinite(t) and math.isfinite(v)):
            raise FormatError("non-finite value", line=lineno)
        times.append(t)
        values.append(v)
    if len(values) < 2:
        raise FormatError("a path needs at least two grid points")
    n = len(values) - 1
    T = times[-1]
    if times[0] != 0.0 or not T > 0:
        raise FormatError("grid must start at t=0 and end at T>0")
    expected = T * np.arange(n + 1) / n
    if not np.allclose(times, expected, rtol=1e-9, atol=1e-12 * T):
        raise FormatError("grid is not uniform")
    return GridPath(n, T, np.array(values))
