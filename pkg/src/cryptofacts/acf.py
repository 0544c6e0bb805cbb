"""Volatility autocorrelation and detection of power-law decay ranges."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .errors import DegenerateSeriesError, DomainError


def lag_grid(max_lag: int, per_decade: int = 30) -> np.ndarray:
    """Lag 0 followed by integer lags log-spaced from 1 to ``max_lag``."""
    if max_lag < 1:
        return np.array([0])
    n = int(np.floor(np.log10(max_lag) * per_decade)) + 1
    lags = np.unique(np.round(10 ** (np.arange(n) / per_decade)).astype(int))
    lags = lags[lags <= max_lag]
    if lags[-1] != max_lag:
        lags = np.append(lags, max_lag)
    return np.concatenate([[0], lags])


@dataclass
class AcfResult:
    lags: np.ndarray
    values: np.ndarray
    n: int

    @property
    def noise_level(self) -> float:
        """Half-width of the 95% band for an uncorrelated series."""
        return 1.96 / np.sqrt(self.n)

    @property
    def significance_exit(self) -> Optional[int]:
        """First lag >= 1 where C drops inside the noise band."""
        idx = np.nonzero((self.lags >= 1) & (self.values < self.noise_level))[0]
        return int(self.lags[idx[0]]) if len(idx) else None

    @property
    def zero_crossing(self) -> Optional[int]:
        idx = np.nonzero((self.lags >= 1) & (self.values <= 0))[0]
        return int(self.lags[idx[0]]) if len(idx) else None


def autocorrelation(series, max_lag: int, lags=None, per_decade: int = 30) -> AcfResult:
    """C(tau) of a series with the biased (1/N) estimator, C(0) = 1.

    The series is demeaned and divided by its variance, so passing |r|
    gives the volatility autocorrelation.  ``lags`` overrides the
    log-spaced grid.
    """
    x = np.asarray(series, dtype=float)
    n = len(x)
    if max_lag >= n:
        raise DomainError(f"max_lag {max_lag} must be below the series length {n}")
    x = x - x.mean()
    nfft = 1 << int(np.ceil(np.log2(2 * n)))
    spec = np.fft.rfft(x, nfft)
    acov = np.fft.irfft(spec.real**2 + spec.imag**2, nfft)[: max_lag + 1] / n
    if not acov[0] > 0:
        raise DegenerateSeriesError("series has zero variance")
    lags = lag_grid(max_lag, per_decade) if lags is None else np.asarray(lags, dtype=int)
    values = acov[lags] / acov[0]
    values[lags == 0] = 1.0
    return AcfResult(lags=lags, values=values, n=n)


@dataclass
class PowerLawRange:
    tau_lo: int
    tau_hi: int
    slope: float
    r2: float

    def as_tuple(self):
        return (self.tau_lo, self.tau_hi, self.slope)


def _fit(x, y):
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(resid @ resid) / ss_tot if ss_tot > 0 else 1.0
    return coef, r2


def detect_power_law_ranges(acf: AcfResult, r2_min: float = 0.98, min_decades: float = 0.5,
                            tol: float = 0.05, min_points: int = 3,
                            significant_only: bool = True) -> List[PowerLawRange]:
    """Lag ranges over which C(tau) decays as a power law.

    Segments are grown greedily in log10-log10 coordinates: a new lag joins
    the current segment while it lies within ``tol`` (log10 units) of the
    segment's fitted line and the extended fit keeps R^2 >= ``r2_min``.
    A segment is accepted when it spans at least ``min_decades``; the next
    one starts at its last lag.  Only lags with C above the noise band (or
    merely positive, with ``significant_only=False``) are considered.
    """
    floor = acf.noise_level if significant_only else 0.0
    ok = (acf.lags >= 1) & (acf.values > floor)
    # only the leading run of usable lags; beyond it C is noise
    bad = np.nonzero(~ok[acf.lags >= 1])[0]
    usable_lags = acf.lags[acf.lags >= 1]
    usable_vals = acf.values[acf.lags >= 1]
    stop = bad[0] if len(bad) else len(usable_lags)
    x = np.log10(usable_lags[:stop].astype(float))
    y = np.log10(usable_vals[:stop])
    n = len(x)
    ranges = []
    i = 0
    while i + min_points <= n:
        j = i + min_points - 1
        coef, r2 = _fit(x[i:j + 1], y[i:j + 1])
        if r2 < r2_min:
            i += 1
            continue
        while j + 1 < n:
            pred = coef[0] * x[j + 1] + coef[1]
            if abs(y[j + 1] - pred) > tol:
                break
            new_coef, new_r2 = _fit(x[i:j + 2], y[i:j + 2])
            if new_r2 < r2_min:
                break
            coef, r2 = new_coef, new_r2
            j += 1
        if x[j] - x[i] >= min_decades:
            ranges.append(PowerLawRange(int(usable_lags[i]), int(usable_lags[j]), float(coef[0]), float(r2)))
            i = j
        else:
            i += 1
    return ranges
