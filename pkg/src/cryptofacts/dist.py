"""Empirical survival functions, tail exponents and stretched-exponential fits."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import least_squares

from .errors import FitError, InsufficientDataError

MIN_TAIL_POINTS = 50
MIN_STRETCHED_POINTS = 100
LEVY_BOUND = 2.0


@dataclass
class EmpiricalCdf:
    """Survival function P(X > x) evaluated at the distinct sample values.

    ``survival[k] = #{X > sorted_values[k]} / n``.  The sample maximum, where
    the survival is zero, is not stored but kept in ``upper`` so that every
    stored value lies in (0, 1].  A sample with a single distinct value is
    kept as one point with survival 1.  Averaged curves carry ``upper=None``.
    """

    sorted_values: np.ndarray
    survival: np.ndarray
    n: int
    upper: Optional[float] = None

    def __len__(self):
        return len(self.sorted_values)

    def __call__(self, x) -> np.ndarray:
        """Evaluate the right-continuous step function P(X > x)."""
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self.sorted_values, x, side="right") - 1
        out = np.where(idx >= 0, self.survival[np.clip(idx, 0, None)], 1.0)
        if self.upper is not None:
            out = np.where(x >= self.upper, 0.0, out)
        return out


def empirical_cdf(values) -> EmpiricalCdf:
    x = np.asarray(values, dtype=float).ravel()
    x = x[np.isfinite(x)]
    n = len(x)
    if n == 0:
        raise InsufficientDataError("empty input")
    distinct, counts = np.unique(x, return_counts=True)
    if len(distinct) == 1:
        return EmpiricalCdf(distinct, np.array([1.0]), n, upper=float(distinct[0]))
    above = n - np.cumsum(counts)
    return EmpiricalCdf(distinct[:-1], above[:-1] / n, n, upper=float(distinct[-1]))


# ---------------------------------------------------------------- tails


@dataclass
class TailFit:
    exponent: float
    xmin: float
    n_tail: int
    stderr: float
    levy_regime: bool = False
    stable: bool = True
    hill_drift: float = 0.0


def _order_stats_desc(cdf_or_values) -> np.ndarray:
    if not isinstance(cdf_or_values, EmpiricalCdf):
        return np.sort(np.asarray(cdf_or_values, dtype=float))[::-1]
    cdf = cdf_or_values
    if cdf.upper is None:
        raise FitError("averaged curves carry no sample; use fit_power_law_lsq")
    if len(cdf) == 1 and cdf.survival[0] == 1.0:
        return np.full(cdf.n, cdf.sorted_values[0])
    # rebuild the sample from the multiplicities encoded in the survival steps
    surv = np.concatenate([cdf.survival, [0.0]])
    values = np.concatenate([cdf.sorted_values, [cdf.upper]])
    prev = np.concatenate([[1.0], surv[:-1]])
    counts = np.round((prev - surv) * cdf.n).astype(int)
    return np.repeat(values, counts)[::-1]


def hill_estimate(desc: np.ndarray, k: int):
    """ML tail exponent from the ``k`` largest values with threshold the k-th largest."""
    tail = desc[:k]
    xmin = tail[-1]
    if xmin <= 0:
        raise FitError("tail threshold must be positive for a power-law fit")
    logs = np.log(tail[:-1] / xmin)
    total = float(np.sum(logs))
    if total <= 0:
        raise FitError("degenerate tail (all retained values equal)")
    gamma = (k - 1) / total
    return gamma, float(xmin)


def fit_tail_exponent(cdf, tail_fraction: float = 0.01, drift_tol: float = 0.1) -> TailFit:
    """Hill (maximum-likelihood) exponent of P(X > x) ~ x^-gamma over the top ``tail_fraction``.

    Stability check: the estimate is repeated on a four times smaller tail;
    the fit is flagged unstable when the relative change exceeds
    ``drift_tol`` and three combined standard errors.
    """
    if not 0 < tail_fraction <= 1:
        raise ValueError("tail_fraction must be in (0, 1]")
    desc = _order_stats_desc(cdf)
    k = int(np.ceil(tail_fraction * len(desc)))
    if k < MIN_TAIL_POINTS:
        raise InsufficientDataError(f"only {k} tail points, need at least {MIN_TAIL_POINTS}")
    gamma, xmin = hill_estimate(desc, k)
    stderr = gamma / np.sqrt(k - 1)
    drift, stable = 0.0, True
    k_small = k // 4
    if k_small >= MIN_TAIL_POINTS // 2:
        g_small, _ = hill_estimate(desc, k_small)
        drift = (g_small - gamma) / gamma
        se_diff = np.hypot(stderr, g_small / np.sqrt(k_small - 1)) / gamma
        stable = not (abs(drift) > drift_tol and abs(drift) > 3 * se_diff)
    return TailFit(
        exponent=gamma,
        xmin=xmin,
        n_tail=k,
        stderr=float(stderr),
        levy_regime=gamma < LEVY_BOUND,
        stable=stable,
        hill_drift=float(drift),
    )


@dataclass
class PowerLawLsq:
    exponent: float
    sse: float
    n_points: int


def _in_range(cdf: EmpiricalCdf, value_range):
    lo, hi = value_range
    sel = (cdf.sorted_values >= lo) & (cdf.sorted_values <= hi) & (cdf.survival > 0)
    return cdf.sorted_values[sel], cdf.survival[sel]


def fit_power_law_lsq(cdf: EmpiricalCdf, value_range) -> PowerLawLsq:
    """Straight-line fit of log survival against log x (for model comparison)."""
    x, s = _in_range(cdf, value_range)
    if len(x) < 3 or np.any(x <= 0):
        raise InsufficientDataError("need >= 3 positive points in range")
    A = np.column_stack([np.log(x), np.ones(len(x))])
    coef, *_ = np.linalg.lstsq(A, np.log(s), rcond=None)
    resid = np.log(s) - A @ coef
    return PowerLawLsq(float(-coef[0]), float(resid @ resid), len(x))


# ---------------------------------------------------------------- stretched exponential


@dataclass
class StretchedExpFit:
    eta: float
    scale: float
    sse: float
    n_points: int


def fit_stretched_exponential(cdf: EmpiricalCdf, value_range, max_nfev: int = 2000) -> StretchedExpFit:
    """Least-squares fit of log P(X > x) = -(x / scale)^eta over ``value_range``."""
    x, s = _in_range(cdf, value_range)
    if len(x) < MIN_STRETCHED_POINTS:
        raise InsufficientDataError(f"{len(x)} points in range, need {MIN_STRETCHED_POINTS}")
    if np.any(x <= 0):
        raise FitError("stretched exponential needs positive abscissae")
    y = np.log(s)

    def resid(theta):
        log_eta, log_scale = theta
        return y + np.exp(np.exp(log_eta) * (np.log(x) - log_scale))

    # start from the line log(-log S) = eta log x - eta log scale
    mask = s < 1
    A = np.column_stack([np.log(x[mask]), np.ones(np.count_nonzero(mask))])
    (slope, icpt), *_ = np.linalg.lstsq(A, np.log(-y[mask]), rcond=None)
    eta0 = float(np.clip(slope, 0.05, 5.0))
    x0 = [np.log(eta0), -icpt / eta0]
    sol = least_squares(resid, x0, method="lm", max_nfev=max_nfev, xtol=1e-14, ftol=1e-14)
    if not sol.success:
        raise FitError(f"stretched exponential fit did not converge: {sol.message}")
    r = sol.fun
    return StretchedExpFit(float(np.exp(sol.x[0])), float(np.exp(sol.x[1])), float(r @ r), len(x))


# ---------------------------------------------------------------- averaging


def group_average_cdf(cdfs: Sequence[EmpiricalCdf], n_grid: int = 200,
                      grid: Optional[np.ndarray] = None) -> EmpiricalCdf:
    """Vertical average: mean survival of the inputs on a shared log-spaced grid.

    Grid points where the average survival is zero are dropped.
    """
    if len(cdfs) == 0:
        raise InsufficientDataError("no distributions to average")
    if grid is None:
        lows = [c.sorted_values[c.sorted_values > 0][0] for c in cdfs if np.any(c.sorted_values > 0)]
        if not lows:
            raise InsufficientDataError("no positive values for a log grid")
        lo = min(lows)
        hi = max(c.upper if c.upper is not None else c.sorted_values[-1] for c in cdfs)
        grid = np.geomspace(lo, hi, n_grid) if hi > lo else np.array([lo])
    grid = np.asarray(grid, dtype=float)
    mean = np.mean([c(grid) for c in cdfs], axis=0)
    keep = mean > 0
    return EmpiricalCdf(grid[keep], mean[keep], sum(c.n for c in cdfs))
