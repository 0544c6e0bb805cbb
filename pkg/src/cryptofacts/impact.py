"""Volatility-volume scatter statistics and conditional price impact.

For every volume cell only the ``p`` fraction of points with the largest
|r| is kept; the conditional mean of |r|^kappa is then compared with a
power law in v.  Slopes are reported in the E[|r|^kappa | v] ~ v^slope
convention: with |r| ~ v^alpha the slope is kappa * alpha, and the kappa
that linearizes the relation (slope 1) corresponds to alpha = 1 / kappa.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .errors import DomainError, InsufficientDataError

DEFAULT_KAPPAS = (0.2, 0.5, 1.0, 2.0)
REJECT_R2 = 0.9


@dataclass
class ImpactConfig:
    kappa_grid: Sequence[float] = DEFAULT_KAPPAS
    p: float = 0.1
    cells: Optional[Sequence[float]] = None  # volume-cell edges; derived from data when None
    cells_per_decade: int = 12
    min_count: int = 30  # points per cell before the top-p selection
    min_selected: int = 10  # points per cell after it
    fit_range: Optional[tuple] = None  # (v_lo, v_hi) for the power-law fit
    dt_list: Sequence[int] = (1, 5, 10, 60)

    def validate(self) -> None:
        if not 0 < self.p <= 1:
            raise DomainError(f"p must be in (0, 1], got {self.p}")
        if len(self.kappa_grid) == 0 or any(k <= 0 for k in self.kappa_grid):
            raise DomainError("kappa values must be positive")
        if self.cells is not None and np.any(np.diff(self.cells) <= 0):
            raise DomainError("cell edges must be strictly increasing")


@dataclass
class Scatter:
    returns: np.ndarray
    volume: np.ndarray
    quantiles: np.ndarray  # volume 25th, 50th, 75th percentiles


def scatter(returns, volume) -> Scatter:
    r = np.asarray(returns, dtype=float)
    v = np.asarray(volume, dtype=float)
    if r.shape != v.shape:
        raise DomainError("returns and volume must have equal lengths")
    if len(v) == 0:
        return Scatter(r, v, np.full(3, np.nan))
    return Scatter(r, v, np.percentile(v, [25, 50, 75]))


def volume_cells(volume, per_decade: int = 12) -> np.ndarray:
    """Log-spaced cell edges from the 25th percentile (or the smallest positive value) upward."""
    v = np.asarray(volume, dtype=float)
    pos = v[v > 0]
    if len(pos) == 0:
        raise InsufficientDataError("no positive volume values")
    lo = max(np.percentile(v, 25), pos.min())
    hi = v.max()
    n = max(int(np.ceil(np.log10(hi / lo) * per_decade)), 1)
    edges = lo * 10 ** (np.arange(n + 1) / per_decade)
    edges[-1] = max(edges[-1], np.nextafter(hi, np.inf))
    return edges


@dataclass
class ImpactCurve:
    kappa: float
    v_centers: np.ndarray
    means: np.ndarray
    stdevs: np.ndarray
    counts: np.ndarray  # selected points per cell
    totals: np.ndarray  # points per cell before selection
    fitted: np.ndarray  # cells used by the fit
    fit_slope: float = np.nan
    fit_intercept: float = np.nan
    fit_r2: float = np.nan
    fit_rmse: float = np.nan
    linear_r2: float = np.nan  # goodness of E[|r|^kappa | v] ~ v (slope fixed to 1)
    fit_range: tuple = field(default=(np.nan, np.nan))

    @property
    def alpha(self) -> float:
        """Exponent of |r| ~ v^alpha implied by the fitted slope."""
        return self.fit_slope / self.kappa


def _select_top(abs_r, v, edges, p):
    cell = np.searchsorted(edges, v, side="right") - 1
    n_cells = len(edges) - 1
    inside = (cell >= 0) & (cell < n_cells)
    order = np.lexsort((-abs_r[inside], cell[inside]))
    cells_sorted = cell[inside][order]
    r_sorted = abs_r[inside][order]
    totals = np.bincount(cells_sorted, minlength=n_cells)
    starts = np.concatenate([[0], np.cumsum(totals)[:-1]])
    keep = np.ceil(p * totals).astype(int)
    picked = [r_sorted[s:s + k] for s, k in zip(starts, keep)]
    return picked, totals


def conditional_impact(returns, volume, cfg: Optional[ImpactConfig] = None) -> Dict[float, ImpactCurve]:
    """E[|r|^kappa | v] per volume cell on the top-p |r| of each cell, one curve per kappa."""
    cfg = cfg or ImpactConfig()
    cfg.validate()
    r = np.abs(np.asarray(returns, dtype=float))
    v = np.asarray(volume, dtype=float)
    if r.shape != v.shape:
        raise DomainError("returns and volume must have equal lengths")
    edges = np.asarray(cfg.cells, dtype=float) if cfg.cells is not None else volume_cells(v, cfg.cells_per_decade)
    if edges[0] <= 0:
        raise DomainError("cell edges must be positive for a log-log fit")
    picked, totals = _select_top(r, v, edges, cfg.p)
    centers = np.sqrt(edges[:-1] * edges[1:])
    counts = np.array([len(x) for x in picked])
    fitted = (totals >= cfg.min_count) & (counts >= cfg.min_selected)
    if cfg.fit_range is not None:
        lo, hi = cfg.fit_range
        fitted &= (centers >= lo) & (centers <= hi)
    if np.count_nonzero(fitted) < 2:
        raise InsufficientDataError("fewer than two sufficiently occupied volume cells")

    curves = {}
    for kappa in cfg.kappa_grid:
        means = np.array([np.mean(x**kappa) if len(x) else np.nan for x in picked])
        stdevs = np.array([np.std(x**kappa) if len(x) else np.nan for x in picked])
        use = fitted & (means > 0)
        x = np.log(centers[use])
        y = np.log(means[use])
        A = np.column_stack([x, np.ones_like(x)])
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        ss_tot = float(np.sum((y - y.mean()) ** 2))
        ss_res = float(np.sum((y - A @ coef) ** 2))
        lin_res = y - x
        lin_res = lin_res - lin_res.mean()
        curves[float(kappa)] = ImpactCurve(
            kappa=float(kappa),
            v_centers=centers,
            means=means,
            stdevs=stdevs,
            counts=counts,
            totals=totals,
            fitted=use,
            fit_slope=float(coef[0]),
            fit_intercept=float(coef[1]),
            fit_r2=1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0,
            fit_rmse=float(np.sqrt(ss_res / len(y))),
            linear_r2=1.0 - float(lin_res @ lin_res) / ss_tot if ss_tot > 0 else -np.inf,
            fit_range=(float(centers[use][0]), float(centers[use][-1])),
        )
    return curves


@dataclass
class KappaVerdict:
    kappa: float
    linear_r2: float
    slope: float
    rejected: bool


def model_selection(curves: Dict[float, ImpactCurve], reject_below: float = REJECT_R2) -> List[KappaVerdict]:
    """Rank kappa values by how well E[|r|^kappa | v] ~ v holds (best first).

    Goodness is the R^2 of the log-log fit with the slope fixed to 1 over the
    cells common to all curves; a kappa is rejected when it falls below
    ``reject_below``.
    """
    if len(curves) < 2:
        raise DomainError("model selection needs at least two kappa values")
    common = np.logical_and.reduce([c.fitted for c in curves.values()])
    verdicts = []
    for kappa, c in curves.items():
        x = np.log(c.v_centers[common])
        y = np.log(c.means[common])
        ss_tot = float(np.sum((y - y.mean()) ** 2))
        res = (y - x) - np.mean(y - x)
        r2 = 1.0 - float(res @ res) / ss_tot if ss_tot > 0 else -np.inf
        verdicts.append(KappaVerdict(float(kappa), r2, c.fit_slope, r2 < reject_below))
    verdicts.sort(key=lambda k: (-k.linear_r2, k.kappa))
    return verdicts
