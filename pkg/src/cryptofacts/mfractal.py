"""Multifractal detrended (cross-)fluctuation analysis.

The series is cut into ``2 * floor(N / s)`` non-overlapping segments of
length ``s`` taken from both ends; each segment is integrated, a degree-m
least-squares polynomial is removed, and the detrended (co)variances are
combined into q-th order fluctuation functions.  From those we get the
generalized Hurst exponents h(q), the singularity spectrum f(alpha) and the
q-dependent detrended cross-correlation coefficient rho_q(s).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError, SpectrumError

DEFAULT_Q = tuple(float(q) for q in np.arange(-4, 4.5, 0.5))

# segments whose detrended variance is below this fraction of the mean at
# that scale count as zero-variance (flat price stretches)
ZERO_VARIANCE_RTOL = 1e-20


def log_scales(s_min: int, s_max: int, per_decade: int = 20) -> np.ndarray:
    """Integer scales, ``per_decade`` log-spaced points per decade, duplicates removed."""
    if s_max < s_min:
        raise DomainError(f"empty scale range [{s_min}, {s_max}]")
    n = int(np.floor(np.log10(s_max / s_min) * per_decade)) + 1
    scales = np.unique(np.round(s_min * 10 ** (np.arange(n) / per_decade)).astype(int))
    return scales[scales <= s_max]


@dataclass
class DetrendConfig:
    scales: Sequence[int]
    q_grid: Sequence[float] = DEFAULT_Q
    poly_degree: int = 2

    def __post_init__(self):
        self.scales = np.asarray(self.scales, dtype=int)
        self.q_grid = np.asarray(self.q_grid, dtype=float)

    @classmethod
    def for_length(cls, n: int, q_grid=DEFAULT_Q, poly_degree: int = 2,
                   s_min: int = 10, per_decade: int = 20) -> "DetrendConfig":
        """Scales from ``s_min`` to ``n // 4`` at ``per_decade`` points per decade."""
        s_min = max(s_min, poly_degree + 2)
        return cls(log_scales(s_min, n // 4, per_decade), q_grid, poly_degree)

    def validate(self, n: Optional[int] = None) -> None:
        m = self.poly_degree
        if int(m) != m or m < 1:
            raise DomainError(f"poly_degree must be an integer >= 1, got {m}")
        if len(self.scales) == 0:
            raise DomainError("no scales configured")
        if np.any(np.diff(self.scales) <= 0):
            raise DomainError("scales must be strictly increasing")
        if self.scales[0] < m + 2:
            raise DomainError(f"smallest scale {self.scales[0]} below poly_degree + 2 = {m + 2}")
        if n is not None and self.scales[-1] > n // 4:
            raise DomainError(f"largest scale {self.scales[-1]} exceeds N/4 = {n // 4}")
        if len(self.q_grid) == 0 or np.any(np.abs(self.q_grid) > 10):
            raise DomainError("q grid must be non-empty with |q| <= 10")


# ---------------------------------------------------------------- detrending


@lru_cache(maxsize=512)
def _trend_basis(s: int, m: int) -> np.ndarray:
    """Orthonormal basis (s, m+1) of degree-m polynomials sampled on s points."""
    t = np.linspace(-1.0, 1.0, s)
    q, _ = np.linalg.qr(np.vander(t, m + 1, increasing=True))
    q.setflags(write=False)
    return q


def segment_matrix(x: np.ndarray, s: int) -> np.ndarray:
    """Stack the ``2 * floor(N/s)`` segments: left-anchored ones first, then right-anchored."""
    n = len(x)
    ns = n // s
    left = x[: ns * s].reshape(ns, s)
    right = x[n - ns * s:].reshape(ns, s)
    return np.concatenate([left, right], axis=0)


def profile_and_detrend(series, s: int, m: int = 2) -> np.ndarray:
    """Per-segment integrated, polynomial-detrended profiles, shape ``(2*floor(N/s), s)``."""
    x = np.asarray(series, dtype=float)
    if s < m + 2:
        raise DomainError(f"scale {s} too small for degree {m} (need >= {m + 2})")
    if len(x) < 4 * s:
        raise DomainError(f"scale {s} too large for N = {len(x)} (need N >= 4s)")
    prof = np.cumsum(segment_matrix(x, s), axis=1)
    basis = _trend_basis(s, m)
    resid = prof - (prof @ basis) @ basis.T
    # residuals of a fit with a constant term are zero-mean up to rounding
    resid -= resid.mean(axis=1, keepdims=True)
    return resid


def _zero_mask(f2: np.ndarray, ref: float) -> np.ndarray:
    return np.abs(f2) <= ZERO_VARIANCE_RTOL * ref


def q_moments(f2: np.ndarray, q_grid, signed: bool, ref: Optional[float] = None):
    """Segment averages of ``sgn(f2) |f2|^(q/2)`` for every q.

    The q = 0 entry holds the logarithmic limit ``exp(<log|f2|>/2)`` (sign by
    majority for signed input), which is already the fluctuation function.
    Zero-variance segments are left out for q <= 0; ``excluded[i]`` counts
    them.  Returns ``(moments, excluded)``.
    """
    f2 = np.asarray(f2, dtype=float)
    q_grid = np.asarray(q_grid, dtype=float)
    if ref is None:
        ref = float(np.mean(np.abs(f2)))
    zero = _zero_mask(f2, ref)
    sgn = np.sign(f2) if signed else np.ones_like(f2)
    mod = np.abs(f2)
    moments = np.full(len(q_grid), np.nan)
    excluded = np.zeros(len(q_grid), dtype=int)
    nz_sgn = sgn[~zero]
    log_mod = 0.5 * np.log(mod[~zero])
    for i, q in enumerate(q_grid):
        if q > 0:
            moments[i] = np.mean(sgn * mod ** (q / 2))
            continue
        excluded[i] = int(np.count_nonzero(zero))
        if len(log_mod) == 0:
            continue
        if q == 0:
            sign = 1.0 if np.sum(nz_sgn) >= 0 else -1.0
            moments[i] = sign * np.exp(np.mean(log_mod))
        else:
            moments[i] = np.mean(nz_sgn * np.exp(q * log_mod))
    return moments, excluded


def moments_to_F(moments, q_grid) -> np.ndarray:
    """Fluctuation function ``sgn(M) |M|^(1/q)``; the q = 0 entry passes through."""
    moments = np.asarray(moments, dtype=float)
    q = np.asarray(q_grid, dtype=float).reshape((-1,) + (1,) * (moments.ndim - 1))
    q = np.broadcast_to(q, moments.shape)
    out = moments.copy()
    nz = q != 0
    with np.errstate(divide="ignore", invalid="ignore"):
        out[nz] = np.sign(moments[nz]) * np.abs(moments[nz]) ** (1.0 / q[nz])
    return out


def q_average(f2: np.ndarray, q_grid, signed: bool, ref: Optional[float] = None):
    """F_q for every q from segment (co)variances; returns ``(F, excluded)``."""
    moments, excluded = q_moments(f2, q_grid, signed, ref)
    return moments_to_F(moments, q_grid), excluded


# ---------------------------------------------------------------- surfaces


@dataclass
class FluctuationSurface:
    kind: str  # "univariate" or "bivariate"
    scales: np.ndarray
    q_grid: np.ndarray
    F: np.ndarray  # (len(q_grid), len(scales))
    excluded: np.ndarray = None
    n_segments: np.ndarray = None
    label: str = ""

    def at(self, q: float) -> np.ndarray:
        idx = np.nonzero(np.isclose(self.q_grid, q))[0]
        if len(idx) == 0:
            raise KeyError(f"q={q} not on the grid")
        return self.F[idx[0]]


def _map_scales(func, scales, workers: int):
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(func, scales))
    return [func(s) for s in scales]


def _check_pair(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise DomainError(f"series must be 1-D with equal lengths, got {a.shape} and {b.shape}")
    return a, b


def segment_variances(a, s: int, m: int) -> np.ndarray:
    r = profile_and_detrend(a, s, m)
    return np.einsum("ij,ij->i", r, r) / s


def fluctuation_surface(a, b=None, cfg: Optional[DetrendConfig] = None, *,
                        workers: int = 1, label: str = "") -> FluctuationSurface:
    """F_q(s) over the configured grid.

    Univariate when ``b`` is None or the same object as ``a``; otherwise the
    bivariate function with the sign of each segment covariance preserved.
    """
    univariate = b is None or b is a
    a = np.asarray(a, dtype=float)
    b = a if univariate else b
    a, b = _check_pair(a, b)
    cfg = cfg or DetrendConfig.for_length(len(a))
    cfg.validate(len(a))
    m = cfg.poly_degree

    def one_scale(s):
        ra = profile_and_detrend(a, s, m)
        if univariate:
            f2 = np.einsum("ij,ij->i", ra, ra) / s
        else:
            f2 = np.einsum("ij,ij->i", ra, profile_and_detrend(b, s, m)) / s
        return q_average(f2, cfg.q_grid, signed=not univariate) + (len(f2),)

    results = _map_scales(one_scale, cfg.scales, workers)
    return FluctuationSurface(
        kind="univariate" if univariate else "bivariate",
        scales=cfg.scales.copy(),
        q_grid=cfg.q_grid.copy(),
        F=np.column_stack([r[0] for r in results]),
        excluded=np.column_stack([r[1] for r in results]),
        n_segments=np.array([r[2] for r in results]),
        label=label,
    )


# ---------------------------------------------------------------- rho_q

RHO_OVERSHOOT_TOL = 1e-6


@dataclass
class RhoQResult:
    rho: np.ndarray  # (len(q_grid), len(scales)); NaN where undefined
    scales: np.ndarray
    q_grid: np.ndarray
    F_ab: np.ndarray = None
    F_aa: np.ndarray = None
    F_bb: np.ndarray = None

    def at(self, q: float) -> np.ndarray:
        idx = np.nonzero(np.isclose(self.q_grid, q))[0]
        if len(idx) == 0:
            raise KeyError(f"q={q} not on the grid")
        return self.rho[idx[0]]

    @property
    def missing(self):
        """(q, s) pairs where the coefficient is undefined."""
        iq, js = np.nonzero(np.isnan(self.rho))
        return [(float(self.q_grid[i]), int(self.scales[j])) for i, j in zip(iq, js)]


def combine_rho(M_ab, M_aa, M_bb, q_grid) -> np.ndarray:
    """rho = M_ab / sqrt(M_aa M_bb) from segment q-moments, clipping tiny overshoots for q >= 0.

    The moments are taken before the 1/q root, so rho_2 is the DCCA
    coefficient; at q = 1 the rooted and unrooted forms coincide.
    """
    F_ab, F_aa, F_bb = (np.asarray(x, dtype=float) for x in (M_ab, M_aa, M_bb))
    with np.errstate(divide="ignore", invalid="ignore"):
        denom = np.sqrt(F_aa * F_bb)
        rho = np.where((denom > 0) & np.isfinite(denom), F_ab / denom, np.nan)
    q = np.asarray(q_grid, dtype=float).reshape((-1,) + (1,) * (rho.ndim - 1))
    bounded = np.broadcast_to(q >= 0, rho.shape)
    over = bounded & (np.abs(rho) > 1.0)
    if np.any(np.abs(rho[over]) - 1.0 > RHO_OVERSHOOT_TOL):
        worst = float(np.max(np.abs(rho[over])))
        raise SpectrumError(f"|rho_q| = {worst} exceeds 1 beyond rounding tolerance")
    return np.where(over, np.clip(rho, -1.0, 1.0), rho)


def rho_q(a, b, cfg: Optional[DetrendConfig] = None, *, workers: int = 1) -> RhoQResult:
    """q-dependent detrended cross-correlation coefficient of two equal-length series.

    All three fluctuation functions come from the same segment residuals.
    Values for q < 0 are computed but carry no [-1, 1] guarantee.
    """
    a, b = _check_pair(a, b)
    cfg = cfg or DetrendConfig.for_length(len(a))
    cfg.validate(len(a))
    m = cfg.poly_degree

    def one_scale(s):
        ra = profile_and_detrend(a, s, m)
        rb = profile_and_detrend(b, s, m)
        f_aa = np.einsum("ij,ij->i", ra, ra) / s
        f_bb = np.einsum("ij,ij->i", rb, rb) / s
        f_ab = np.einsum("ij,ij->i", ra, rb) / s
        return (q_moments(f_ab, cfg.q_grid, True)[0],
                q_moments(f_aa, cfg.q_grid, False)[0],
                q_moments(f_bb, cfg.q_grid, False)[0])

    results = _map_scales(one_scale, cfg.scales, workers)
    M_ab, M_aa, M_bb = (np.column_stack([r[k] for r in results]) for k in range(3))
    return RhoQResult(
        rho=combine_rho(M_ab, M_aa, M_bb, cfg.q_grid),
        scales=cfg.scales.copy(),
        q_grid=cfg.q_grid.copy(),
        F_ab=moments_to_F(M_ab, cfg.q_grid),
        F_aa=moments_to_F(M_aa, cfg.q_grid),
        F_bb=moments_to_F(M_bb, cfg.q_grid),
    )


# ---------------------------------------------------------------- spectra


@dataclass
class SpectrumResult:
    q_grid: np.ndarray
    h_of_q: np.ndarray
    fit_range: tuple
    fit_r2: np.ndarray
    h_stderr: np.ndarray
    alpha: np.ndarray
    f_alpha: np.ndarray
    width: float = field(init=False)
    asymmetry: float = field(init=False)

    def __post_init__(self):
        ok = np.isfinite(self.alpha) & np.isfinite(self.f_alpha)
        alpha, f = self.alpha[ok], self.f_alpha[ok]
        if len(alpha) == 0:
            self.width = self.asymmetry = np.nan
            return
        a_min, a_max = float(alpha.min()), float(alpha.max())
        a0 = float(alpha[np.argmax(f)])
        self.width = a_max - a_min
        self.asymmetry = (a0 - a_min) - (a_max - a0)

    def h(self, q: float) -> float:
        return float(self.h_of_q[np.argmin(np.abs(self.q_grid - q))])


def _linfit(x, y):
    """Least-squares slope, R^2 and slope standard error."""
    A = np.column_stack([x, np.ones_like(x)])
    coef, res, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    ss_res = float(resid @ resid)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    dof = len(x) - 2
    sxx = float(np.sum((x - x.mean()) ** 2))
    stderr = np.sqrt(ss_res / dof / sxx) if dof > 0 and sxx > 0 else np.nan
    return float(coef[0]), float(coef[1]), r2, stderr


def legendre_spectrum(q_grid, h_of_q):
    """Singularity spectrum from h(q) with dh/dq by central differences."""
    q = np.asarray(q_grid, dtype=float)
    h = np.asarray(h_of_q, dtype=float)
    if len(q) < 2:
        return np.full(len(q), np.nan), np.full(len(q), np.nan)
    dh = np.gradient(h, q)
    alpha = h + q * dh
    f_alpha = q * (alpha - h) + 1.0
    return alpha, f_alpha


def hurst_spectrum(surface: FluctuationSurface, fit_range=None, min_scales: int = 8) -> SpectrumResult:
    """Generalized Hurst exponents and singularity spectrum over ``fit_range`` (inclusive)."""
    scales = surface.scales
    if fit_range is None:
        fit_range = (int(scales[0]), int(scales[-1]))
    s_lo, s_hi = fit_range
    sel = (scales >= s_lo) & (scales <= s_hi)
    if np.count_nonzero(sel) < min_scales:
        raise SpectrumError(f"only {np.count_nonzero(sel)} scales in fit range {fit_range}, need {min_scales}")
    F = surface.F[:, sel]
    if not np.all(np.isfinite(F)) or np.any(F <= 0):
        raise SpectrumError("non-positive or undefined fluctuation values inside the fit range")
    x = np.log(scales[sel].astype(float))
    fits = [_linfit(x, np.log(row)) for row in F]
    h = np.array([f[0] for f in fits])
    alpha, f_alpha = legendre_spectrum(surface.q_grid, h)
    return SpectrumResult(
        q_grid=surface.q_grid.copy(),
        h_of_q=h,
        fit_range=(int(scales[sel][0]), int(scales[sel][-1])),
        fit_r2=np.array([f[2] for f in fits]),
        h_stderr=np.array([f[3] for f in fits]),
        alpha=alpha,
        f_alpha=f_alpha,
    )


def find_scaling_range(surface: FluctuationSurface, r2_min: float = 0.98,
                       min_scales: int = 8, q_subset=None):
    """Longest contiguous scale window whose log-log fit has R^2 >= ``r2_min`` for every q.

    Returns ``(s_lo, s_hi)`` or None when no window qualifies.
    """
    rows = surface.F
    if q_subset is not None:
        rows = np.stack([surface.at(q) for q in q_subset])
    logs = np.log(surface.scales.astype(float))
    with np.errstate(divide="ignore", invalid="ignore"):
        logF = np.log(rows)
    n = len(logs)
    best = None
    for i in range(n):
        for j in range(n - 1, i + min_scales - 2, -1):
            if best is not None and j - i <= best[1] - best[0]:
                break
            block = logF[:, i:j + 1]
            if not np.all(np.isfinite(block)):
                continue
            if all(_linfit(logs[i:j + 1], row)[2] >= r2_min for row in block):
                best = (i, j)
                break
    if best is None:
        return None
    return int(surface.scales[best[0]]), int(surface.scales[best[1]])
