"""Synthetic series with analytically known statistics.

Every generator is a pure function of its :class:`GeneratorSpec`; the same
seed always yields bitwise-identical output.

Analytic targets:

* ``gaussian_white``: generalized Hurst exponent h(q) = 0.5 for every q.
* ``fgn(H)``: h(q) = H for every q.
* ``binomial_cascade(p, levels)``: h(q) = 1/q - log2(p^q + (1-p)^q) / q.
* ``pareto_tail(gamma)``: P(X > x) = x^-gamma for x >= 1.
* ``ar1(phi)``: autocorrelation C(tau) = phi^tau.
* ``power_coupled(alpha, noise)``: pairs (v, |r|) with |r| = v^alpha |1 + noise eps|.
  An optional ``background`` fraction of the |r| values is replaced by
  half-normal noise of scale ``background_scale``, unrelated to v.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from .errors import SpecError

KINDS = ("gaussian_white", "fgn", "binomial_cascade", "pareto_tail", "ar1", "power_coupled")


@dataclass(frozen=True)
class GeneratorSpec:
    kind: str
    length: int = 100_000
    seed: int = 0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        validate(self)


def _param(spec, name, default=None):
    if name in spec.params:
        return spec.params[name]
    if default is None:
        raise SpecError(f"{spec.kind} requires parameter {name!r}")
    return default


def validate(spec: GeneratorSpec) -> None:
    if spec.kind not in KINDS:
        raise SpecError(f"unknown generator kind {spec.kind!r}; expected one of {KINDS}")
    if spec.kind != "binomial_cascade" and int(spec.length) < 1:
        raise SpecError("length must be positive")
    if not 0 <= int(spec.seed) < 2**64:
        raise SpecError("seed must be a 64-bit unsigned integer")
    if spec.kind == "fgn":
        H = _param(spec, "H")
        if not 0 < H < 1:
            raise SpecError(f"fgn needs 0 < H < 1, got {H}")
    elif spec.kind == "binomial_cascade":
        p = _param(spec, "p")
        levels = _param(spec, "levels")
        if not 0.5 < p < 1:
            raise SpecError(f"binomial_cascade needs 0.5 < p < 1, got {p}")
        if int(levels) != levels or not 1 <= levels <= 30:
            raise SpecError(f"levels must be an integer in [1, 30], got {levels}")
    elif spec.kind == "pareto_tail":
        if not _param(spec, "gamma") > 0:
            raise SpecError("pareto_tail needs gamma > 0")
    elif spec.kind == "ar1":
        if not abs(_param(spec, "phi")) < 1:
            raise SpecError("ar1 needs |phi| < 1")
    elif spec.kind == "power_coupled":
        if not _param(spec, "alpha") > 0:
            raise SpecError("power_coupled needs alpha > 0")
        if _param(spec, "noise", 0.0) < 0:
            raise SpecError("noise amplitude must be non-negative")
        if not 0 <= _param(spec, "background", 0.0) < 1:
            raise SpecError("background fraction must be in [0, 1)")


def generate(spec: GeneratorSpec) -> np.ndarray:
    """Generate the series described by ``spec``.

    ``power_coupled`` returns an (N, 2) array of (volume, abs_return) pairs;
    every other kind returns a 1-D array.
    """
    validate(spec)
    rng = np.random.default_rng(int(spec.seed))
    n = int(spec.length)
    kind = spec.kind
    if kind == "gaussian_white":
        return rng.standard_normal(n)
    if kind == "fgn":
        return fgn(n, spec.params["H"], rng)
    if kind == "binomial_cascade":
        return binomial_cascade(spec.params["p"], int(spec.params["levels"]), rng,
                                signed=bool(spec.params.get("signed", False)))
    if kind == "pareto_tail":
        u = 1.0 - rng.random(n)  # in (0, 1]
        return u ** (-1.0 / spec.params["gamma"])
    if kind == "ar1":
        return ar1(n, spec.params["phi"], rng)
    if kind == "power_coupled":
        return power_coupled(n, spec.params["alpha"], spec.params.get("noise", 0.0), rng,
                             v_range=tuple(spec.params.get("v_range", (0.1, 100.0))),
                             background=spec.params.get("background", 0.0),
                             background_scale=spec.params.get("background_scale", 0.3))
    raise SpecError(kind)  # pragma: no cover


def fgn_autocovariance(H: float, k) -> np.ndarray:
    k = np.abs(np.asarray(k, dtype=float))
    return 0.5 * ((k + 1) ** (2 * H) - 2 * k ** (2 * H) + np.abs(k - 1) ** (2 * H))


def fgn(n: int, H: float, rng: np.random.Generator) -> np.ndarray:
    """Unit-variance fractional Gaussian noise by circulant embedding (Davies-Harte)."""
    if n == 1:
        return rng.standard_normal(1)
    m = 1 << int(np.ceil(np.log2(2 * (n - 1))))
    half = m // 2
    gamma = fgn_autocovariance(H, np.arange(half + 1))
    row = np.concatenate([gamma, gamma[-2:0:-1]])
    eig = np.fft.fft(row).real
    if np.any(eig < -1e-10 * eig.max()):
        raise SpecError(f"circulant embedding not non-negative definite for H={H}")
    eig = np.clip(eig, 0.0, None)
    w = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    z = np.fft.fft(np.sqrt(eig / m) * w)
    return z.real[:n]


def binomial_cascade(p: float, levels: int, rng: np.random.Generator,
                     signed: bool = False) -> np.ndarray:
    """Binomial multiplicative cascade of ``2**levels`` points with mean 1.

    At every level each interval passes weight ``p`` to one half and
    ``1 - p`` to the other; which half gets ``p`` is drawn at random.  The
    multiset of final weights, hence h(q), is the same as for the
    deterministic cascade.  With ``signed`` the values get random signs.
    """
    weights = np.ones(1)
    for _ in range(levels):
        left = np.where(rng.random(len(weights)) < 0.5, p, 1.0 - p)
        weights = np.stack([weights * left, weights * (1.0 - left)], axis=1).ravel()
    values = weights * 2.0**levels
    if signed:
        values = values * rng.choice([-1.0, 1.0], size=len(values))
    return values


def cascade_hurst(q, p: float) -> np.ndarray:
    """Closed-form h(q) of the binomial cascade (q != 0)."""
    q = np.asarray(q, dtype=float)
    return 1.0 / q - np.log2(p**q + (1.0 - p) ** q) / q


def ar1(n: int, phi: float, rng: np.random.Generator) -> np.ndarray:
    eps = rng.standard_normal(n)
    x0 = rng.standard_normal() / np.sqrt(1.0 - phi**2)
    out, _ = lfilter([1.0], [1.0, -phi], eps, zi=[phi * x0])
    return out


def power_coupled(n: int, alpha: float, noise: float, rng: np.random.Generator,
                  v_range=(0.1, 100.0), background: float = 0.0,
                  background_scale: float = 0.3) -> np.ndarray:
    """(volume, |return|) pairs, volume log-uniform over ``v_range``."""
    lo, hi = np.log(v_range[0]), np.log(v_range[1])
    v = np.exp(rng.uniform(lo, hi, n))
    mult = np.abs(1.0 + noise * rng.standard_normal(n)) if noise > 0 else np.ones(n)
    r = v**alpha * mult
    if background > 0:
        bg = rng.random(n) < background
        r[bg] = background_scale * np.abs(rng.standard_normal(np.count_nonzero(bg)))
    return np.column_stack([v, r])
