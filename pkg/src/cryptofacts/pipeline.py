"""Batch analyses writing plot-ready files, and the configuration-driven runner.

Every analysis is a function ``(assets, params, out_dir, workers) -> [paths]``.
The same functions back the individual CLI subcommands and ``run``.
"""

from __future__ import annotations

import glob
import hashlib
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from . import acf as acf_mod
from . import dist, impact, ingest, mfractal, network, synth
from .errors import AlignmentError, CryptoFactsError, DomainError, ParseError, SpecError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

DATA_ENV = "CRYPTOFACTS_DATA"
ANALYSES = ("stats", "cdf", "acf", "mf", "rho", "impact", "mst", "intermarket")


class ConfigError(SpecError):
    pass


# ---------------------------------------------------------------- formatting


def num(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    return f"{v:.12g}" if math.isfinite(v) else "nan"


def jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return float(f"{v:.12g}") if math.isfinite(v) else None
    return obj


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(jsonable(obj), indent=2, sort_keys=True) + "\n")
    return path


def write_columns(path, header, columns) -> Path:
    path = Path(path)
    rows = zip(*columns)
    lines = [",".join(header)] + [",".join(num(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")
    return path


def write_grid(path, corner, row_labels, col_labels, values) -> Path:
    """Matrix CSV with a header row of column labels and a label column."""
    path = Path(path)
    lines = [",".join([corner] + [str(c) for c in col_labels])]
    for lab, row in zip(row_labels, np.asarray(values)):
        lines.append(",".join([str(lab)] + [num(v) for v in row]))
    path.write_text("\n".join(lines) + "\n")
    return path


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


# ---------------------------------------------------------------- inputs


@dataclass
class Asset:
    """One input: a bar series, a plain value series, or (volume, |r|) pairs."""

    label: str
    path: Optional[Path] = None
    bars: Optional[ingest.BarSeries] = None
    values: Optional[np.ndarray] = None
    pairs: Optional[np.ndarray] = None

    @property
    def kind(self) -> str:
        if self.bars is not None:
            return "bars"
        return "pairs" if self.pairs is not None else "values"

    def returns(self, dt: int = 1) -> np.ndarray:
        if self.bars is not None:
            return ingest.log_returns(self.bars, dt).values
        if self.values is None:
            raise DomainError(f"{self.label}: (volume, |r|) pairs carry no return series")
        if dt == 1:
            return self.values
        n = len(self.values) // dt
        return self.values[: n * dt].reshape(n, dt).sum(axis=1)

    def need_bars(self, what: str) -> ingest.BarSeries:
        if self.bars is None:
            raise DomainError(f"{what} needs bar data, {self.label} is a {self.kind} series")
        return self.bars


def resolve_path(path, data_dir=None) -> Path:
    """Relative paths are tried against the working directory, then ``data_dir`` or $CRYPTOFACTS_DATA."""
    p = Path(path)
    if p.is_absolute() or p.exists():
        return p
    base = data_dir or os.environ.get(DATA_ENV)
    if base:
        cand = Path(base) / p
        if cand.exists():
            return cand
    return p


def load_asset(path, fmt: str = "default", label: Optional[str] = None) -> Asset:
    path = Path(path)
    label = label or path.stem
    if fmt == "binance":
        return Asset(label, path, bars=ingest.parse_bars(path, ingest.BINANCE_KLINE, label))
    with open(path) as fh:
        head = fh.readline().strip().lower()
    fields = [f.strip() for f in head.split(",")]
    if fields[0] == "timestamp":
        return Asset(label, path, bars=ingest.parse_bars(path, ingest.DEFAULT_FORMAT, label))
    frame = pd.read_csv(path, dtype=float)
    if fields == ["value"]:
        return Asset(label, path, values=frame["value"].to_numpy())
    if fields == ["volume", "abs_return"]:
        return Asset(label, path, pairs=frame[["volume", "abs_return"]].to_numpy())
    raise ParseError(f"{path}: unrecognised header {head!r}", 1)


def write_values(path, values) -> Path:
    """Single-column series CSV (``value``), or ``volume,abs_return`` for pairs."""
    path = Path(path)
    values = np.asarray(values, dtype=float)
    if values.ndim == 2:
        body = "\n".join(f"{v:.17g},{r:.17g}" for v, r in values)
        path.write_text("volume,abs_return\n" + body + "\n")
    else:
        path.write_text("value\n" + "\n".join(f"{v:.17g}" for v in values) + "\n")
    return path


def _normalized(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    sd = np.std(x)
    if not sd > 0:
        raise DomainError("series has zero variance")
    return (x - x.mean()) / sd


# ---------------------------------------------------------------- parameters


DEFAULTS = {
    "stats": {"dt": 1, "capitalization": {}},
    "cdf": {"dt": 1, "tail_fraction": 0.01, "stretched_range": None, "n_grid": 200},
    "acf": {"dt": 1, "max_lag": 10000, "per_decade": 30, "r2_min": 0.98, "tol": 0.05, "min_decades": 0.5},
    "mf": {"dt": 1, "q_min": -4.0, "q_max": 4.0, "q_step": 0.5, "s_min": 10, "s_max": None,
           "per_decade": 20, "poly_degree": 2, "fit_range": None},
    "rho": {"dt": 1, "q": [1.0, 2.0, 4.0], "s_min": 10, "s_max": None, "per_decade": 20,
            "poly_degree": 2, "pairs": None, "return_volume": False},
    "impact": {"dt_list": [1, 5, 10, 60], "kappas": list(impact.DEFAULT_KAPPAS), "p": 0.1,
               "cells_per_decade": 12, "min_count": 30, "min_selected": 10},
    "mst": {"dt": 1, "q": 1.0, "s": 10, "poly_degree": 2},
    "intermarket": {"dt": 1, "q": 1.0, "s": 10, "poly_degree": 2, "crypto": [], "traditional": [],
                    "coverage_floor": 0.5},
}


def analysis_params(name: str, given: Optional[dict]) -> dict:
    given = dict(given or {})
    unknown = set(given) - set(DEFAULTS[name])
    if unknown:
        raise ConfigError(f"[{name}] unknown keys: {sorted(unknown)}")
    params = dict(DEFAULTS[name])
    params.update(given)
    _check_params(name, params)
    return params


def _positive_int(name, value):
    if isinstance(value, bool) or int(value) != value or value < 1:
        raise ConfigError(f"{name} must be a positive integer, got {value!r}")


def _check_params(name, p):
    for key in ("dt", "s", "max_lag", "per_decade", "s_min", "cells_per_decade", "n_grid"):
        if key in p and p[key] is not None:
            _positive_int(f"{name}.{key}", p[key])
    if "dt_list" in p:
        for dt in p["dt_list"]:
            _positive_int(f"{name}.dt_list", dt)
    if "poly_degree" in p:
        _positive_int(f"{name}.poly_degree", p["poly_degree"])
    if name == "cdf" and not 0 < p["tail_fraction"] <= 1:
        raise ConfigError("cdf.tail_fraction must be in (0, 1]")
    if name == "mf":
        q = _q_grid(p)
        if len(q) == 0 or np.any(np.abs(q) > 10):
            raise ConfigError("mf q grid must be non-empty with |q| <= 10")
        if p["s_min"] < p["poly_degree"] + 2:
            raise ConfigError("mf.s_min must be at least poly_degree + 2")
    if name == "rho" and any(abs(q) > 10 for q in p["q"]):
        raise ConfigError("rho.q values must satisfy |q| <= 10")
    if name == "impact":
        try:
            impact.ImpactConfig(kappa_grid=p["kappas"], p=p["p"]).validate()
        except DomainError as exc:
            raise ConfigError(f"impact: {exc}") from exc
    if name in ("mst", "intermarket") and p["s"] < p["poly_degree"] + 2:
        raise ConfigError(f"{name}.s must be at least poly_degree + 2")
    if name == "intermarket" and not 0 <= p["coverage_floor"] <= 1:
        raise ConfigError("intermarket.coverage_floor must be in [0, 1]")


def _q_grid(p) -> np.ndarray:
    n = int(round((p["q_max"] - p["q_min"]) / p["q_step"])) + 1
    return np.round(p["q_min"] + p["q_step"] * np.arange(n), 10)


def _scales(p, n) -> np.ndarray:
    s_max = p["s_max"] or n // 4
    s_max = min(s_max, n // 4)
    if s_max < p["s_min"]:
        raise DomainError(f"series of length {n} too short for s_min={p['s_min']}")
    return mfractal.log_scales(p["s_min"], s_max, p["per_decade"])


# ---------------------------------------------------------------- analyses


def run_stats(assets: List[Asset], p: dict, out: Path, workers: int = 1) -> List[Path]:
    rows = []
    for a in assets:
        bars = a.need_bars("stats")
        rows.append(ingest.asset_stats(bars, ingest.log_returns(bars, p["dt"]), p["capitalization"].get(a.label)))
    path = out / "stats.csv"
    ingest.write_stats_csv(rows, path)
    return [path]


def _stats_or_none(a: Asset):
    if a.bars is None:
        return None
    try:
        return ingest.asset_stats(a.bars, ingest.log_returns(a.bars))
    except CryptoFactsError:
        return None


def _cdf_inputs(a: Asset, dt: int) -> Dict[str, np.ndarray]:
    if a.bars is not None:
        rets, vol = ingest.return_volume_pairs(a.bars, dt)
        return {"returns": np.abs(_normalized(rets.values)), "volume": vol.values / np.std(vol.values)}
    if a.pairs is not None:
        v, r = a.pairs.T
        return {"returns": r / np.std(r), "volume": v / np.std(v)}
    return {"returns": np.abs(_normalized(a.returns(dt)))}


def _cdf_report(cdf, p) -> dict:
    rep = {"n": cdf.n}
    try:
        t = dist.fit_tail_exponent(cdf, p["tail_fraction"])
        rep["tail"] = {"gamma": t.exponent, "xmin": t.xmin, "n_tail": t.n_tail, "stderr": t.stderr,
                       "levy_regime": t.levy_regime, "stable": t.stable, "hill_drift": t.hill_drift}
    except CryptoFactsError as exc:
        rep["tail"] = {"error": f"{type(exc).__name__}: {exc}"}
    if p["stretched_range"]:
        try:
            f = dist.fit_stretched_exponential(cdf, tuple(p["stretched_range"]))
            rep["stretched_exponential"] = {"eta": f.eta, "scale": f.scale, "sse": f.sse, "n_points": f.n_points}
        except CryptoFactsError as exc:
            rep["stretched_exponential"] = {"error": f"{type(exc).__name__}: {exc}"}
    return rep


def run_cdf(assets: List[Asset], p: dict, out: Path, workers: int = 1) -> List[Path]:
    """Survival functions per asset and quantity, plus liquidity-group averages."""
    files = []
    by_group: Dict[tuple, list] = {}
    for a in assets:
        stats = _stats_or_none(a)
        for quantity, x in _cdf_inputs(a, p["dt"]).items():
            cdf = dist.empirical_cdf(x)
            stem = f"cdf_{a.label}_{quantity}"
            files.append(write_columns(out / f"{stem}.csv", ["x", "survival"], [cdf.sorted_values, cdf.survival]))
            files.append(write_json(out / f"{stem}.json", _cdf_report(cdf, p)))
            if stats is not None:
                by_group.setdefault((stats.group, quantity), []).append(cdf)
    for (group, quantity), cdfs in sorted(by_group.items()):
        avg = dist.group_average_cdf(cdfs, p["n_grid"])
        stem = f"cdf_group{group}_{quantity}"
        files.append(write_columns(out / f"{stem}.csv", ["x", "survival"], [avg.sorted_values, avg.survival]))
        rep = {"n_assets": len(cdfs)}
        x_lo = np.quantile(avg.sorted_values, 0.5)
        try:
            rep["tail_lsq"] = vars(dist.fit_power_law_lsq(avg, (x_lo, np.inf)))
        except CryptoFactsError as exc:
            rep["tail_lsq"] = {"error": f"{type(exc).__name__}: {exc}"}
        files.append(write_json(out / f"{stem}.json", rep))
    return files


def run_acf(assets: List[Asset], p: dict, out: Path, workers: int = 1) -> List[Path]:
    files = []
    for a in assets:
        x = np.abs(a.pairs[:, 1]) if a.pairs is not None else np.abs(a.returns(p["dt"]))
        max_lag = min(p["max_lag"], len(x) - 1)
        res = acf_mod.autocorrelation(x, max_lag, per_decade=p["per_decade"])
        ranges = acf_mod.detect_power_law_ranges(res, r2_min=p["r2_min"], min_decades=p["min_decades"], tol=p["tol"])
        files.append(write_columns(out / f"acf_{a.label}.csv", ["tau", "C"], [res.lags, res.values]))
        files.append(write_json(out / f"acf_{a.label}.json", {
            "n": res.n,
            "noise_level": res.noise_level,
            "significance_exit": res.significance_exit,
            "zero_crossing": res.zero_crossing,
            "power_law_ranges": [vars(r) for r in ranges],
        }))
    return files


def run_mf(assets: List[Asset], p: dict, out: Path, workers: int = 1) -> List[Path]:
    files = []
    for a in assets:
        x = _normalized(a.returns(p["dt"]))
        cfg = mfractal.DetrendConfig(_scales(p, len(x)), _q_grid(p), p["poly_degree"])
        surf = mfractal.fluctuation_surface(x, cfg=cfg, workers=workers, label=a.label)
        files.append(write_grid(out / f"mf_{a.label}_F.csv", "q", surf.q_grid, surf.scales, surf.F))
        qq, ss = np.meshgrid(surf.q_grid, surf.scales, indexing="ij")
        with np.errstate(divide="ignore", invalid="ignore"):
            logF = np.log10(surf.F)
        files.append(write_columns(out / f"mf_{a.label}_loglog.csv", ["q", "log10_s", "log10_F"],
                                   [qq.ravel(), np.log10(ss.ravel()), logF.ravel()]))
        rep = {"label": a.label, "n": len(x), "poly_degree": p["poly_degree"],
               "excluded_segments": int(surf.excluded.sum())}
        fit = tuple(p["fit_range"]) if p["fit_range"] else mfractal.find_scaling_range(surf)
        rep["fit_range_requested"] = fit
        spec = mfractal.hurst_spectrum(surf, fit)
        rep.update({"fit_range": spec.fit_range, "q": spec.q_grid, "h": spec.h_of_q, "h_stderr": spec.h_stderr,
                    "fit_r2": spec.fit_r2, "alpha": spec.alpha, "f_alpha": spec.f_alpha,
                    "width": spec.width, "asymmetry": spec.asymmetry})
        files.append(write_json(out / f"mf_{a.label}_spectrum.json", rep))
    return files


def _aligned_returns(assets: List[Asset], dt: int, sessions=None):
    """Normalized returns of all assets on their common (in-session) timestamps."""
    if all(a.bars is not None for a in assets):
        common = assets[0].bars.timestamp
        for a in assets[1:]:
            common = np.intersect1d(common, a.bars.timestamp, assume_unique=True)
        if sessions is not None:
            common = common[sessions.contains(common)]
        if len(common) == 0:
            raise AlignmentError("no common timestamps")
        subs = [a.bars.subset(np.isin(a.bars.timestamp, common, assume_unique=True)) for a in assets]
        return [_normalized(ingest.log_returns(b, dt).values) for b in subs]
    if any(a.bars is not None for a in assets):
        raise DomainError("cannot mix bar and value series in a joint analysis")
    series = [a.returns(dt) for a in assets]
    if len({len(x) for x in series}) != 1:
        raise DomainError("value series must share one length to be paired")
    return [_normalized(x) for x in series]


def run_rho(assets: List[Asset], p: dict, out: Path, workers: int = 1, sessions=None) -> List[Path]:
    files = []
    by_label = {a.label: a for a in assets}
    if p["pairs"]:
        pairs = p["pairs"]
    else:
        # default: every pair of inputs of the same kind
        pairs = [list(c) for c in combinations(sorted(by_label), 2)
                 if by_label[c[0]].kind == by_label[c[1]].kind != "pairs"]
    q_grid = np.asarray(p["q"], dtype=float)

    def emit(stem, x, y):
        cfg = mfractal.DetrendConfig(_scales(p, len(x)), q_grid, p["poly_degree"])
        res = mfractal.rho_q(x, y, cfg, workers=workers)
        files.append(write_grid(out / f"{stem}.csv", "q", res.q_grid, res.scales, res.rho))

    for la, lb in pairs:
        if la not in by_label or lb not in by_label:
            raise DomainError(f"unknown asset in pair ({la}, {lb})")
        x, y = _aligned_returns([by_label[la], by_label[lb]], p["dt"], sessions)
        emit(f"rho_{la}_{lb}", x, y)
    if p["return_volume"]:
        for a in assets:
            if a.bars is not None:
                rets, vol = ingest.return_volume_pairs(a.bars, p["dt"])
                emit(f"rho_{a.label}_absret_volume", _normalized(np.abs(rets.values)), _normalized(vol.values))
            elif a.pairs is not None:
                emit(f"rho_{a.label}_absret_volume", _normalized(a.pairs[:, 1]), _normalized(a.pairs[:, 0]))
    return files


def run_impact(assets: List[Asset], p: dict, out: Path, workers: int = 1) -> List[Path]:
    files = []
    cfg = impact.ImpactConfig(kappa_grid=p["kappas"], p=p["p"], cells_per_decade=p["cells_per_decade"],
                              min_count=p["min_count"], min_selected=p["min_selected"])
    for a in assets:
        if a.pairs is not None:
            jobs = [("na", a.pairs[:, 1], a.pairs[:, 0])]
        else:
            jobs = []
            for dt in p["dt_list"]:
                rets, vol = ingest.return_volume_pairs(a.need_bars("impact"), dt)
                jobs.append((dt, np.abs(rets.values), vol.values))
        for dt, r, v in jobs:
            # both quantities in units of their standard deviation
            curves = impact.conditional_impact(r / np.std(r), v / np.std(v), cfg)
            for kappa, c in curves.items():
                files.append(write_columns(out / f"impact_{a.label}_dt{dt}_k{num(kappa)}.csv",
                                           ["v_center", "mean", "stdev", "count", "fitted"],
                                           [c.v_centers, c.means, c.stdevs, c.counts, c.fitted.astype(int)]))
            verdicts = impact.model_selection(curves) if len(curves) > 1 else []
            files.append(write_json(out / f"impact_{a.label}_dt{dt}.json", {
                "slope_convention": "E[|r|^kappa | v] ~ v^slope; alpha = slope / kappa; "
                                    "slope 1 means |r| ~ v^(1/kappa)",
                "curves": [{"kappa": c.kappa, "slope": c.fit_slope, "alpha": c.alpha, "r2": c.fit_r2,
                            "rmse": c.fit_rmse, "fit_range": c.fit_range} for c in curves.values()],
                "ranking": [vars(k) for k in verdicts],
            }))
    return files


def run_mst(assets: List[Asset], p: dict, out: Path, workers: int = 1, sessions=None) -> List[Path]:
    if len(assets) < 2:
        raise DomainError("mst needs at least two assets")
    series = _aligned_returns(assets, p["dt"], sessions)
    m = network.correlation_matrix(series, p["q"], p["s"], [a.label for a in assets], p["poly_degree"])
    stats = [_stats_or_none(a) for a in assets]
    attrs = {}
    if all(s is not None for s in stats):
        m = m.sorted_by([s.mean_intertrade_time_s for s in stats])
        attrs = {s.label: {"group": s.group, "mean_volume": s.mean_volume_per_min} for s in stats}
    files = [write_grid(out / "mst_rho.csv", "", m.labels, m.labels, m.rho)]
    d = network.to_distances(m)
    files.append(write_grid(out / "mst_distance.csv", "", d.labels, d.labels, d.d))
    g = network.minimal_spanning_tree(d, attrs)
    files.append(out / "mst_tree.json")
    g.to_json(files[-1])
    files.append(out / "mst_tree.dot")
    g.to_dot(files[-1])
    hubs = network.hub_report(g)
    files.append(write_columns(out / "mst_hubs.csv", ["label", "degree"],
                               [[h[0] for h in hubs], [h[1] for h in hubs]]))
    return files


def run_intermarket(assets: List[Asset], p: dict, out: Path, workers: int = 1, sessions=None) -> List[Path]:
    by_label = {a.label: a for a in assets}
    missing = [lab for lab in list(p["crypto"]) + list(p["traditional"]) if lab not in by_label]
    if missing or not p["crypto"] or not p["traditional"]:
        raise DomainError(f"intermarket needs crypto and traditional labels present in the assets; missing {missing}")
    cryptos = {lab: by_label[lab].need_bars("intermarket") for lab in p["crypto"]}
    trads = {lab: by_label[lab].need_bars("intermarket") for lab in p["traditional"]}
    keys = {}
    for lab in cryptos:
        st = _stats_or_none(by_label[lab])
        keys[lab] = st.mean_intertrade_time_s if st is not None else 0.0
    block = network.intermarket_matrix(cryptos, trads, p["q"], p["s"], sessions, p["dt"], keys,
                                       p["coverage_floor"], p["poly_degree"])
    return [write_grid(out / "intermarket_rho.csv", "", block.row_labels, block.col_labels, block.rho),
            write_grid(out / "intermarket_coverage.csv", "", block.row_labels, block.col_labels, block.coverage)]


RUNNERS = {
    "stats": run_stats, "cdf": run_cdf, "acf": run_acf, "mf": run_mf, "rho": run_rho,
    "impact": run_impact, "mst": run_mst, "intermarket": run_intermarket,
}
NEEDS_SESSIONS = ("rho", "mst", "intermarket")

# input kinds each analysis can use
ACCEPTS = {
    "stats": ("bars",), "cdf": ("bars", "values", "pairs"), "acf": ("bars", "values", "pairs"),
    "mf": ("bars", "values"), "rho": ("bars", "values", "pairs"), "impact": ("bars", "pairs"),
    "mst": ("bars", "values"), "intermarket": ("bars",),
}


def compatible(name: str, assets: List[Asset]):
    """Split ``assets`` into those ``name`` can use and the labels it skips.

    Joint analyses (mst) never mix bars with value series; bars win when both are present.
    """
    kinds = ACCEPTS[name]
    if name == "mst" and any(a.bars is not None for a in assets):
        kinds = ("bars",)
    use = [a for a in assets if a.kind in kinds]
    skipped = sorted(a.label for a in assets if a.kind not in kinds)
    if not use:
        raise DomainError(f"no input of kind {'/'.join(kinds)} for {name}")
    return use, skipped


# ---------------------------------------------------------------- run configuration


@dataclass
class RunConfig:
    data_dir: Optional[Path]
    assets: List[str]
    generate: List[dict]
    sessions: Optional[Path]
    analyses: List[str]
    params: Dict[str, dict]
    output_dir: Path
    workers: int = 1
    seed: int = 0
    bar_format: str = "default"

    def echo(self) -> dict:
        return {
            "data_dir": str(self.data_dir) if self.data_dir else None,
            "assets": self.assets,
            "generate": self.generate,
            "sessions": str(self.sessions) if self.sessions else None,
            "analyses": self.analyses,
            "params": self.params,
            "seed": self.seed,
            "bar_format": self.bar_format,
        }


def _set_dotted(raw: dict, key: str, value: str):
    try:
        parsed = tomllib.loads(f"v = {value}")["v"]
    except tomllib.TOMLDecodeError:
        parsed = value
    *head, last = key.split(".")
    node = raw
    for h in head:
        node = node.setdefault(h, {})
    node[last] = parsed


def load_config(path, overrides: Optional[Dict[str, str]] = None) -> RunConfig:
    """Read and validate a TOML run configuration; ``overrides`` maps dotted keys to TOML values."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} not found")
    with open(path, "rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    for key, value in (overrides or {}).items():
        _set_dotted(raw, key, value)
    return build_config(raw, base=path.parent)


def build_config(raw: dict, base: Path = Path(".")) -> RunConfig:
    known = {"data_dir", "assets", "generate", "sessions", "analyses", "output_dir", "workers",
             "seed", "bar_format", *ANALYSES}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")

    def rel(p):
        p = Path(p)
        return p if p.is_absolute() else base / p

    data_dir = raw.get("data_dir") or os.environ.get(DATA_ENV)
    data_dir = rel(data_dir) if data_dir else None
    if data_dir is not None and not data_dir.is_dir():
        raise ConfigError(f"data_dir {data_dir} does not exist")

    analyses = list(raw.get("analyses", []))
    if not analyses:
        raise ConfigError("analyses must list at least one of " + ", ".join(ANALYSES))
    bad = [a for a in analyses if a not in ANALYSES]
    if bad:
        raise ConfigError(f"unknown analyses {bad}")

    assets = raw.get("assets", [])
    if isinstance(assets, str):
        assets = [assets]
    resolved = []
    for entry in assets:
        root = data_dir or base
        matches = sorted(glob.glob(str(root / entry))) if any(c in entry for c in "*?[") else [str(root / entry)]
        if not matches:
            raise ConfigError(f"asset pattern {entry!r} matched nothing in {root}")
        for m in matches:
            if not Path(m).is_file():
                raise ConfigError(f"asset file {m} not found")
            resolved.append(m)

    seed = int(raw.get("seed", 0))
    gens = []
    for k, g in enumerate(raw.get("generate", [])):
        g = dict(g)
        if "label" not in g or "kind" not in g:
            raise ConfigError("each [[generate]] entry needs label and kind")
        spec = dict(kind=g["kind"], length=int(g.get("length", 100_000)),
                    seed=int(g.get("seed", seed + k)), params=dict(g.get("params", {})))
        try:
            synth.GeneratorSpec(**spec)
        except (SpecError, TypeError) as exc:
            raise ConfigError(f"generate[{g['label']}]: {exc}") from exc
        gens.append({"label": g["label"], **spec})
    if not resolved and not gens:
        raise ConfigError("no assets configured")

    sessions = raw.get("sessions")
    if sessions:
        sessions = (data_dir or base) / sessions if not Path(sessions).is_absolute() else Path(sessions)
        if not sessions.is_file():
            sessions = rel(raw["sessions"])
        if not sessions.is_file():
            raise ConfigError(f"session file {raw['sessions']} not found")
        ingest.parse_session_spec(sessions)

    params = {name: analysis_params(name, raw.get(name)) for name in analyses}
    workers = int(raw.get("workers", 1))
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    fmt = raw.get("bar_format", "default")
    if fmt not in ("default", "binance"):
        raise ConfigError(f"bar_format must be 'default' or 'binance', got {fmt!r}")
    return RunConfig(data_dir, resolved, gens, sessions or None, analyses, params,
                     rel(raw.get("output_dir", "out")), workers, seed, fmt)


def _timestamp() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    t = time.gmtime(int(epoch)) if epoch else time.gmtime()
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", t)


def run(cfg: RunConfig) -> dict:
    """Execute every configured analysis and write ``manifest.json``.

    A failing analysis is recorded in the manifest and does not stop the
    others.  Returns the manifest dictionary.
    """
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    assets, inputs = [], []
    for path in cfg.assets:
        a = load_asset(path, cfg.bar_format)
        assets.append(a)
        shown = os.path.relpath(path, cfg.data_dir) if cfg.data_dir else str(path)
        inputs.append({"label": a.label, "path": shown, "sha256": sha256(path)})
    if cfg.generate:
        gen_dir = out / "generated"
        gen_dir.mkdir(exist_ok=True)
        for g in cfg.generate:
            spec = synth.GeneratorSpec(g["kind"], g["length"], g["seed"], g["params"])
            path = write_values(gen_dir / f"{g['label']}.csv", synth.generate(spec))
            assets.append(load_asset(path, label=g["label"]))
            inputs.append({"label": g["label"], "path": str(path.relative_to(out)),
                           "sha256": sha256(path), "generator": g})
    sessions = ingest.parse_session_spec(cfg.sessions) if cfg.sessions else None
    if sessions is not None:
        inputs.append({"label": "sessions", "path": str(cfg.sessions), "sha256": sha256(cfg.sessions)})

    def job(name):
        fn = RUNNERS[name]
        kwargs = {"sessions": sessions} if name in NEEDS_SESSIONS else {}
        try:
            use, skipped = compatible(name, assets)
            files = fn(use, cfg.params[name], out, workers=cfg.workers, **kwargs)
            rec = {"status": "ok", "files": sorted(str(Path(f).relative_to(out)) for f in files)}
            if skipped:
                rec["skipped_inputs"] = skipped
            return name, rec
        except (CryptoFactsError, ValueError, KeyError, ArithmeticError) as exc:
            return name, {"status": "error", "error": f"{type(exc).__name__}: {exc}"}

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = dict(pool.map(job, cfg.analyses))
    else:
        results = dict(job(name) for name in cfg.analyses)

    outputs = []
    for name in cfg.analyses:
        for f in results[name].get("files", []):
            outputs.append({"path": f, "sha256": sha256(out / f), "analysis": name})
    for rec in inputs:
        if "generator" in rec:
            outputs.append({"path": rec["path"], "sha256": rec["sha256"], "analysis": "generate"})
    manifest = {
        "created_utc": _timestamp(),
        "config": cfg.echo(),
        "inputs": inputs,
        "analyses": {name: results[name] for name in cfg.analyses},
        "outputs": sorted(outputs, key=lambda o: o["path"]),
        "ok": all(r["status"] == "ok" for r in results.values()),
    }
    write_json(out / "manifest.json", manifest)
    return manifest
