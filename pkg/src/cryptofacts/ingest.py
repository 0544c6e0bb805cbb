"""Bar ingestion, return/volume series, per-asset statistics and calendar alignment.

Bars are 1-minute OHLCV records stored as CSV with the header
``timestamp,open,high,low,close,volume,trade_count`` (UTC epoch milliseconds,
volume in quote currency).  Binance kline exports are read through
:data:`BINANCE_KLINE`.
"""

from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import pandas as pd

from .errors import (
    AlignmentError,
    DegenerateSeriesError,
    DomainError,
    IntegrityError,
    ParseError,
)

MINUTE_MS = 60_000
BAR_FIELDS = ("timestamp", "open", "high", "low", "close", "volume", "trade_count")


@dataclass(frozen=True)
class BarFormat:
    """Describes how to read a bar file.

    ``columns`` maps each bar field to a column name (when ``header`` is true)
    or a zero-based column index (when it is false).
    """

    columns: dict = field(default_factory=lambda: {f: f for f in BAR_FIELDS})
    header: bool = True
    delimiter: str = ","
    timestamp_unit: str = "ms"
    interval_ms: int = MINUTE_MS


DEFAULT_FORMAT = BarFormat()

# open_time, open, high, low, close, base volume, close_time, quote volume,
# number of trades, taker buy base, taker buy quote, ignore
BINANCE_KLINE = BarFormat(
    columns={
        "timestamp": 0,
        "open": 1,
        "high": 2,
        "low": 3,
        "close": 4,
        "volume": 7,
        "trade_count": 8,
    },
    header=False,
)

_UNIT_TO_MS = {"s": 1000.0, "ms": 1.0, "us": 1e-3, "ns": 1e-6}


@dataclass
class BarSeries:
    timestamp: np.ndarray
    open: np.ndarray
    high: np.ndarray
    low: np.ndarray
    close: np.ndarray
    volume: np.ndarray
    trade_count: np.ndarray
    label: str = ""
    interval_ms: int = MINUTE_MS
    gaps: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))

    def __post_init__(self):
        self.timestamp = np.asarray(self.timestamp, dtype=np.int64)
        for name in ("open", "high", "low", "close", "volume"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        self.trade_count = np.asarray(self.trade_count, dtype=np.int64)
        if len(self.gaps) == 0 and len(self.timestamp) > 1:
            self.gaps = find_gaps(self.timestamp, self.interval_ms)

    def __len__(self):
        return len(self.timestamp)

    @property
    def positions(self) -> np.ndarray:
        """Integer grid position of every bar relative to the first one."""
        if len(self) == 0:
            return np.empty(0, dtype=np.int64)
        return (self.timestamp - self.timestamp[0]) // self.interval_ms

    @property
    def span_minutes(self) -> float:
        if len(self) == 0:
            return 0.0
        span_ms = self.timestamp[-1] - self.timestamp[0] + self.interval_ms
        return span_ms / MINUTE_MS

    def subset(self, mask) -> "BarSeries":
        mask = np.asarray(mask)
        return BarSeries(
            self.timestamp[mask],
            self.open[mask],
            self.high[mask],
            self.low[mask],
            self.close[mask],
            self.volume[mask],
            self.trade_count[mask],
            label=self.label,
            interval_ms=self.interval_ms,
        )

    @classmethod
    def from_closes(cls, closes, *, volume=None, trade_count=None, start_ms=0,
                    interval_ms=MINUTE_MS, label=""):
        """Build a gapless series from closing prices (open = high = low = close)."""
        closes = np.asarray(closes, dtype=float)
        n = len(closes)
        ts = start_ms + interval_ms * np.arange(n, dtype=np.int64)
        volume = np.zeros(n) if volume is None else volume
        trade_count = np.zeros(n, dtype=np.int64) if trade_count is None else trade_count
        return cls(ts, closes, closes, closes, closes, volume, trade_count,
                   label=label, interval_ms=interval_ms)


def find_gaps(timestamps: np.ndarray, interval_ms: int) -> np.ndarray:
    """Timestamps of the grid points missing between the first and last bar."""
    if len(timestamps) < 2:
        return np.empty(0, dtype=np.int64)
    steps = np.diff(timestamps) // interval_ms
    holes = np.nonzero(steps > 1)[0]
    if len(holes) == 0:
        return np.empty(0, dtype=np.int64)
    missing = [timestamps[i] + interval_ms * np.arange(1, steps[i], dtype=np.int64)
               for i in holes]
    return np.concatenate(missing)


def parse_bars(path, fmt: BarFormat = DEFAULT_FORMAT, label: Optional[str] = None) -> BarSeries:
    """Read and validate a bar file.

    Raises ParseError (with the 1-based file line) for malformed rows and
    IntegrityError for rows violating the bar invariants, duplicate
    timestamps or timestamps off the bar grid.  Missing minutes are kept as
    ``gaps`` metadata, never filled.
    """
    path = Path(path)
    if label is None:
        label = path.stem
    header = 0 if fmt.header else None
    try:
        raw = pd.read_csv(path, sep=fmt.delimiter, header=header, dtype=str,
                          keep_default_na=False, skipinitialspace=True)
    except pd.errors.ParserError as exc:
        match = re.search(r"line (\d+)", str(exc))
        raise ParseError(str(exc), int(match.group(1)) if match else None) from exc
    except pd.errors.EmptyDataError:
        raise ParseError("empty bar file")

    first_line = 2 if fmt.header else 1
    cols = {}
    for name in BAR_FIELDS:
        key = fmt.columns[name]
        if key not in raw.columns:
            raise ParseError(f"missing column {key!r} for field {name!r}", 1)
        text = raw[key].str.strip()
        try:
            parsed = text.to_numpy(dtype=float)  # exact decimal conversion
        except ValueError:
            parsed = pd.to_numeric(text, errors="coerce").to_numpy(dtype=float)
        bad = np.nonzero(~np.isfinite(parsed))[0]
        if len(bad):
            row = int(bad[0])
            raise ParseError(f"malformed {name} value {raw[key].iloc[row]!r}", first_line + row)
        cols[name] = parsed

    lines = first_line + np.arange(len(raw))
    ts = np.round(cols["timestamp"] * _UNIT_TO_MS[fmt.timestamp_unit]).astype(np.int64)
    _check_bar_rows(cols, lines)

    order = np.argsort(ts, kind="stable")
    ts = ts[order]
    dup = np.nonzero(np.diff(ts) <= 0)[0]
    if len(dup):
        i = order[dup[0] + 1]
        raise IntegrityError(f"line {lines[i]}: duplicate timestamp {ts[dup[0] + 1]}")
    if len(ts) and np.any((ts - ts[0]) % fmt.interval_ms):
        i = order[np.nonzero((ts - ts[0]) % fmt.interval_ms)[0][0]]
        raise IntegrityError(f"line {lines[i]}: timestamp off the {fmt.interval_ms} ms bar grid")

    return BarSeries(
        ts,
        cols["open"][order],
        cols["high"][order],
        cols["low"][order],
        cols["close"][order],
        cols["volume"][order],
        cols["trade_count"][order].astype(np.int64),
        label=label,
        interval_ms=fmt.interval_ms,
    )


def _check_bar_rows(cols, lines):
    o, h, l, c = cols["open"], cols["high"], cols["low"], cols["close"]
    checks = [
        (np.minimum(np.minimum(o, c), l) <= 0, "non-positive price"),
        (l > np.minimum(o, c), "low above min(open, close)"),
        (h < np.maximum(o, c), "high below max(open, close)"),
        (cols["volume"] < 0, "negative volume"),
        (cols["trade_count"] < 0, "negative trade_count"),
    ]
    for bad, what in checks:
        idx = np.nonzero(bad)[0]
        if len(idx):
            raise IntegrityError(f"line {lines[idx[0]]}: {what}")


def write_bars(bars: BarSeries, path) -> None:
    frame = pd.DataFrame({
        "timestamp": bars.timestamp,
        "open": bars.open,
        "high": bars.high,
        "low": bars.low,
        "close": bars.close,
        "volume": bars.volume,
        "trade_count": bars.trade_count,
    })
    frame.to_csv(path, index=False, float_format="%.17g")


# ---------------------------------------------------------------- series


@dataclass
class ReturnSeries:
    dt: int
    values: np.ndarray
    timestamps: Optional[np.ndarray] = None
    n_dropped: int = 0
    mean: Optional[float] = None
    stdev: Optional[float] = None
    normalized: Optional[np.ndarray] = None

    def __len__(self):
        return len(self.values)


@dataclass
class VolumeSeries:
    dt: int
    values: np.ndarray
    timestamps: Optional[np.ndarray] = None
    mean: Optional[float] = None
    stdev: Optional[float] = None
    normalized: Optional[np.ndarray] = None

    def __len__(self):
        return len(self.values)


def _bars_per_step(bars: BarSeries, dt) -> int:
    if dt <= 0:
        raise DomainError(f"dt must be positive, got {dt}")
    span_ms = dt * MINUTE_MS
    k = int(round(span_ms / bars.interval_ms))
    if k < 1 or abs(k * bars.interval_ms - span_ms) > 1e-6:
        raise DomainError(f"dt={dt} min is not a multiple of the {bars.interval_ms} ms bar interval")
    return k


def _dense(bars: BarSeries, values, fill=np.nan):
    pos = bars.positions
    out = np.full(int(pos[-1]) + 1, fill, dtype=float)
    out[pos] = values
    return out


def log_returns(bars: BarSeries, dt: int = 1) -> ReturnSeries:
    """Log-returns on a grid of step ``dt`` minutes anchored at the first bar.

    Returns whose endpoints fall on a missing bar are dropped and counted in
    ``n_dropped``.
    """
    if len(bars) < 2:
        raise DomainError("need at least two closes")
    if np.any(bars.close <= 0):
        raise DomainError("non-positive close price")
    k = _bars_per_step(bars, dt)
    grid_close = _dense(bars, bars.close)[::k]
    grid_ts = bars.timestamp[0] + k * bars.interval_ms * np.arange(len(grid_close), dtype=np.int64)
    raw = np.diff(np.log(grid_close))
    ok = np.isfinite(raw)
    return ReturnSeries(
        dt=dt,
        values=raw[ok],
        timestamps=grid_ts[1:][ok],
        n_dropped=int(np.count_nonzero(~ok)),
    )


def volume_series(bars: BarSeries, dt: int = 1) -> VolumeSeries:
    """Volume summed over consecutive blocks of ``dt`` minutes.

    Blocks are anchored at the first bar; the last block may be partial, so
    the block sums always add up to the total traded volume.
    """
    k = _bars_per_step(bars, dt)
    dense = _dense(bars, bars.volume, fill=0.0)
    starts = np.arange(0, len(dense), k)
    values = np.add.reduceat(dense, starts)
    ts = bars.timestamp[0] + bars.interval_ms * starts
    return VolumeSeries(dt=dt, values=values, timestamps=ts)


def return_volume_pairs(bars: BarSeries, dt: int = 1):
    """Log-returns with the volume traded over each return's interval.

    The volume attached to the return ending at grid point ``t_i`` is the sum
    over the bars in ``(t_{i-1}, t_i]``.
    """
    rets = log_returns(bars, dt)
    k = _bars_per_step(bars, dt)
    csum = np.concatenate([[0.0], np.cumsum(_dense(bars, bars.volume, fill=0.0))])
    end = (rets.timestamps - bars.timestamp[0]) // bars.interval_ms
    vol = csum[end + 1] - csum[end + 1 - k]
    return rets, VolumeSeries(dt=dt, values=vol, timestamps=rets.timestamps.copy())


def normalize(series: Union[ReturnSeries, VolumeSeries]):
    """Fill ``mean``, ``stdev`` and ``normalized`` using the full sample.

    The standard deviation uses the population convention (divide by N).
    """
    values = np.asarray(series.values, dtype=float)
    if len(values) == 0:
        raise DegenerateSeriesError("empty series")
    mu = float(np.mean(values))
    sigma = float(np.std(values))
    if not sigma > 0:
        raise DegenerateSeriesError("series has zero variance")
    return replace(series, mean=mu, stdev=sigma, normalized=(values - mu) / sigma)


def cumulative_returns(returns) -> np.ndarray:
    values = returns.values if isinstance(returns, ReturnSeries) else returns
    return np.cumsum(np.asarray(values, dtype=float))


# ---------------------------------------------------------------- stats

GROUP_BOUNDS_S = (1.0, 2.0)


def classify_group(mean_intertrade_time_s: float) -> str:
    """Liquidity group from the average inter-transaction time (closed-left bins)."""
    if mean_intertrade_time_s < GROUP_BOUNDS_S[0]:
        return "I"
    if mean_intertrade_time_s < GROUP_BOUNDS_S[1]:
        return "II"
    return "III"


@dataclass
class AssetStats:
    label: str
    mean_intertrade_time_s: float
    zero_return_fraction: float
    mean_volume_per_min: float
    capitalization: Optional[float]
    group: str


def asset_stats(bars: BarSeries, returns: ReturnSeries,
                capitalization: Optional[float] = None) -> AssetStats:
    """Per-asset summary statistics.

    The inter-transaction time is the covered calendar time divided by the
    total trade count; the volume per minute is taken over the same span.
    """
    total_trades = int(np.sum(bars.trade_count))
    if total_trades == 0:
        raise DomainError(f"{bars.label or 'series'}: zero total trades, inter-transaction time undefined")
    minutes = bars.span_minutes
    dt_s = minutes * 60.0 / total_trades
    zero_frac = float(np.mean(returns.values == 0)) if len(returns) else 0.0
    return AssetStats(
        label=bars.label,
        mean_intertrade_time_s=dt_s,
        zero_return_fraction=zero_frac,
        mean_volume_per_min=float(np.sum(bars.volume)) / minutes,
        capitalization=capitalization,
        group=classify_group(dt_s),
    )


STATS_COLUMNS = ("ticker", "delta_t_s", "zero_fraction", "W", "C", "group")


def write_stats_csv(stats: Sequence[AssetStats], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(STATS_COLUMNS)
        for s in stats:
            writer.writerow([
                s.label,
                f"{s.mean_intertrade_time_s:.6g}",
                f"{s.zero_return_fraction:.6g}",
                f"{s.mean_volume_per_min:.10g}",
                "" if s.capitalization is None else f"{s.capitalization:.10g}",
                s.group,
            ])


# ---------------------------------------------------------------- calendars

_DAYS = ("MON", "TUE", "WED", "THU", "FRI", "SAT", "SUN")
WEEK_MIN = 7 * 24 * 60
DAY_MIN = 24 * 60


def _hhmm(text: str) -> int:
    h, m = text.split(":")
    h, m = int(h), int(m)
    if not (0 <= h <= 24 and 0 <= m < 60):
        raise ParseError(f"bad time {text!r}")
    return h * 60 + m


@dataclass
class SessionSpec:
    """Weekly UTC trading sessions.

    ``open`` holds half-open ``[start, end)`` intervals in minutes since
    Monday 00:00 (an interval with end <= start wraps over the week end);
    ``breaks`` holds daily ``[start, end)`` intervals in minutes since 00:00
    that are excluded every day.
    """

    open: list = field(default_factory=lambda: [(0, WEEK_MIN)])
    breaks: list = field(default_factory=list)

    @classmethod
    def always_open(cls) -> "SessionSpec":
        return cls()

    def contains(self, timestamps_ms) -> np.ndarray:
        ts = np.asarray(timestamps_ms, dtype=np.int64)
        minute = ts // MINUTE_MS
        # 1970-01-01 was a Thursday
        week_min = (minute + 3 * DAY_MIN) % WEEK_MIN
        day_min = minute % DAY_MIN
        inside = np.zeros(ts.shape, dtype=bool)
        for start, end in self.open:
            if end > start:
                inside |= (week_min >= start) & (week_min < end)
            else:
                inside |= (week_min >= start) | (week_min < end)
        for start, end in self.breaks:
            if end > start:
                inside &= ~((day_min >= start) & (day_min < end))
            else:
                inside &= ~((day_min >= start) | (day_min < end))
        return inside


def parse_session_spec(source) -> SessionSpec:
    """Parse a session file.

    One directive per line, ``#`` starts a comment::

        open SUN 22:00 - FRI 20:15
        break daily 20:15 - 22:00
        open ALL
    """
    if isinstance(source, (str, Path)) and Path(source).exists():
        text = Path(source).read_text()
    else:
        text = str(source)
    opens, breaks = [], []
    for lineno, line in enumerate(io.StringIO(text), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.replace("-", " - ").split()
        try:
            if tokens[0].lower() == "open" and len(tokens) == 2 and tokens[1].upper() == "ALL":
                opens.append((0, WEEK_MIN))
            elif tokens[0].lower() == "open":
                d1, t1, dash, d2, t2 = tokens[1:]
                start = _DAYS.index(d1.upper()) * DAY_MIN + _hhmm(t1)
                end = _DAYS.index(d2.upper()) * DAY_MIN + _hhmm(t2)
                opens.append((start, end))
            elif tokens[0].lower() == "break" and tokens[1].lower() == "daily":
                t1, dash, t2 = tokens[2:]
                breaks.append((_hhmm(t1), _hhmm(t2)))
            else:
                raise ValueError(line)
        except (ValueError, IndexError) as exc:
            raise ParseError(f"cannot parse session directive {line!r}", lineno) from exc
    if not opens:
        raise ParseError("session spec defines no open interval")
    return SessionSpec(open=opens, breaks=breaks)


@dataclass
class AlignedPair:
    timestamps: np.ndarray
    bars_a: BarSeries
    bars_b: BarSeries
    coverage_fraction: float

    @property
    def series_a(self) -> np.ndarray:
        return self.bars_a.close

    @property
    def series_b(self) -> np.ndarray:
        return self.bars_b.close

    def log_returns(self, dt: int = 1):
        """Log-returns of both legs on the shared grid; steps spanning excluded time are dropped."""
        return log_returns(self.bars_a, dt), log_returns(self.bars_b, dt)


def align_calendars(a: BarSeries, b: BarSeries,
                    sessions: Optional[SessionSpec] = None) -> AlignedPair:
    """Keep the timestamps present in both series and inside a trading session."""
    if a.interval_ms != b.interval_ms:
        raise AlignmentError("bar intervals differ")
    sessions = sessions or SessionSpec.always_open()
    common = np.intersect1d(a.timestamp, b.timestamp, assume_unique=True)
    common = common[sessions.contains(common)]
    if len(common) == 0:
        raise AlignmentError(f"no common in-session timestamps for {a.label!r} and {b.label!r}")
    bars_a = a.subset(np.isin(a.timestamp, common, assume_unique=True))
    bars_b = b.subset(np.isin(b.timestamp, common, assume_unique=True))
    return AlignedPair(common, bars_a, bars_b, len(common) / len(a))
