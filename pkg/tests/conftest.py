import numpy as np
import pytest

from cryptofacts.ingest import MINUTE_MS, BarSeries

# Monday 2024-01-01 00:00 UTC
MONDAY_MS = 1_704_067_200_000


def make_bars(n=500, seed=0, trades=10, start_ms=MONDAY_MS, label="X", scale=1e-3, common=None, mix=0.0):
    """Gapless 1-minute bars driven by Gaussian log-returns."""
    rng = np.random.default_rng(seed)
    r = rng.standard_normal(n)
    if common is not None:
        r = mix * common[:n] + np.sqrt(1 - mix**2) * r
    close = 100 * np.exp(np.cumsum(scale * r))
    vol = 1e3 * (1 + np.abs(r)) * rng.uniform(0.5, 1.5, n)
    return BarSeries.from_closes(close, volume=vol, trade_count=np.full(n, trades), start_ms=start_ms, label=label)


@pytest.fixture
def bars():
    return make_bars()


__all__ = ["make_bars", "MONDAY_MS", "MINUTE_MS"]
