import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cryptofacts.acf import AcfResult, autocorrelation, detect_power_law_ranges, lag_grid
from cryptofacts.errors import DegenerateSeriesError, DomainError
from cryptofacts.synth import GeneratorSpec, generate


def _fixture(values_of_tau, max_lag=10_000, n=10**9):
    lags = lag_grid(max_lag)
    vals = np.ones(len(lags))
    vals[1:] = values_of_tau(lags[1:].astype(float))
    return AcfResult(lags, vals, n)


def test_lag_grid():
    g = lag_grid(1000)
    assert g[0] == 0 and g[1] == 1 and g[-1] == 1000
    assert np.all(np.diff(g) > 0)


def test_ar1_matches_phi_power():
    x = generate(GeneratorSpec("ar1", 1_000_000, 7, {"phi": 0.5}))
    res = autocorrelation(x, 10, lags=np.arange(11))
    np.testing.assert_allclose(res.values, 0.5 ** np.arange(11), atol=0.01)


def test_white_noise_inside_band():
    # the band holds 95% of lags in expectation; pool seeds and allow two binomial sd
    inside = []
    for seed in range(8):
        x = generate(GeneratorSpec("gaussian_white", 1_000_000, seed))
        res = autocorrelation(x, 100, lags=np.arange(101))
        inside.extend(np.abs(res.values[1:]) < res.noise_level)
    sd = np.sqrt(0.95 * 0.05 / len(inside))
    assert abs(np.mean(inside) - 0.95) < 2 * sd


def test_c0_and_bounds():
    x = np.random.default_rng(0).standard_normal(500)
    res = autocorrelation(x, 100)
    assert res.values[0] == 1.0
    assert np.all(np.abs(res.values) <= 1)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=5, max_size=200))
def test_bounded_for_any_series(values):
    x = np.asarray(values)
    if np.ptp(x) == 0:
        with pytest.raises(DegenerateSeriesError):
            autocorrelation(x, 1)
        return
    if np.std(x) < 1e-9 * np.abs(x).max():
        return
    res = autocorrelation(x, len(x) - 1)
    assert res.values[0] == 1.0
    assert np.all(np.abs(res.values) <= 1 + 1e-12)


def test_lag_errors():
    with pytest.raises(DomainError):
        autocorrelation(np.arange(10.0), 10)


def test_matches_direct_sum():
    x = np.random.default_rng(3).standard_normal(300)
    res = autocorrelation(x, 20, lags=np.arange(21))
    y = x - x.mean()
    direct = np.array([np.dot(y[: len(y) - k], y[k:]) for k in range(21)]) / np.dot(y, y)
    np.testing.assert_allclose(res.values, direct, atol=1e-12)


def test_power_law_single_range():
    ranges = detect_power_law_ranges(_fixture(lambda t: t**-0.3))
    assert len(ranges) == 1
    r = ranges[0]
    assert (r.tau_lo, r.tau_hi) == (1, 10_000)
    assert r.slope == pytest.approx(-0.3, abs=0.02)


def test_ar1_rejected():
    assert detect_power_law_ranges(_fixture(lambda t: 0.5**t)) == []
    x = generate(GeneratorSpec("ar1", 1_000_000, 7, {"phi": 0.5}))
    res = autocorrelation(x, 10_000)
    assert all(np.log10(r.tau_hi / r.tau_lo) < 1 for r in detect_power_law_ranges(res))


def test_piecewise_two_ranges():
    def c(t):
        return np.where(t <= 100, t**-0.2, 100**-0.2 * (t / 100) ** -0.6)

    ranges = detect_power_law_ranges(_fixture(c))
    assert len(ranges) == 2
    assert ranges[0].slope == pytest.approx(-0.2, abs=0.05)
    assert ranges[1].slope == pytest.approx(-0.6, abs=0.05)
    assert 50 <= ranges[0].tau_hi <= 200


def test_noise_floor_cuts_ranges():
    res = _fixture(lambda t: t**-0.5, n=10_000)  # band 0.0196, crossed near tau = 2600
    ranges = detect_power_law_ranges(res)
    assert ranges and ranges[-1].tau_hi < 10_000
    assert res.significance_exit is not None


def test_shuffle_destroys_memory():
    x = np.abs(generate(GeneratorSpec("fgn", 2**17, 2, {"H": 0.9})))
    before = autocorrelation(x, 1000)
    shuffled = np.random.default_rng(0).permutation(x)
    after = autocorrelation(shuffled, 1000)
    assert np.mean(before.values[1:] > before.noise_level) > 0.9
    assert np.mean(np.abs(after.values[1:]) < after.noise_level) >= 0.9


@pytest.mark.parametrize("H", [0.8, 0.9])
def test_abs_fgn_long_memory(H):
    x = np.abs(generate(GeneratorSpec("fgn", 1_000_000, 4, {"H": H})))
    res = autocorrelation(x, 100, lags=np.arange(101))
    assert np.all(res.values[1:] > res.noise_level)
