import numpy as np
import pytest

from cryptofacts.errors import SpecError
from cryptofacts.mfractal import DetrendConfig, fluctuation_surface, hurst_spectrum, log_scales
from cryptofacts.synth import GeneratorSpec, cascade_hurst, fgn_autocovariance, generate

SPECS = [
    GeneratorSpec("gaussian_white", 1000, 5),
    GeneratorSpec("fgn", 1000, 5, {"H": 0.7}),
    GeneratorSpec("binomial_cascade", 0, 5, {"p": 0.6, "levels": 10}),
    GeneratorSpec("pareto_tail", 1000, 5, {"gamma": 3.0}),
    GeneratorSpec("ar1", 1000, 5, {"phi": 0.5}),
    GeneratorSpec("power_coupled", 1000, 5, {"alpha": 1.0, "noise": 0.2}),
]


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.kind)
def test_same_seed_identical(spec):
    a, b = generate(spec), generate(spec)
    assert a.tobytes() == b.tobytes()
    other = generate(GeneratorSpec(spec.kind, spec.length, spec.seed + 1, spec.params))
    assert a.tobytes() != other.tobytes()


@pytest.mark.parametrize("kind,params", [
    ("fgn", {"H": 1.5}), ("fgn", {"H": 0.0}), ("binomial_cascade", {"p": 0.4, "levels": 8}),
    ("binomial_cascade", {"p": 0.6, "levels": 0}), ("pareto_tail", {"gamma": 0}),
    ("ar1", {"phi": 1.0}), ("power_coupled", {"alpha": -1}), ("power_coupled", {"alpha": 1, "noise": -0.1}),
    ("brownian", {}), ("fgn", {}),
])
def test_invalid_specs(kind, params):
    with pytest.raises(SpecError):
        GeneratorSpec(kind, 100, 0, params)


def test_seed_range():
    with pytest.raises(SpecError):
        GeneratorSpec("gaussian_white", 10, -1)
    GeneratorSpec("gaussian_white", 10, 2**64 - 1)


def test_fgn_autocovariance_closed_form():
    H = 0.7
    np.testing.assert_allclose(fgn_autocovariance(H, [0, 1]), [1.0, 0.5 * (2 ** (2 * H) - 2)])
    x = generate(GeneratorSpec("fgn", 2**18, 1, {"H": H}))
    for k in (1, 2, 10):
        emp = np.mean(x[:-k] * x[k:])
        assert emp == pytest.approx(fgn_autocovariance(H, [k])[0], abs=0.02)


def test_cascade_mass_and_length():
    x = generate(GeneratorSpec("binomial_cascade", 0, 3, {"p": 0.7, "levels": 12}))
    assert len(x) == 4096
    assert np.all(x > 0)
    assert x.mean() == pytest.approx(1.0, rel=1e-12)
    # only p^k (1-p)^(L-k) multipliers can occur
    levels = np.log(x / 2**12 / 0.3**12) / np.log(0.7 / 0.3)
    np.testing.assert_allclose(levels, np.round(levels), atol=1e-8)


def test_cascade_hurst_closed_form():
    assert cascade_hurst(2.0, 0.6) == pytest.approx(0.5 - np.log2(0.52) / 2)
    assert cascade_hurst(1.0, 0.6) == pytest.approx(1.0)


def test_pareto_support_and_tail():
    x = generate(GeneratorSpec("pareto_tail", 200_000, 2, {"gamma": 3.0}))
    assert x.min() >= 1.0
    assert np.mean(x > 2.0) == pytest.approx(2.0 ** -3, rel=0.03)


def test_ar1_lag_one():
    x = generate(GeneratorSpec("ar1", 1_000_000, 7, {"phi": 0.5}))
    x = x - x.mean()
    assert np.dot(x[:-1], x[1:]) / np.dot(x, x) == pytest.approx(0.5, abs=0.01)


def test_power_coupled_noiseless_exact():
    x = generate(GeneratorSpec("power_coupled", 5000, 1, {"alpha": 0.5}))
    assert x.shape == (5000, 2)
    v, r = x.T
    np.testing.assert_allclose(r, v**0.5, rtol=1e-14)
    assert v.min() >= 0.1 and v.max() <= 100


def test_power_coupled_background():
    x = generate(GeneratorSpec("power_coupled", 20000, 1, {"alpha": 1.0, "background": 0.5}))
    v, r = x.T
    frac_exact = np.mean(np.isclose(r, v))
    assert frac_exact == pytest.approx(0.5, abs=0.02)


def test_white_and_fgn_half_agree():
    cfg = DetrendConfig(log_scales(10, 2**15 // 4), (2.0,))
    h = []
    for spec in (GeneratorSpec("gaussian_white", 2**15, 11), GeneratorSpec("fgn", 2**15, 11, {"H": 0.5})):
        h.append(hurst_spectrum(fluctuation_surface(generate(spec), cfg=cfg), min_scales=8).h(2.0))
    assert abs(h[0] - 0.5) < 0.05 and abs(h[1] - 0.5) < 0.05
    assert abs(h[0] - h[1]) < 0.07
