"""Heavy tails: Hill exponents, the Levy-regime flag and a stretched exponential.

Run: python3 demos/tails.py
"""
import numpy as np

from cryptofacts.dist import empirical_cdf, fit_stretched_exponential, fit_tail_exponent, group_average_cdf
from cryptofacts.synth import GeneratorSpec, generate

# An inverse-cubic sample and a Levy-regime sample.
for gamma, seed in ((3.0, 1), (1.5, 2)):
    x = generate(GeneratorSpec("pareto_tail", 10**6, seed, {"gamma": gamma}))
    fit = fit_tail_exponent(empirical_cdf(x), tail_fraction=0.01)
    print(f"Pareto gamma={gamma}: Hill {fit.exponent:.3f} +- {fit.stderr:.3f} "
          f"from {fit.n_tail} points above {fit.xmin:.2f}, levy={fit.levy_regime}, stable={fit.stable}")

# Thin tails give no stable power law: the Hill estimate drifts as the tail shrinks.
rng = np.random.default_rng(3)
expo = rng.exponential(size=10**6)
fit = fit_tail_exponent(expo)
print(f"exponential sample: Hill {fit.exponent:.2f}, drift {fit.hill_drift:+.2f}, stable={fit.stable}")

# A stretched-exponential body, recovered by least squares on the survival function.
eta, scale = 0.43, 2.0
y = scale * rng.exponential(size=200_000) ** (1 / eta)
se = fit_stretched_exponential(empirical_cdf(y), (0.1, 50.0))
print(f"stretched exponential: eta {se.eta:.3f} (true {eta}), scale {se.scale:.3f} (true {scale})")

# Vertical average of several survival curves on a shared log grid.
cdfs = [empirical_cdf(generate(GeneratorSpec("pareto_tail", 50_000, s, {"gamma": 3.0}))) for s in range(5)]
avg = group_average_cdf(cdfs, n_grid=50)
print("group average survival at x = 1, 10:", np.interp([1, 10], avg.sorted_values, avg.survival).round(4))
