"""Volatility autocorrelation and power-law range detection.

Run: python3 demos/volatility_memory.py
"""
import numpy as np

from cryptofacts.acf import autocorrelation, detect_power_law_ranges
from cryptofacts.synth import GeneratorSpec, generate

# Short memory: AR(1) decays geometrically and yields no power-law range.
x = generate(GeneratorSpec("ar1", 10**6, 7, {"phi": 0.5}))
res = autocorrelation(x, 10, lags=np.arange(11))
print("AR(1) C(tau):", res.values.round(3))
print("phi^tau     :", (0.5 ** np.arange(11)).round(3))

# Long memory in magnitudes: |fGn| with H=0.9 decays as a power law.
v = np.abs(generate(GeneratorSpec("fgn", 2**20, 4, {"H": 0.9})))
res = autocorrelation(v, 10_000)
print(f"\n|fGn| noise band {res.noise_level:.4f}, first lag inside the band: {res.significance_exit}")
for r in detect_power_law_ranges(res):
    print(f"  power law tau in [{r.tau_lo}, {r.tau_hi}] slope {r.slope:+.3f} (R2 {r.r2:.3f})")

# Shuffling keeps the distribution and destroys the memory.
shuffled = autocorrelation(np.random.default_rng(0).permutation(v), 1000)
inside = np.mean(np.abs(shuffled.values[1:]) < shuffled.noise_level)
print(f"shuffled: {inside:.0%} of lags inside the noise band")
