"""Generalized Hurst exponents and singularity spectra.

White noise and fractional Gaussian noise are monofractal; the binomial
cascade has a closed-form h(q) that the estimate should follow.

Run: python3 demos/multifractal.py
"""
import numpy as np

from cryptofacts.mfractal import DetrendConfig, find_scaling_range, fluctuation_surface, hurst_spectrum
from cryptofacts.synth import GeneratorSpec, cascade_hurst, generate


def spectrum(x, q=(-4, -2, -1, 1, 2, 4)):
    surf = fluctuation_surface(x, cfg=DetrendConfig.for_length(len(x), tuple(float(v) for v in q)))
    return hurst_spectrum(surf, find_scaling_range(surf))


for name, spec in (("white noise", GeneratorSpec("gaussian_white", 2**18, 0)),
                   ("fGn H=0.7", GeneratorSpec("fgn", 2**18, 1, {"H": 0.7}))):
    s = spectrum(generate(spec))
    print(f"{name:12s} h(q) = {np.round(s.h_of_q, 3)}  width {s.width:.3f}")

x = generate(GeneratorSpec("binomial_cascade", 0, 0, {"p": 0.6, "levels": 16}))
s = spectrum(x)
print("\ncascade p=0.6")
print("   q   estimate   closed form")
for q, h in zip(s.q_grid, s.h_of_q):
    print(f"{q:4.0f}   {h:8.3f}   {float(cascade_hurst(q, 0.6)):8.3f}")
print(f"spectrum width {s.width:.3f}, asymmetry {s.asymmetry:+.3f}, max f(alpha) {np.nanmax(s.f_alpha):.3f}")
