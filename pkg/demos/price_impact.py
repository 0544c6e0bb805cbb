"""Conditional price impact and the linearizing exponent.

For |r| ~ v^alpha the conditional curve E[|r|^kappa | v] has slope
kappa * alpha, and kappa = 1 / alpha makes it linear.

Run: python3 demos/price_impact.py
"""
from cryptofacts.impact import ImpactConfig, conditional_impact, model_selection
from cryptofacts.synth import GeneratorSpec, generate

for alpha in (0.5, 1.0):
    v, r = generate(GeneratorSpec("power_coupled", 200_000, 1, {"alpha": alpha, "noise": 0.2})).T
    curves = conditional_impact(r, v, ImpactConfig(p=0.1))
    print(f"alpha = {alpha}")
    for kappa, c in sorted(curves.items()):
        print(f"  kappa {kappa:3.1f}: slope {c.fit_slope:.3f} (expected {kappa * alpha:.3f}), "
              f"{int(c.fitted.sum())} cells")
    best = model_selection(curves)[0]
    print(f"  most linear: kappa = {best.kappa} (R2 at slope 1: {best.linear_r2:.3f})")
