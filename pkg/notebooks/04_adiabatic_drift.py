"""
The adiabatic invariant
=======================

W = p^2 E changes by O(E^-1/2) per bounce.  Measure the largest one-step
change per energy decade, fit the log-log slope, and calibrate the constant
in front of the modulus Delta(E0) = E0^-1/2 (1 + C D3).
"""

# %%
import numpy as np

from ferulam.forcing import standard_spec
from ferulam.invariants import BandFamily, drift_sample, drift_scaling, estimate_drift_constant
from ferulam.rng import haar_sample

spec = standard_spec()
fit = drift_scaling(spec, decades=(2, 3, 4, 5), n_per_decade=1000, seed=0)
for lo, m in zip(fit.decade_lo, fit.max_drift):
    print(f"E0 in [{lo:8.0f}, {10 * lo:8.0f}): max drift {m:.4f}")
print(f"slope {fit.slope:.4f}, R^2 {fit.r_squared:.4f}")

# %%
C_hat = estimate_drift_constant(spec, 10_000, (1e2, 1e6), seed=1)
check = drift_sample(spec, 100_000, (1e2, 1e6), seed=2)
print(f"C_hat = {C_hat:.4f}; largest ratio on fresh samples {check.ratio.max():.4f}")

# %% [markdown]
# The constant does not depend much on the phase omega.

# %%
print([round(estimate_drift_constant(spec, 2000, (1e2, 1e6), seed=3, omega=w), 3) for w in haar_sample(4, 6, 2)])

# %% [markdown]
# Bands around W_j = W0 j^4 with half-widths eps0 j^-3/2 have finite total
# width, while the drift measured in units of eps_j dies out as j grows.

# %%
bands = BandFamily()
print("sum of half-widths", bands.half_widths.sum(), "<=", bands.width_sum_bound)
print("drift / width for j = 1, 10, 50:", bands.drift_ratio(spec.upper**2)[[0, 9, 49]])
