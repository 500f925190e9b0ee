"""
Successor maps and their structure
==================================

One bounce takes (t0, E0) to (t1, E1).  The map preserves area, commutes
with shifting time and phase together, and lifts to a skew map on the torus
times the energy axis.  Low energies are chaotic, high energies are nearly
integrable, which this script makes visible through the divergence of two
float computations of the same orbit.
"""

# %%
import numpy as np

from ferulam.forcing import flow_advance, standard_spec
from ferulam.pingpong import PhaseStateTE, SkewState, iterate, iterate_skew, jacobian_det_estimate, step_te
from ferulam.rng import haar_sample

spec = standard_spec()
omega = np.array([0.21, 0.83])
print(step_te(spec, omega, PhaseStateTE(0.0, 50.0)))

# %%
w = haar_sample(3, 1000, 2)
det = jacobian_det_estimate(spec, w, PhaseStateTE(np.zeros(1000), np.full(1000, 50.0)), h=1e-6)
print(f"|det J - 1|: mean {np.mean(np.abs(det - 1)):.2e}, max {np.max(np.abs(det - 1)):.2e}")

# %% [markdown]
# Planar orbit against skew orbit.  The gap is a pure rounding effect; its
# growth rate separates chaotic from regular motion.

# %%
for E0 in (50.0, 800.0):
    tr = iterate(spec, omega, PhaseStateTE(0.0, E0), 400)
    _, E = iterate_skew(spec, SkewState(flow_advance(omega, 0.0, spec.nu), E0), 400)
    gap = np.abs(E - tr.E)
    print(f"E0 = {E0:6.1f}: gap at n = 10, 100, 400: {gap[10]:.1e} {gap[100]:.1e} {gap[400]:.1e}")

# %%
tr = iterate(spec, omega, PhaseStateTE(0.0, 800.0), 2000)
print(f"W = p^2 E over 2000 bounces at E ~ 800: min {tr.W.min():.2f}, max {tr.W.max():.2f}")
print(f"E over the same orbit: min {tr.E.min():.2f}, max {tr.E.max():.2f}")
