"""
Solving for the impact time
===========================

A particle leaving the fixed plate at time t0 with speed v0 hits the moving
plate at the root of (t - t0) v0 = p(t).  Above the threshold v* the left
side outruns the right, the root is unique and lies in
[t0 + a/v0, t0 + b/v0].  The solver is Newton's method kept inside that
bracket.
"""

# %%
import time

import numpy as np

from ferulam.collision import solve_impact_time, solve_tau
from ferulam.forcing import eval_p_omega, flow_advance, standard_spec, v_star_bound
from ferulam.rng import haar_sample, stream_key, uniform_stream

spec = standard_spec()
r = solve_impact_time(spec, [0.3, 0.7], 1.25, 7.0)
print(r)

# %% [markdown]
# A batch of 10^5 launches, speeds from 1.5 v* upwards.

# %%
n = 100_000
w = haar_sample(1, n, 2)
u = uniform_stream(stream_key(1, 2), 0, 2 * n).reshape(n, 2)
t0 = 100 * u[:, 0]
v0 = 1.5 * v_star_bound(spec) * 10 ** (3 * u[:, 1])
start = time.perf_counter()
r = solve_impact_time(spec, w, t0, v0)
elapsed = time.perf_counter() - start
res = np.abs(r.offset * v0 - eval_p_omega(spec, flow_advance(w, t0, spec.nu), r.offset)[0])
print(f"{elapsed:.2f} s, max residual {res.max():.2e}, iterations: {np.bincount(r.iterations)}")

# %% [markdown]
# In the skew coordinates the same equation reads tau sqrt(2 E0) = P(omega0 + nu tau).
# At high energy tau v approaches P(omega0), with a first-order correction dP P / v.

# %%
for E in (1e2, 1e4, 1e6, 1e8, 1e10):
    tau = solve_tau(spec, [0.1, 0.2], E).root
    P, dP, _ = eval_p_omega(spec, [0.1, 0.2], 0.0)
    v = np.sqrt(2 * E)
    print(f"E0 = {E:8.0e}   tau v - P = {tau * v - P: .3e}   first-order term {dP * P / v: .3e}")
