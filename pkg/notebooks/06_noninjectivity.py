"""
A ping-pong map that is not injective
=====================================

With a forcing whose velocity peaks at t = 0 and t = 1 at the same height
but with p(0) > p(1), two launches at equal speed are reflected to equal
speed and can be timed to arrive back together.  The map then sends two
different states to one.  At higher energies the map becomes injective,
which a line-wise probe picks up.
"""

# %%
from ferulam.pingpong import build_noninjectivity_example, injectivity_probe, te_stepper, time_forcing_stepper, twin_peak_forcing
from ferulam.forcing import standard_spec

ex = build_noninjectivity_example()
print("forcing:", ex.forcing["p"])
print("preimage 1:", ex.pre1, "->", ex.image1)
print("preimage 2:", ex.pre2, "->", ex.image2)
print(f"v1 = {ex.v1:.15f}, max difference of images {ex.max_diff:.1e}")

# %%
levels = [2.5, 5, 10, 20, 50, 200]
for name, step in (
    ("twin-peak forcing", time_forcing_stepper(twin_peak_forcing())),
    ("two-mode torus forcing", te_stepper(standard_spec(), [0.1, 0.2])),
):
    recs, smallest = injectivity_probe(step, levels, (-2.0, 2.0), n_t=200, n_E=50)
    print(name, [(r.E, r.passed) for r in recs], "-> injective on the probe from E =", smallest)
