"""
Escape and recurrence census
============================

Launch orbits uniformly in (t0, E0) for a handful of Haar-random phases and
watch how many climb above E_esc without coming back, and how many return
to their starting energy window.  This is a reduced run; the full-size
census (8 phases, 1000 orbits, 10^4 bounces) takes a few minutes per core.
"""

# %%
from ferulam.census import CensusConfig, build_report, profile_from_results, simulate
from ferulam.forcing import standard_spec

cfg = CensusConfig(standard_spec(), n_omega=4, n_orbits=200, n_max=2000, seed=1)
results = simulate(cfg, workers=1)
report = build_report(cfg, results)
profile = profile_from_results(cfg, results)

# %%
for entry in report.omegas:
    print(entry["index"], entry["horizons"][str(cfg.n_max)]["counts"])
print("escape-candidate fraction by horizon:", report.pooled["escape_fraction"])
print("velocity growth quantiles:", report.velocity_quantiles)

# %% [markdown]
# The number of orbits that have not yet returned to within a relative
# window of their initial energy shrinks as the horizon doubles.

# %%
for h in cfg.horizons:
    print(f"horizon {h:5d}: {profile.no_return_at(h)} of {profile.total} without a return")
