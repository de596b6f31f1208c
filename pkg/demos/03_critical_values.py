"""Where the thresholds come from.

The null distribution of the maximal scan statistic depends only on the
window fraction epsilon and the functional dimension d, so one simulated
quantile table serves every functional.  The package ships the
epsilon=0.05, d=1..10 table; anything else is a short Monte-Carlo run on
Gaussian white noise through the exact production scan code.

    python demos/03_critical_values.py
"""

import numpy as np

import sncp
from sncp.critical_values import empirical_quantile, simulate_null_stats

table = sncp.builtin_table()
print("built-in thresholds (epsilon = 0.05):")
print("  d:   " + "  ".join(f"{d:6d}" for d in range(1, 6)))
print("  90%: " + "  ".join(f"{sncp.lookup(table, 0.05, d, 0.90):6.1f}" for d in range(1, 6)))
print("  95%: " + "  ".join(f"{sncp.lookup(table, 0.05, d, 0.95):6.1f}" for d in range(1, 6)))

# re-derive the d=1 entries at a reduced scale (full scale: n_sim=2000, reps=5000)
stats = simulate_null_stats(0.05, 1, "nested", n_sim=1000, reps=1000, seed=0)
print("\nsimulated null statistic for d=1 (n_sim=1000, reps=1000):")
for level in (0.90, 0.95):
    print(f"  {level:.0%} quantile: {empirical_quantile(stats, level):6.1f} "
          f"(table: {sncp.lookup(table, 0.05, 1, level)})")

# the same machinery thresholds the auxiliary statistic families
for family, label in [("single_cp", "full-interval single change-point"),
                      ("local", "pure smallest-local-window")]:
    s = simulate_null_stats(0.05, 1, family, n_sim=1000, reps=1000, seed=0)
    print(f"  90% of the {label} family: {empirical_quantile(s, 0.90):6.1f}")

# thresholds are what keep the false-positive rate honest: on pure noise
# the detector should stay quiet about 90% of the time at the 90% level
cfg = sncp.DetectionConfig(functional=sncp.FunctionalSpec.mean(),
                           threshold=sncp.lookup(table, 0.05, 1, 0.90))
quiet = 0
reps = 100
for r in range(reps):
    rng = np.random.default_rng(np.random.SeedSequence(1, spawn_key=(r,)))
    quiet += sncp.detect(rng.standard_normal(1024), cfg).m == 0
print(f"\nno-change runs on white noise: {quiet}/{reps} stayed quiet at the 90% level")
