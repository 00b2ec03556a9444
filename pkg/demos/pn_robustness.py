"""
How fragile is a PN lower bound?
================================

Two pairs of contingency tables where the lower bound on the probability of
necessity sits at 1.  Moving a single observation is enough to push it to 0.
"""

from pcmatch import ContingencyTable, pn_bounds, sensitivity_sweep

# deaths / survivals among drug takers (x) and non-takers (x')
exp = ContingencyTable(16, 984, 14, 986, "experimental")
obs = ContingencyTable(2, 998, 28, 972, "observational")

res = pn_bounds(exp, obs)
print(f"PN in [{res.pn_lower:.4f}, {res.pn_upper:.4f}]")

# one more death among the experimental non-takers
curve = sensitivity_sweep(exp, obs, "x'y@experimental", range(3), "pn_lower")
for k, v in curve.points:
    print(f"  x'y + {k}: PN lower = {v:.4f}")

# a second pair where the bound decays one observation at a time
exp2 = ContingencyTable(30, 70, 12, 88, "experimental")
obs2 = ContingencyTable(18, 82, 24, 76, "observational")
curve = sensitivity_sweep(exp2, obs2, "x'y@experimental", range(10), "pn_lower")
print("\nsecond pair, x'y moved from 12 to 21:")
print("  " + " ".join(f"{v:.3f}" for v in curve.values))
