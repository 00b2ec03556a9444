"""
Matching estimate on a population with a known answer
=====================================================

Units carry one covariate ``Id`` drawn uniformly on [0, 1).  Within each arm
the outcome split is fixed, so the true PC is 0.8.  We regenerate the
population many times and watch the median settle as N grows.
"""

import numpy as np

from pcmatch import MatchSpec, estimate_pc, gen_example1, partition_dataset, simulation_distribution

data = gen_example1(1000, ab_split=0.8, cd_split=0.6, seed=0)
p = partition_dataset(data)
print("set sizes:", p.sizes)
print("one run, m=1:", round(estimate_pc(p, MatchSpec()).pc_raw, 4))

specs = [MatchSpec(m=m) for m in (1, 3, 5)]
print("\n   N   median m=1/3/5         sd m=1/3/5")
for n in (10, 50, 200, 1000):
    dists = simulation_distribution(lambda rng: gen_example1(n, seed=rng), specs, iterations=200, seed=1)
    med = np.array([d.median for d in dists])
    sd = np.array([d.sd for d in dists])
    print(f"{n:5d}   {np.round(med, 3)}   {np.round(sd, 3)}")
