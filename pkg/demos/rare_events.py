"""
When Set D is tiny
==================

Shrinking the number of treated units with the outcome leaves only a handful
of cases to match.  The centre of the distribution holds up better than its
spread.
"""

from pcmatch import MatchSpec, gen_example1, simulation_distribution

specs = [MatchSpec(m=m) for m in (1, 3, 5)]
print(" |D|   median m=1/3/5          iqr m=1/3/5")
for d in (2, 5, 20, 100, 300):
    dists = simulation_distribution(
        lambda rng: gen_example1(1000, ab_split=0.8, cd_split=1 - d / 1000, seed=rng),
        specs, iterations=200, seed=d)
    med = " ".join(f"{x.median:.3f}" for x in dists)
    iqr = " ".join(f"{x.iqr:.3f}" for x in dists)
    print(f"{d:4d}   {med}    {iqr}")
