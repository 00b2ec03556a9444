"""
Resampling with and without stratification
==========================================

Units are drawn from a small binary network in the style of the LUCAS lung
cancer model.  Smoking is the treatment, lung cancer the outcome, and the
covariates are the nodes that are not descendants of smoking.  Each resample
draws equal-sized arms; the stratified variant also keeps the outcome rate in
each arm equal to the one observed in the data.
"""

from pcmatch import MatchSpec, StrataRatios, lucas_standin, partition_dataset, resampling_distribution, sample_bayesnet

net = lucas_standin()
data = sample_bayesnet(net, 2000, seed=2024)
p = partition_dataset(data)
print("covariates:", ", ".join(data.covariate_names))
print("arms: treated", p.n1, "untreated", p.n0, "| set sizes", p.sizes)

strata = StrataRatios.from_data(data)
print(f"outcome rate untreated {strata.p_effect_given_cause0:.4f}, treated {strata.p_effect_given_cause1:.4f}")

plain = resampling_distribution(data, 400, MatchSpec(), iterations=300, seed=1)
strat = resampling_distribution(data, 400, MatchSpec(), iterations=300, strata=strata, seed=1)
for name, d in (("unstratified", plain), ("stratified", strat)):
    s = d.summary()
    print(f"{name:>13}: median {s['median']:.4f}  sd {s['sd']:.4f}  bounds [{d.lower.mean():.3f}, {d.upper.mean():.3f}]")
