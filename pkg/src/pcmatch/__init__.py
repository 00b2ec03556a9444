"""Probability of causation from unit-level data via covariate matching."""

__version__ = "0.1.0"

from .core import (
    ContingencyTable,
    Dataset,
    EstimationError,
    PartitionedSample,
    Unit,
    ValidationError,
    conditional_probs,
    contingency_from_partition,
    expand_table,
    partition_dataset,
)
from .distribution import (
    PCDistribution,
    SkippedIterationsError,
    StrataRatios,
    bootstrap_distribution,
    ensemble_distribution,
    resampling_distribution,
    simulation_distribution,
    summarize,
)
from .estimator import (
    PCEstimate,
    UnbalancedArmsWarning,
    estimate_pc,
    pc_bounds,
    pc_from_coefficients,
    pc_under_monotonicity,
    pc_under_reverse_monotonicity,
    risk_ratio,
)
from .g2i import IndividualQuery, estimate_individual_pc, filter_set_d, retention_profile
from .matching import MatchSpec, dataset_stats, distance, match_all, nearest_matches, similarity
from .pn import PNResult, SweepCurve, pc_lower_experimental, pn_bounds, sensitivity_sweep
from .synth import (
    BinaryBayesNet,
    gen_example1,
    load_network_spec,
    lucas_standin,
    lucas_template,
    sample_bayesnet,
)
from .fileio import RunReport, load_table, load_units_csv
