"""Group-to-individual PC: restrict Set D to cases comparable to one target.

Only Set D is filtered; A, B and C keep their full membership.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import EstimationError, PartitionedSample, Unit, ValidationError
from .estimator import PCEstimate, estimate_pc
from .matching import MatchSpec, dataset_stats, pairwise_distances

__all__ = ["IndividualQuery", "filter_set_d", "estimate_individual_pc", "retention_profile"]


@dataclass(frozen=True)
class IndividualQuery:
    target: Unit
    threshold_t: float
    spec: MatchSpec = field(default_factory=MatchSpec)

    def __post_init__(self):
        if not 0.0 <= self.threshold_t <= 1.0:
            raise ValidationError(f"threshold_t must lie in [0, 1], got {self.threshold_t!r}")


def _target_similarity(p: PartitionedSample, q: IndividualQuery) -> np.ndarray:
    if len(q.target.covariates) != len(p.covariate_names):
        raise ValidationError(
            f"target has {len(q.target.covariates)} covariates, dataset has {len(p.covariate_names)}"
        )
    stats = dataset_stats(p)
    d = pairwise_distances([q.target.covariates], p.set_d.covariates, q.spec, stats)[0]
    return 1.0 / (1.0 + d)


def filter_set_d(p: PartitionedSample, q: IndividualQuery) -> PartitionedSample:
    """Keep the D elements whose similarity to the target is at least ``threshold_t``."""
    if len(p.set_d) == 0:
        raise EstimationError("no observed positive-cause positive-effect cases (Set D is empty)")
    sim = _target_similarity(p, q)
    keep = np.flatnonzero(sim >= q.threshold_t)
    if keep.size == 0:
        raise EstimationError(
            f"no comparable cases above threshold {q.threshold_t}; "
            f"maximum attainable similarity is {sim.max():.4f}"
        )
    return p.replace_d(p.set_d.take(keep))


def estimate_individual_pc(p: PartitionedSample, q: IndividualQuery) -> PCEstimate:
    """:func:`estimate_pc` on the target-filtered partition.

    ``n_d`` of the result is the retained D count.  Dataset statistics for the
    matching metric come from the unfiltered partition, so T = 0 reproduces
    the population estimate exactly.
    """
    filtered = filter_set_d(p, q)
    return estimate_pc(filtered, q.spec, dataset_stats(p), warn_unbalanced=False)


def retention_profile(
    p: PartitionedSample, target: Unit, spec: MatchSpec | None = None, steps: int = 10
) -> list[tuple[float, int]]:
    """Retained |D| at thresholds 0, 1/steps, ..., 1."""
    q = IndividualQuery(target, 0.0, spec or MatchSpec())
    sim = _target_similarity(p, q)
    out = []
    for i in range(steps + 1):
        t = i / steps
        out.append((t, int(np.sum(sim >= t))))
    return out
