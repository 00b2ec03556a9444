"""Distances, similarity and nearest-neighbour matching of Set D into A u B.

Each element of D is matched against the X=0 arm (the pool ``A + B``).  The
share of its matches that land in A is the element's credit towards PC.

Two assignment modes are offered:

``with_replacement``
    every D element independently takes its ``m`` nearest pool elements.
``balanced_assignment``
    greedy global assignment in ascending distance order; each pool element is
    consumed at most once, so transition coefficients stay inside [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .core import Dataset, EstimationError, PartitionedSample, Unit, ValidationError, as_dataset

__all__ = [
    "METRICS",
    "MatchSpec",
    "DatasetStats",
    "Match",
    "MatchAssignment",
    "dataset_stats",
    "distance",
    "pairwise_distances",
    "similarity",
    "nearest_matches",
    "match_all",
]

METRICS = ("identity_threshold", "absolute_difference", "euclidean_standardized", "mahalanobis")
TIE_RULES = ("fractional", "lowest_id")
MODES = ("with_replacement", "balanced_assignment")


@dataclass(frozen=True)
class MatchSpec:
    """How D elements are matched into the pool.

    metric
        ``identity_threshold``: Chebyshev distance, snapped to 0 when every
        covariate differs by at most ``identity_tol``.
        ``absolute_difference``: sum of absolute covariate differences.
        ``euclidean_standardized``: Euclidean distance on covariates z-scored
        with the pooled mean/sd (``standardize=False`` gives plain Euclidean).
        ``mahalanobis``: Mahalanobis distance with the pooled covariance.
    m
        number of matches per D element.
    threshold_t
        optional minimum similarity; pool elements below it are not eligible.
    """

    metric: str = "euclidean_standardized"
    m: int = 1
    threshold_t: float | None = None
    tie_rule: str = "fractional"
    mode: str = "with_replacement"
    standardize: bool = True
    identity_tol: float = 0.0

    def __post_init__(self):
        if self.metric not in METRICS:
            raise ValidationError(f"unknown metric {self.metric!r}; choose from {METRICS}")
        if self.tie_rule not in TIE_RULES:
            raise ValidationError(f"unknown tie rule {self.tie_rule!r}; choose from {TIE_RULES}")
        if self.mode not in MODES:
            raise ValidationError(f"unknown mode {self.mode!r}; choose from {MODES}")
        if isinstance(self.m, bool) or int(self.m) != self.m or self.m < 1:
            raise ValidationError(f"m must be a positive integer, got {self.m!r}")
        object.__setattr__(self, "m", int(self.m))
        if self.threshold_t is not None and not 0.0 <= self.threshold_t <= 1.0:
            raise ValidationError(f"threshold_t must lie in [0, 1], got {self.threshold_t!r}")
        if self.identity_tol < 0:
            raise ValidationError("identity_tol must be nonnegative")

    def to_dict(self) -> dict:
        return {
            "metric": self.metric,
            "m": self.m,
            "threshold_t": self.threshold_t,
            "tie_rule": self.tie_rule,
            "mode": self.mode,
            "standardize": self.standardize,
            "identity_tol": self.identity_tol,
        }


@dataclass(frozen=True, eq=False)
class DatasetStats:
    """Pooled covariate moments used by the standardized and Mahalanobis metrics."""

    mean: np.ndarray
    sd: np.ndarray
    cov: np.ndarray

    def inverse_cov(self) -> np.ndarray:
        cov = np.atleast_2d(self.cov)
        if cov.size == 0:
            return cov
        if np.linalg.matrix_rank(cov) < cov.shape[0] or np.linalg.cond(cov) > 1e12:
            raise ValidationError(
                "covariate covariance is singular; use metric='euclidean_standardized' instead"
            )
        return np.linalg.inv(cov)


def dataset_stats(data: Dataset | PartitionedSample | Sequence[Unit]) -> DatasetStats:
    if isinstance(data, PartitionedSample):
        data = data.all_units()
    data = as_dataset(data)
    cov = data.covariates
    p = cov.shape[1]
    if len(data) == 0:
        return DatasetStats(np.zeros(p), np.ones(p), np.eye(p))
    mean = cov.mean(axis=0)
    sd = cov.std(axis=0, ddof=1) if len(data) > 1 else np.zeros(p)
    covm = np.cov(cov, rowvar=False).reshape(p, p) if len(data) > 1 else np.zeros((p, p))
    return DatasetStats(mean=mean, sd=sd, cov=covm)


def _scale(sd: np.ndarray) -> np.ndarray:
    # zero-variance covariates contribute nothing to the distance
    with np.errstate(divide="ignore"):
        return np.where(sd > 0, 1.0 / np.where(sd > 0, sd, 1.0), 0.0)


def pairwise_distances(
    zs: np.ndarray, pool: np.ndarray, spec: MatchSpec, stats: DatasetStats | None = None
) -> np.ndarray:
    """Distance matrix of shape ``(len(zs), len(pool))`` under ``spec.metric``."""
    zs = np.atleast_2d(np.asarray(zs, dtype=float))
    pool = np.atleast_2d(np.asarray(pool, dtype=float))
    if zs.shape[1] != pool.shape[1]:
        raise ValidationError("units do not share a covariate schema")
    if zs.shape[1] == 0:
        raise ValidationError("matching needs at least one covariate; covariate-free data supports table-level operations only")
    metric = spec.metric
    if metric == "absolute_difference":
        return cdist(zs, pool, "cityblock")
    if metric == "identity_threshold":
        d = cdist(zs, pool, "chebyshev")
        d[d <= spec.identity_tol] = 0.0
        return d
    if metric == "euclidean_standardized":
        if not spec.standardize:
            return cdist(zs, pool, "euclidean")
        if stats is None:
            raise ValidationError("euclidean_standardized requires dataset statistics")
        w = _scale(stats.sd)
        return cdist(zs * w, pool * w, "euclidean")
    if stats is None:
        raise ValidationError("mahalanobis requires dataset statistics")
    return cdist(zs, pool, "mahalanobis", VI=stats.inverse_cov())


def distance(
    u: Unit, v: Unit, metric: str | MatchSpec = "absolute_difference", stats: DatasetStats | None = None
) -> float:
    spec = metric if isinstance(metric, MatchSpec) else MatchSpec(metric=metric)
    if len(u.covariates) != len(v.covariates):
        raise ValidationError(f"units {u.id!r} and {v.id!r} do not share a covariate schema")
    if stats is None and spec.metric in ("euclidean_standardized", "mahalanobis") and spec.standardize:
        stats = dataset_stats([u, v])
    return float(pairwise_distances([u.covariates], [v.covariates], spec, stats)[0, 0])


def similarity(d):
    """Map a distance to a similarity in (0, 1]: ``1 / (1 + d)``."""
    d = np.asarray(d, dtype=float)
    if (d < 0).any():
        raise ValidationError("distance must be nonnegative")
    s = 1.0 / (1.0 + d)
    return float(s) if s.ndim == 0 else s


def _apply_threshold(dist: np.ndarray, t: float) -> np.ndarray:
    # ineligible pairs get infinite distance
    return np.where(1.0 / (1.0 + dist) >= t, dist, np.inf)


class Match(NamedTuple):
    unit_id: str
    source: str  # "A" or "B"
    similarity: float
    credit: float


@dataclass(frozen=True, eq=False)
class MatchAssignment:
    """Per-D-element match lists plus aggregate credit into A and B.

    ``matches[i]`` belongs to the i-th unit of Set D; an empty list means no
    pool element passed the similarity threshold.
    """

    d_ids: tuple[str, ...]
    matches: tuple[tuple[Match, ...], ...]
    weight_a: float
    weight_b: float
    spec: MatchSpec

    @property
    def n_matched(self) -> int:
        return sum(1 for m in self.matches if m)

    def consumed(self) -> dict[str, int]:
        """How many times each pool id was used."""
        out: dict[str, int] = {}
        for ms in self.matches:
            for m in ms:
                out[m.unit_id] = out.get(m.unit_id, 0) + 1
        return out


# -- weight computation ------------------------------------------------------


def _replacement_weights(dist: np.ndarray, pool: Dataset, spec: MatchSpec) -> np.ndarray:
    """Credit matrix for with-replacement matching.

    Row i holds the credit each pool element receives from D element i; rows
    sum to 1 (or 0 when nothing is eligible).
    """
    n_d, n_p = dist.shape
    if spec.threshold_t is not None:
        dist = _apply_threshold(dist, spec.threshold_t)
        n_elig = np.isfinite(dist).sum(axis=1)
    else:
        n_elig = np.full(n_d, n_p)
    k = np.minimum(spec.m, n_elig)
    w = np.zeros_like(dist)
    if n_d == 0 or n_p == 0:
        return w
    if (k == k[0]).all():
        kk = int(k[0])
        if kk == 0:
            return w
        kth = np.partition(dist, kk - 1, axis=1)[:, kk - 1]
    else:
        srt = np.sort(dist, axis=1)
        kth = srt[np.arange(n_d), np.maximum(k - 1, 0)]
    less = dist < kth[:, None]
    eq = (dist == kth[:, None]) & np.isfinite(dist)
    slots = k - less.sum(axis=1)
    n_eq = eq.sum(axis=1)
    kf = np.where(k > 0, k, 1).astype(float)
    w[less] = 1.0
    if spec.tie_rule == "fractional":
        share = np.where(n_eq > 0, slots / np.maximum(n_eq, 1), 0.0)
        w += eq * share[:, None]
    else:
        for i in np.flatnonzero(n_eq > 0):
            cols = np.flatnonzero(eq[i])
            if n_eq[i] > slots[i]:
                cols = cols[np.argsort(pool.id_rank[cols], kind="stable")[: slots[i]]]
            w[i, cols] = 1.0
    w /= kf[:, None]
    w[k == 0] = 0.0
    return w


def _balanced_weights(dist: np.ndarray, rank: np.ndarray, spec: MatchSpec) -> np.ndarray:
    """Greedy one-to-one assignment in ascending distance order.

    Ties in distance are broken by D index, then by ascending pool id.
    """
    n_d, n_p = dist.shape
    if n_p < spec.m * n_d:
        raise EstimationError(
            f"balanced_assignment needs at least m*|D| = {spec.m * n_d} pool elements "
            f"in A u B, found {n_p}"
        )
    if spec.threshold_t is not None:
        dist = _apply_threshold(dist, spec.threshold_t)
    flat = dist.ravel()
    di = np.repeat(np.arange(n_d), n_p)
    pr = np.tile(rank, n_d)
    order = np.lexsort((pr, di, flat))
    need = np.full(n_d, spec.m)
    used = np.zeros(n_p, dtype=bool)
    w = np.zeros_like(dist)
    remaining = n_d
    for idx in order:
        if not np.isfinite(flat[idx]):
            break
        i, j = divmod(int(idx), n_p)
        if need[i] == 0 or used[j]:
            continue
        used[j] = True
        w[i, j] = 1.0 / spec.m
        need[i] -= 1
        if need[i] == 0:
            remaining -= 1
            if remaining == 0:
                break
    # a row left short of m eligible matches counts as unmatched
    w[need > 0] = 0.0
    return w


def _pool_and_distances(
    p: PartitionedSample, spec: MatchSpec, stats: DatasetStats | None = None
) -> tuple[Dataset, np.ndarray]:
    if len(p.set_d) == 0:
        raise EstimationError("no observed positive-cause positive-effect cases (Set D is empty)")
    if p.n0 == 0:
        raise EstimationError("the pool A u B is empty; nothing to match Set D against")
    pool = p.pool()
    if stats is None and spec.metric != "absolute_difference" and spec.metric != "identity_threshold":
        stats = dataset_stats(p)
    return pool, pairwise_distances(p.set_d.covariates, pool.covariates, spec, stats)


def _pool_and_weights(
    p: PartitionedSample, spec: MatchSpec, stats: DatasetStats | None = None
) -> tuple[Dataset, np.ndarray, np.ndarray]:
    pool, dist = _pool_and_distances(p, spec, stats)
    if spec.mode == "balanced_assignment":
        w = _balanced_weights(dist, pool.id_rank, spec)
    else:
        w = _replacement_weights(dist, pool, spec)
    return pool, dist, w


def _tie_counts(dist: np.ndarray, kth: np.ndarray, n_a: int):
    less = dist < kth
    eq = dist == kth
    return (
        np.count_nonzero(less, axis=1),
        np.count_nonzero(less[:, :n_a], axis=1),
        np.count_nonzero(eq, axis=1),
        np.count_nonzero(eq[:, :n_a], axis=1),
        eq,
    )


def _credit_from_kth(
    dist: np.ndarray, kth: np.ndarray, k: int, n_a: int, pool: Dataset, tie_rule: str
) -> np.ndarray:
    n_less, a_less, n_eq, a_eq, eq = _tie_counts(dist, kth, n_a)
    slots = k - n_less
    if tie_rule == "fractional":
        credit = a_less + a_eq * (slots / n_eq)
    else:
        credit = (a_less + np.where(n_eq == slots, a_eq, 0)).astype(float)
        for i in np.flatnonzero(n_eq > slots):
            cols = np.flatnonzero(eq[i])
            chosen = cols[np.argsort(pool.id_rank[cols], kind="stable")[: slots[i]]]
            credit[i] += np.count_nonzero(chosen < n_a)
    return credit / k


def _replacement_credits(
    dist: np.ndarray, n_a: int, pool: Dataset, specs: Sequence[MatchSpec]
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Row-wise credit into A for several with-replacement specs.

    Equivalent to summing :func:`_replacement_weights` over the A columns, but
    without materialising the credit matrix; one partition pass serves every
    ``m``.  This is the hot path of the distribution routines.
    """
    n_d, n_p = dist.shape
    out: list = [None] * len(specs)
    plain = [i for i, sp in enumerate(specs) if sp.threshold_t is None]
    for i, sp in enumerate(specs):
        if sp.threshold_t is not None:
            w = _replacement_weights(dist, pool, sp)
            out[i] = (w[:, :n_a].sum(axis=1), w.sum(axis=1) > 0)
    if plain:
        ks = sorted({min(specs[i].m, n_p) for i in plain})
        part = np.partition(dist, [k - 1 for k in ks], axis=1)
        matched = np.ones(n_d, dtype=bool)
        for i in plain:
            k = min(specs[i].m, n_p)
            kth = part[:, k - 1 : k]
            out[i] = (_credit_from_kth(dist, kth, k, n_a, pool, specs[i].tie_rule), matched)
    return out


def _distance_key(spec: MatchSpec) -> tuple:
    return (spec.metric, spec.standardize, spec.identity_tol)


def credits_into_a(
    p: PartitionedSample, specs: Sequence[MatchSpec], stats: DatasetStats | None = None
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Per-D-element credit into A and a matched mask, for each spec.

    Specs that share a metric share one distance matrix.
    """
    if len(p.set_d) == 0:
        raise EstimationError("no observed positive-cause positive-effect cases (Set D is empty)")
    if p.n0 == 0:
        raise EstimationError("the pool A u B is empty; nothing to match Set D against")
    pool = p.pool()
    n_a = len(p.set_a)
    if stats is None and any(s.metric in ("euclidean_standardized", "mahalanobis") for s in specs):
        stats = dataset_stats(p)
    out: list = [None] * len(specs)
    groups: dict[tuple, list[int]] = {}
    for i, sp in enumerate(specs):
        groups.setdefault(_distance_key(sp), []).append(i)
    for idx in groups.values():
        dist = pairwise_distances(p.set_d.covariates, pool.covariates, specs[idx[0]], stats)
        repl = [i for i in idx if specs[i].mode == "with_replacement"]
        for i, res in zip(repl, _replacement_credits(dist, n_a, pool, [specs[i] for i in repl])):
            out[i] = res
        for i in idx:
            if specs[i].mode == "balanced_assignment":
                w = _balanced_weights(dist, pool.id_rank, specs[i])
                out[i] = (w[:, :n_a].sum(axis=1), w.sum(axis=1) > 0)
    return out


def credit_into_a(
    p: PartitionedSample, spec: MatchSpec, stats: DatasetStats | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Per-D-element credit into A, and a mask of D elements that were matched."""
    return credits_into_a(p, [spec], stats)[0]


def _assignment(pool: Dataset, n_a: int, d: Dataset, dist: np.ndarray, w: np.ndarray,
                spec: MatchSpec) -> MatchAssignment:
    sims = 1.0 / (1.0 + dist)
    rows = []
    for i in range(w.shape[0]):
        cols = np.flatnonzero(w[i] > 0)
        cols = cols[np.lexsort((pool.id_rank[cols], dist[i, cols]))]
        rows.append(tuple(
            Match(str(pool.ids[j]), "A" if j < n_a else "B", float(sims[i, j]), float(w[i, j]))
            for j in cols
        ))
    return MatchAssignment(
        d_ids=tuple(str(s) for s in d.ids),
        matches=tuple(rows),
        weight_a=float(w[:, :n_a].sum()),
        weight_b=float(w[:, n_a:].sum()),
        spec=spec,
    )


def nearest_matches(
    z: Unit,
    pool: Sequence[Unit] | Dataset,
    spec: MatchSpec | None = None,
    stats: DatasetStats | None = None,
) -> tuple[Match, ...]:
    """Matches of a single unit into a pool of X=0 units, best first.

    The source set of a pool unit follows from its outcome: y=0 is A, y=1 is B.
    """
    spec = spec or MatchSpec()
    pool = as_dataset(pool)
    if len(pool) == 0:
        raise EstimationError("cannot match against an empty pool")
    if stats is None and spec.metric in ("euclidean_standardized", "mahalanobis"):
        stats = dataset_stats(Dataset.concat([pool, as_dataset([z], pool.covariate_names)]))
    # order pool as A then B so the column split below is valid
    order = np.argsort(pool.y, kind="stable")
    pool = pool.take(order)
    n_a = int((pool.y == 0).sum())
    dist = pairwise_distances([z.covariates], pool.covariates, spec, stats)
    d = as_dataset([z], pool.covariate_names)
    w = _replacement_weights(dist, pool, spec)
    return _assignment(pool, n_a, d, dist, w, spec).matches[0]


def match_all(
    p: PartitionedSample, spec: MatchSpec | None = None, stats: DatasetStats | None = None
) -> MatchAssignment:
    spec = spec or MatchSpec()
    pool, dist, w = _pool_and_weights(p, spec, stats)
    return _assignment(pool, len(p.set_a), p.set_d, dist, w, spec)
