"""Distributions of PC from bootstrap, repeated sampling, regenerated data and
matcher ensembles.

Every stochastic routine takes a master ``seed``.  Iteration ``i`` draws from
its own generator seeded with ``SeedSequence(seed, spawn_key=(i,))``, so the
result does not depend on iteration order or on ``n_jobs``.
"""

from __future__ import annotations

import csv
import io
import statistics
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence, TextIO

import numpy as np

from .core import (
    Dataset,
    EstimationError,
    PartitionedSample,
    UnitsLike,
    ValidationError,
    as_dataset,
    partition_dataset,
)
from .estimator import PCEstimate, UnbalancedArmsWarning, estimate_pc, estimate_pc_many
from .matching import MatchSpec
from .synth import largest_remainder

__all__ = [
    "SkippedIterationsError",
    "PCDistribution",
    "StrataRatios",
    "summarize",
    "iteration_rng",
    "bootstrap_distribution",
    "resampling_distribution",
    "simulation_distribution",
    "ensemble_distribution",
]

MAX_SKIP_FRACTION = 0.5


class SkippedIterationsError(EstimationError):
    def __init__(self, skipped: int, total: int, reason: str = ""):
        self.skipped = skipped
        self.total = total
        msg = f"{skipped} of {total} iterations could not be estimated"
        if reason:
            msg += f" (first failure: {reason})"
        super().__init__(msg)


def summarize(samples) -> dict[str, float]:
    """Median, IQR (linear-interpolation quartiles), sd (n-1), min and max."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise ValidationError("cannot summarize an empty sample")
    q1, med, q3 = np.percentile(x, [25, 50, 75])
    return {
        "median": float(med),
        "iqr": float(q3 - q1),
        # statistics.stdev is exact for constant samples, numpy is not
        "sd": statistics.stdev(x.tolist()) if x.size > 1 else 0.0,
        "min": float(x.min()),
        "max": float(x.max()),
    }


def iteration_rng(seed: int, i: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i,)))


@dataclass(frozen=True, eq=False)
class PCDistribution:
    """PC values from repeated estimation, one row per successful iteration."""

    method: str
    seed: int | None
    iterations: int
    index: np.ndarray
    pc_raw: np.ndarray
    pc_clamped: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    skipped: tuple[int, ...] = ()
    labels: tuple[str, ...] | None = None

    @property
    def samples(self) -> np.ndarray:
        return self.pc_raw

    def summary(self) -> dict[str, float]:
        return summarize(self.pc_raw)

    @property
    def median(self) -> float:
        return self.summary()["median"]

    @property
    def iqr(self) -> float:
        return self.summary()["iqr"]

    @property
    def sd(self) -> float:
        return self.summary()["sd"]

    @property
    def envelope(self) -> tuple[float, float]:
        """Smallest lower bound and largest upper bound over all iterations."""
        return float(self.lower.min()), float(self.upper.max())

    def summary_record(self) -> dict:
        out = {
            "method": self.method,
            "seed": self.seed,
            "iterations": self.iterations,
            "estimated": int(self.pc_raw.size),
            "skipped": list(self.skipped),
            **self.summary(),
            "envelope_lower": self.envelope[0],
            "envelope_upper": self.envelope[1],
            "out_of_bounds": int(np.sum(self.pc_raw != self.pc_clamped)),
        }
        if self.labels is not None:
            out["labels"] = list(self.labels)
        return out

    def write_csv(self, fh: TextIO) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "pc_raw", "pc_clamped", "lower", "upper"])
        for row in zip(self.index, self.pc_raw, self.pc_clamped, self.lower, self.upper):
            w.writerow([int(row[0])] + [repr(float(v)) for v in row[1:]])

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


def _collect(
    method: str,
    seed: int | None,
    results: Sequence[PCEstimate | EstimationError],
    labels: Sequence[str] | None = None,
    allowed_skip: float = MAX_SKIP_FRACTION,
) -> PCDistribution:
    ok = [(i, r) for i, r in enumerate(results) if isinstance(r, PCEstimate)]
    bad = [i for i, r in enumerate(results) if not isinstance(r, PCEstimate)]
    if not ok or len(bad) > allowed_skip * len(results):
        raise SkippedIterationsError(len(bad), len(results), str(results[bad[0]]) if bad else "")
    idx = np.array([i for i, _ in ok], dtype=np.int64)
    return PCDistribution(
        method=method,
        seed=seed,
        iterations=len(results),
        index=idx,
        pc_raw=np.array([r.pc_raw for _, r in ok]),
        pc_clamped=np.array([r.pc_clamped for _, r in ok]),
        lower=np.array([r.bound_lower for _, r in ok]),
        upper=np.array([r.bound_upper for _, r in ok]),
        skipped=tuple(bad),
        labels=tuple(labels[i] for i, _ in ok) if labels is not None else None,
    )


def _safe_estimate(p_or_fn, spec: MatchSpec) -> PCEstimate | EstimationError:
    try:
        p = p_or_fn() if callable(p_or_fn) else p_or_fn
        return estimate_pc(p, spec, warn_unbalanced=False)
    except EstimationError as exc:
        return exc


def _safe_many(p: PartitionedSample, specs: Sequence[MatchSpec]) -> list:
    try:
        return estimate_pc_many(p, specs)
    except EstimationError:
        # one spec failed; find out which
        return [_safe_estimate(p, s) for s in specs]


def _map(fn: Callable[[int], object], n: int, n_jobs: int) -> list:
    if n_jobs <= 1:
        return [fn(i) for i in range(n)]
    with ThreadPoolExecutor(max_workers=n_jobs) as ex:
        return list(ex.map(fn, range(n)))


def _check_iterations(iterations: int) -> None:
    if isinstance(iterations, bool) or int(iterations) != iterations or iterations < 1:
        raise ValidationError(f"iterations must be a positive integer, got {iterations!r}")


def _require_seed(seed) -> int:
    if seed is None:
        raise ValidationError("a master seed is required for reproducible resampling")
    return int(seed)


def _relabel(data: Dataset, idx: np.ndarray) -> Dataset:
    # resampled copies get unique ids "<id>#<draw>"
    sub = data.take(idx)
    tags = np.char.add("#", np.arange(len(idx)).astype(str))
    return Dataset(sub.ids.astype(object) + tags.astype(object), sub.covariates, sub.x, sub.y,
                   sub.covariate_names)


def _warn_if_unbalanced(n0: int, n1: int) -> None:
    if n0 != n1:
        warnings.warn(
            f"arms differ in size ({n0} vs {n1}); PC uses within-arm proportions",
            UnbalancedArmsWarning,
            stacklevel=3,
        )


def bootstrap_distribution(
    units: UnitsLike,
    spec: MatchSpec | None = None,
    iterations: int = 1000,
    seed: int | None = None,
    *,
    n_jobs: int = 1,
) -> PCDistribution:
    """Resample each arm with replacement at its original size and re-estimate."""
    spec = spec or MatchSpec()
    seed = _require_seed(seed)
    _check_iterations(iterations)
    data = as_dataset(units)
    partition_dataset(data)  # validates ids and binary columns
    arm0 = np.flatnonzero(data.x == 0)
    arm1 = np.flatnonzero(data.x == 1)
    _warn_if_unbalanced(arm0.size, arm1.size)

    def one(i: int):
        rng = iteration_rng(seed, i)
        idx = np.concatenate([
            rng.choice(arm0, size=arm0.size, replace=True),
            rng.choice(arm1, size=arm1.size, replace=True),
        ])
        return _safe_estimate(lambda: partition_dataset(_relabel(data, idx), check_ids=False), spec)

    return _collect("bootstrap", seed, _map(one, iterations, n_jobs))


@dataclass(frozen=True)
class StrataRatios:
    """Target share of Y=1 units within the X=0 and X=1 arms."""

    p_effect_given_cause0: float
    p_effect_given_cause1: float

    def __post_init__(self):
        for v in (self.p_effect_given_cause0, self.p_effect_given_cause1):
            if not 0.0 <= v <= 1.0:
                raise ValidationError(f"stratum ratio must lie in [0, 1], got {v!r}")

    @classmethod
    def from_data(cls, units: UnitsLike) -> StrataRatios:
        """Ratios observed in the data itself."""
        p = partition_dataset(units)
        if p.n0 == 0 or p.n1 == 0:
            raise ValidationError("both arms must be nonempty to read strata ratios")
        return cls(len(p.set_b) / p.n0, len(p.set_d) / p.n1)

    def quotas(self, arm_size: int) -> dict[str, int]:
        n_a, n_b = largest_remainder(arm_size, [1 - self.p_effect_given_cause0, self.p_effect_given_cause0])
        n_c, n_d = largest_remainder(arm_size, [1 - self.p_effect_given_cause1, self.p_effect_given_cause1])
        return {"A": n_a, "B": n_b, "C": n_c, "D": n_d}


def resampling_distribution(
    units: UnitsLike,
    arm_size: int,
    spec: MatchSpec | None = None,
    iterations: int = 1000,
    strata: StrataRatios | None = None,
    seed: int | None = None,
    *,
    n_jobs: int = 1,
) -> PCDistribution:
    """Draw ``arm_size`` units per arm without replacement and re-estimate.

    With ``strata`` the draw is split per outcome cell so each arm's Y=1 share
    matches the given ratio (quotas by largest remainder).
    """
    spec = spec or MatchSpec()
    seed = _require_seed(seed)
    _check_iterations(iterations)
    if arm_size < 1:
        raise ValidationError("arm_size must be at least 1")
    data = as_dataset(units)
    partition_dataset(data)  # validates ids and binary columns
    cell = 2 * data.x.astype(np.int64) + data.y
    members = {name: np.flatnonzero(cell == k) for k, name in enumerate("ABCD")}
    if strata is None:
        groups = [(np.flatnonzero(data.x == 0), arm_size, "X=0 arm"),
                  (np.flatnonzero(data.x == 1), arm_size, "X=1 arm")]
    else:
        q = strata.quotas(arm_size)
        groups = [(members[name], q[name], f"cell {name}") for name in "ABCD"]
    for pool, quota, label in groups:
        if pool.size < quota:
            raise ValidationError(
                f"{label} has {pool.size} units but the draw requires {quota}"
            )

    def one(i: int):
        rng = iteration_rng(seed, i)
        idx = np.concatenate([rng.choice(pool, size=quota, replace=False) for pool, quota, _ in groups])
        return _safe_estimate(lambda: partition_dataset(data.take(idx), check_ids=False), spec)

    method = "resample" if strata is None else "resample_stratified"
    return _collect(method, seed, _map(one, iterations, n_jobs))


def simulation_distribution(
    generate: Callable[[np.random.Generator], UnitsLike],
    specs: MatchSpec | Sequence[MatchSpec],
    iterations: int = 1000,
    seed: int | None = None,
    *,
    n_jobs: int = 1,
) -> PCDistribution | list[PCDistribution]:
    """Regenerate a dataset every iteration and estimate PC on it.

    ``generate`` receives the iteration's generator.  Passing several specs
    evaluates all of them on the same generated datasets and returns one
    distribution per spec.
    """
    single = isinstance(specs, MatchSpec)
    spec_list = [specs] if single else list(specs)
    seed = _require_seed(seed)
    _check_iterations(iterations)

    def one(i: int):
        try:
            p = partition_dataset(generate(iteration_rng(seed, i)), check_ids=False)
        except EstimationError as exc:
            return [exc] * len(spec_list)
        return _safe_many(p, spec_list)

    rows = _map(one, iterations, n_jobs)
    out = [_collect("simulation", seed, [r[j] for r in rows]) for j in range(len(spec_list))]
    return out[0] if single else out


def spec_label(spec: MatchSpec) -> str:
    label = f"{spec.metric}:m={spec.m}:{spec.tie_rule}:{spec.mode}"
    if spec.threshold_t is not None:
        label += f":T={spec.threshold_t}"
    return label


def ensemble_distribution(
    units: UnitsLike | PartitionedSample,
    specs: Sequence[MatchSpec],
    seed: int | None = None,
) -> PCDistribution:
    """One PC value per matching spec on the full dataset.

    ``seed`` is recorded only; ensemble estimation involves no randomness.
    """
    specs = list(specs)
    if len(specs) < 2:
        raise ValidationError("an ensemble needs at least two matching specs")
    p = units if isinstance(units, PartitionedSample) else partition_dataset(units)
    results = _safe_many(p, specs)
    return _collect("ensemble", seed, results, labels=[spec_label(s) for s in specs])
