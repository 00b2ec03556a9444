"""Point estimates of the probability of causation and its theoretical limits.

PC is the share of Set D whose closest X=0 counterpart lies in Set A.  With
``m`` matches per element each element contributes the fraction of its
matches found in A, and PC is the mean over D.

Given PC, the transition coefficients follow from

    PC = a |A| / |D|          PC = 1 - b |B| / |D|

and, writing RR = P(Y=1 | X<-1) / P(Y=1 | X<-0),

    max{0, 1 - 1/RR}  <=  PC  <=  min{1, P(Y=0 | X<-0) / P(Y=1 | X<-1)}.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .core import (
    ContingencyTable,
    EstimationError,
    PartitionedSample,
    ValidationError,
    as_table,
)
from .matching import DatasetStats, MatchSpec, credits_into_a, match_all

__all__ = [
    "UnbalancedArmsWarning",
    "PCEstimate",
    "estimate_pc",
    "estimate_pc_many",
    "risk_ratio",
    "pc_bounds",
    "pc_under_monotonicity",
    "pc_under_reverse_monotonicity",
    "pc_from_coefficients",
]

TOL = 1e-12


class UnbalancedArmsWarning(UserWarning):
    """The X=0 and X=1 arms differ in size, so |A|+|B| != |C|+|D|."""


@dataclass(frozen=True)
class PCEstimate:
    pc_raw: float
    pc_clamped: float
    a: float
    b: float
    rr: float
    bound_lower: float
    bound_upper: float
    out_of_bounds: bool
    n_a: int
    n_b: int
    n_c: int
    n_d: int
    spec: MatchSpec
    n_d_used: int
    a_counted: float | None = None
    b_counted: float | None = None
    arms_balanced: bool = True

    def to_dict(self) -> dict:
        out = {
            k: getattr(self, k)
            for k in (
                "pc_raw", "pc_clamped", "a", "b", "rr", "bound_lower", "bound_upper",
                "out_of_bounds", "n_a", "n_b", "n_c", "n_d", "n_d_used",
                "a_counted", "b_counted", "arms_balanced",
            )
        }
        out["spec"] = self.spec.to_dict()
        return out


def _arm_rates(t: ContingencyTable) -> tuple[Fraction, Fraction]:
    if t.n_x == 0:
        raise EstimationError("the X=1 arm (sets C, D) is empty")
    if t.n_x_not == 0:
        raise EstimationError("the X=0 arm (sets A, B) is empty")
    return Fraction(t.n_xy, t.n_x), Fraction(t.n_x_not_y, t.n_x_not)


def _rr_exact(t: ContingencyTable) -> Fraction | float:
    p1, p0 = _arm_rates(t)
    if p0 == 0:
        if p1 == 0:
            raise EstimationError("risk ratio undefined: no Y=1 cases in either arm")
        return math.inf
    return p1 / p0


def risk_ratio(t: ContingencyTable | PartitionedSample) -> float:
    """P(Y=1 | X<-1) / P(Y=1 | X<-0); ``inf`` when |B| = 0 < |D|."""
    return float(_rr_exact(as_table(t)))


def _bounds_exact(t: ContingencyTable) -> tuple[Fraction, Fraction]:
    if t.n_xy == 0:
        raise EstimationError("PC bounds undefined: Set D is empty")
    p1, p0 = _arm_rates(t)
    lower = max(Fraction(0), 1 - p0 / p1)
    upper = min(Fraction(1), Fraction(t.n_x_not_y_not, t.n_x_not) / p1)
    return lower, upper


def pc_bounds(t: ContingencyTable | PartitionedSample) -> tuple[float, float]:
    """Lower and upper limits of PC implied by the 2x2 counts alone."""
    lo, hi = _bounds_exact(as_table(t))
    return float(lo), float(hi)


def pc_under_monotonicity(t: ContingencyTable | PartitionedSample) -> float:
    """PC when every B element maps into D (b = 1): ``1 - 1/RR``.

    Infeasible when the Y=1 rate under X=0 exceeds that under X=1 (with equal
    arms: |B| > |D|).
    """
    t = as_table(t)
    p1, p0 = _arm_rates(t)
    if p0 > p1:
        raise EstimationError(
            f"monotonicity infeasible: |B| = {t.n_x_not_y} exceeds |D| = {t.n_xy} "
            "(after scaling to equal arms)"
        )
    rr = _rr_exact(t)
    return 1.0 if rr == math.inf else float(1 - 1 / rr)


def pc_under_reverse_monotonicity(t: ContingencyTable | PartitionedSample) -> float:
    """PC when every B element maps into C (b = 0), which forces PC = 1."""
    t = as_table(t)
    _, p0 = _arm_rates(t)
    p1_not = Fraction(t.n_xy_not, t.n_x)
    if p0 > p1_not:
        raise EstimationError(
            f"reverse-monotonicity infeasible: |B| = {t.n_x_not_y} exceeds |C| = {t.n_xy_not} "
            "(after scaling to equal arms)"
        )
    return 1.0


def pc_from_coefficients(b: float, rr: float) -> float:
    if not 0.0 <= b <= 1.0:
        raise ValidationError(f"b must lie in [0, 1], got {b!r}")
    if not rr > 0:
        raise ValidationError(f"rr must be positive, got {rr!r}")
    if math.isinf(rr):
        return 1.0
    return 1.0 - b / rr


def estimate_pc(
    p: PartitionedSample,
    spec: MatchSpec | None = None,
    stats: DatasetStats | None = None,
    *,
    warn_unbalanced: bool = True,
) -> PCEstimate:
    """Estimate PC by matching every element of Set D into A u B.

    ``pc_raw`` is the matching estimate; ``pc_clamped`` is clipped into
    :func:`pc_bounds` and ``out_of_bounds`` records whether clipping moved it.
    With-replacement matching can land outside the bounds, for instance when
    many D elements share one A neighbour.
    """
    spec = spec or MatchSpec()
    est = estimate_pc_many(p, [spec], stats)[0]
    if warn_unbalanced and not p.balanced:
        warnings.warn(
            f"arms differ in size (|A|+|B| = {p.n0}, |C|+|D| = {p.n1}); "
            "PC is computed from within-arm proportions",
            UnbalancedArmsWarning,
            stacklevel=2,
        )
    return est


def estimate_pc_many(
    p: PartitionedSample, specs, stats: DatasetStats | None = None
) -> list[PCEstimate]:
    """:func:`estimate_pc` for several specs on one partition, without warnings.

    Specs with the same metric reuse one distance matrix.
    """
    specs = list(specs)
    sizes = p.sizes
    n_a, n_b, n_d = sizes["A"], sizes["B"], sizes["D"]
    credits = credits_into_a(p, specs, stats)
    t = as_table(p)
    rr = risk_ratio(t)
    lower, upper = pc_bounds(t)
    out = []
    for spec, (credit, matched) in zip(specs, credits):
        n_used = int(matched.sum())
        if n_used == 0:
            raise EstimationError("no element of Set D has an eligible match above threshold_t")
        pc_raw = float(credit[matched].sum() / n_used)
        pc_raw = min(1.0, max(0.0, pc_raw))

        a = pc_raw * n_used / n_a if n_a else 0.0
        b = (1.0 - pc_raw) * n_used / n_b if n_b else 0.0
        a_counted = b_counted = None
        if spec.mode == "balanced_assignment":
            # each consumed pool element carries credit 1/m
            used_a = round(float(credit[matched].sum()) * spec.m)
            used_b = n_used * spec.m - used_a
            a_counted = used_a / (spec.m * n_a) if n_a else 0.0
            b_counted = used_b / (spec.m * n_b) if n_b else 0.0
        out.append(PCEstimate(
            pc_raw=pc_raw,
            pc_clamped=float(np.clip(pc_raw, lower, upper)),
            a=a,
            b=b,
            rr=rr,
            bound_lower=lower,
            bound_upper=upper,
            out_of_bounds=bool(pc_raw < lower - TOL or pc_raw > upper + TOL),
            n_a=n_a,
            n_b=n_b,
            n_c=sizes["C"],
            n_d=n_d,
            spec=spec,
            n_d_used=n_used,
            a_counted=a_counted,
            b_counted=b_counted,
            arms_balanced=p.balanced,
        ))
    return out


def counted_coefficients(p: PartitionedSample, spec: MatchSpec) -> tuple[int, int]:
    """Number of A and B pool elements consumed by a balanced assignment."""
    if spec.mode != "balanced_assignment":
        raise ValidationError("counted coefficients are only defined for balanced_assignment")
    asg = match_all(p, spec)
    used_a = sum(1 for ms in asg.matches for m in ms if m.source == "A")
    used_b = sum(1 for ms in asg.matches for m in ms if m.source == "B")
    return used_a, used_b
