"""Bounds on the probability of necessity, and perturbation sweeps.

PN is bounded from a pair of tables, one experimental and one observational:

    PN >= (P(y) - P(y | do(x'))) / P(x, y)
    PN <= (P(y' | do(x')) - P(x', y')) / P(x, y)

Both are clipped to [0, 1].  The lower bound reacts violently to single-count
changes when P(x, y) is small; :func:`sensitivity_sweep` traces that.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Iterable, TextIO

from .core import ContingencyTable, EstimationError, ValidationError

__all__ = [
    "PNResult",
    "SweepCurve",
    "pn_bounds",
    "pc_lower_experimental",
    "perturb",
    "sensitivity_sweep",
    "CELLS",
    "ESTIMATORS",
]

CELLS = ("xy", "xy'", "x'y", "x'y'")
ESTIMATORS = ("pn_lower", "pc_lower_experimental")

# cell label -> (attribute, partner attribute in the same column)
_CELL_ATTRS = {
    "xy": ("n_xy", "n_xy_not"),
    "xy'": ("n_xy_not", "n_xy"),
    "x'y": ("n_x_not_y", "n_x_not_y_not"),
    "x'y'": ("n_x_not_y_not", "n_x_not_y"),
}


def _clip01(v: Fraction) -> Fraction:
    return min(Fraction(1), max(Fraction(0), v))


@dataclass(frozen=True)
class PNResult:
    pn_lower: float
    pn_upper: float
    raw_lower: float
    raw_upper: float
    experimental: ContingencyTable
    observational: ContingencyTable

    def to_dict(self) -> dict:
        return {
            "pn_lower": self.pn_lower,
            "pn_upper": self.pn_upper,
            "raw_lower": self.raw_lower,
            "raw_upper": self.raw_upper,
            "experimental": _table_dict(self.experimental),
            "observational": _table_dict(self.observational),
        }


def _table_dict(t: ContingencyTable) -> dict:
    return {
        "xy": t.n_xy,
        "xy_not": t.n_xy_not,
        "x_not_y": t.n_x_not_y,
        "x_not_y_not": t.n_x_not_y_not,
        "regime": t.regime,
    }


def _pn_exact(exp: ContingencyTable, obs: ContingencyTable) -> tuple[Fraction, Fraction]:
    if exp.n_x == 0 or exp.n_x_not == 0:
        raise EstimationError("experimental table needs both arms (x and x') nonempty")
    if obs.n_xy == 0:
        raise EstimationError("PN undefined: no observed (x,y) cases")
    n = obs.total
    p_xy = Fraction(obs.n_xy, n)
    p_y = Fraction(obs.n_xy + obs.n_x_not_y, n)
    p_x_not_y_not = Fraction(obs.n_x_not_y_not, n)
    p_y_do_x_not = Fraction(exp.n_x_not_y, exp.n_x_not)
    lower = (p_y - p_y_do_x_not) / p_xy
    upper = ((1 - p_y_do_x_not) - p_x_not_y_not) / p_xy
    return lower, upper


def pn_bounds(experimental: ContingencyTable, observational: ContingencyTable) -> PNResult:
    """Bounds on PN from combined experimental and observational counts.

    Evaluated in exact rational arithmetic, so e.g. a raw lower bound of
    exactly 1 is reported as ``1.0`` rather than ``1.0000000000000009``.
    """
    lo, hi = _pn_exact(experimental, observational)
    return PNResult(
        pn_lower=float(_clip01(lo)),
        pn_upper=float(_clip01(hi)),
        raw_lower=float(lo),
        raw_upper=float(hi),
        experimental=experimental,
        observational=observational,
    )


def pc_lower_experimental(t: ContingencyTable) -> float:
    """``max{0, 1 - P(y|do(x')) / P(y|do(x))}`` from one experimental table."""
    if t.n_x == 0 or t.n_x_not == 0:
        raise EstimationError("experimental table needs both arms (x and x') nonempty")
    if t.n_xy == 0:
        raise EstimationError("P(y|do(x)) is zero; the ratio is undefined")
    ratio = Fraction(t.n_x_not_y, t.n_x_not) / Fraction(t.n_xy, t.n_x)
    return float(max(Fraction(0), 1 - ratio))


def perturb(t: ContingencyTable, cell: str, k: int) -> ContingencyTable:
    """Move ``k`` counts into ``cell`` from the other cell of the same column.

    The column (arm) total is preserved.  Negative ``k`` moves counts out.
    """
    if cell not in _CELL_ATTRS:
        raise ValidationError(f"unknown cell {cell!r}; choose from {CELLS}")
    attr, partner = _CELL_ATTRS[cell]
    new = getattr(t, attr) + k
    rest = getattr(t, partner) - k
    if new < 0 or rest < 0:
        raise ValidationError(f"perturbation k={k} drives a count negative in column of {cell!r}")
    return replace(t, **{attr: new, partner: rest})


@dataclass(frozen=True)
class SweepCurve:
    estimator: str
    cell: str
    points: tuple[tuple[int, float], ...]

    @property
    def ks(self) -> list[int]:
        return [k for k, _ in self.points]

    @property
    def values(self) -> list[float]:
        return [v for _, v in self.points]

    def to_dict(self) -> dict:
        return {
            "estimator": self.estimator,
            "cell": self.cell,
            "points": [{"k": k, "value": v} for k, v in self.points],
        }

    def write_csv(self, fh: TextIO) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "estimator", "value"])
        for k, v in self.points:
            w.writerow([k, self.estimator, repr(v)])

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


def _parse_cell(cell: str) -> tuple[str, str]:
    name, _, table = cell.partition("@")
    table = table or "experimental"
    if name not in _CELL_ATTRS or table not in ("experimental", "observational"):
        raise ValidationError(
            f"cell must look like <cell>@<experimental|observational> with cell in {CELLS}, got {cell!r}"
        )
    return name, table


def sensitivity_sweep(
    experimental: ContingencyTable,
    observational: ContingencyTable | None,
    cell: str,
    k_range: Iterable[int],
    estimator: str = "pn_lower",
) -> SweepCurve:
    """Evaluate ``estimator`` while perturbing one cell by each k in ``k_range``.

    ``cell`` is e.g. ``"x'y@experimental"``.
    """
    if estimator not in ESTIMATORS:
        raise ValidationError(f"unknown estimator {estimator!r}; choose from {ESTIMATORS}")
    name, which = _parse_cell(cell)
    if estimator == "pn_lower" and observational is None:
        raise ValidationError("pn_lower needs an observational table")
    if which == "observational" and observational is None:
        raise ValidationError("cannot perturb a missing observational table")
    ks = [int(k) for k in k_range]
    if any(b <= a for a, b in zip(ks, ks[1:])):
        raise ValidationError("k_range must be strictly increasing")
    points = []
    for k in ks:
        exp, obs = experimental, observational
        if which == "experimental":
            exp = perturb(exp, name, k)
        else:
            obs = perturb(obs, name, k)
        if estimator == "pn_lower":
            v = pn_bounds(exp, obs).pn_lower
        else:
            v = pc_lower_experimental(exp)
        points.append((k, v))
    return SweepCurve(estimator=estimator, cell=f"{name}@{which}", points=tuple(points))
