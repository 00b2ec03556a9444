"""Data model: units, the four outcome sets and 2x2 contingency tables.

Every unit carries a binary cause ``x``, a binary effect ``y`` and a vector of
covariates used for matching.  The four outcome sets are

    A: x=0, y=0        B: x=0, y=1
    C: x=1, y=0        D: x=1, y=1

Units are stored column-wise in a :class:`Dataset` so the matching code can work
on numpy arrays directly, but a dataset still behaves like a read-only list of
:class:`Unit` records.
"""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Union, overload

import numpy as np

__all__ = [
    "ValidationError",
    "EstimationError",
    "Unit",
    "Dataset",
    "PartitionedSample",
    "ContingencyTable",
    "partition_dataset",
    "contingency_from_partition",
    "conditional_probs",
    "expand_table",
    "as_table",
]

SET_NAMES = ("A", "B", "C", "D")
REGIMES = ("experimental", "observational")


class ValidationError(ValueError):
    """Input data violates the data model (non-binary x/y, duplicate ids, ...)."""


class EstimationError(ValueError):
    """A quantity cannot be computed for the given data (empty set, zero arm, ...)."""


@dataclass(frozen=True)
class Unit:
    id: str
    covariates: tuple[float, ...]
    x: int
    y: int

    def __post_init__(self):
        if self.x not in (0, 1) or self.y not in (0, 1):
            raise ValidationError(
                f"unit {self.id!r}: x and y must be 0 or 1, got x={self.x!r}, y={self.y!r}"
            )
        object.__setattr__(self, "id", str(self.id))
        object.__setattr__(self, "covariates", tuple(float(c) for c in self.covariates))

    @property
    def cell(self) -> str:
        return SET_NAMES[2 * self.x + self.y]


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class Dataset(Sequence):
    """Column-wise collection of units sharing one covariate schema.

    ``covariates`` has shape ``(n, len(covariate_names))``.  Arrays are made
    read-only on construction.
    """

    ids: np.ndarray
    covariates: np.ndarray | None
    x: np.ndarray
    y: np.ndarray
    covariate_names: tuple[str, ...] = ()
    _rank: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        ids = np.asarray(self.ids, dtype=str)
        n = ids.shape[0]
        names = tuple(str(c) for c in self.covariate_names)
        if self.covariates is None:
            cov = np.zeros((n, 0))
        else:
            cov = np.asarray(self.covariates, dtype=float)
        if cov.ndim != 2:
            cov = cov.reshape(n, -1) if n else cov.reshape(0, len(names))
        if cov.shape[0] != n:
            raise ValidationError(f"covariate matrix has {cov.shape[0]} rows for {n} units")
        if cov.shape[1] != len(names):
            if names:
                raise ValidationError(
                    f"covariate matrix has {cov.shape[1]} columns but schema names {len(names)}"
                )
            names = tuple(f"c{i}" for i in range(cov.shape[1]))
        if np.isnan(cov).any():
            raise ValidationError("missing covariate values are not supported")
        x = np.asarray(self.x)
        y = np.asarray(self.y)
        if x.shape != (n,) or y.shape != (n,):
            raise ValidationError("ids, x and y must have the same length")
        for label, arr in (("x", x), ("y", y)):
            bad = ~np.isin(arr, (0, 1))
            if bad.any():
                i = int(np.argmax(bad))
                raise ValidationError(
                    f"unit {ids[i]!r}: {label} must be 0 or 1, got {arr[i]!r}"
                )
        object.__setattr__(self, "ids", _readonly(ids))
        object.__setattr__(self, "covariates", _readonly(np.ascontiguousarray(cov)))
        object.__setattr__(self, "x", _readonly(x.astype(np.int8)))
        object.__setattr__(self, "y", _readonly(y.astype(np.int8)))
        object.__setattr__(self, "covariate_names", names)

    @classmethod
    def from_units(
        cls, units: Iterable[Unit], covariate_names: Sequence[str] | None = None
    ) -> Dataset:
        units = list(units)
        if units:
            width = len(units[0].covariates)
            for u in units:
                if len(u.covariates) != width:
                    raise ValidationError(
                        f"unit {u.id!r} has {len(u.covariates)} covariates, expected {width}"
                    )
        else:
            width = len(covariate_names or ())
        if covariate_names is None:
            covariate_names = tuple(f"c{i}" for i in range(width))
        cov = np.array([u.covariates for u in units], dtype=float).reshape(len(units), width)
        return cls(
            ids=np.array([u.id for u in units], dtype=str),
            covariates=cov,
            x=np.array([u.x for u in units], dtype=np.int8),
            y=np.array([u.y for u in units], dtype=np.int8),
            covariate_names=tuple(covariate_names),
        )

    def __len__(self) -> int:
        return self.ids.shape[0]

    @overload
    def __getitem__(self, i: int) -> Unit: ...
    @overload
    def __getitem__(self, i: slice) -> Dataset: ...

    def __getitem__(self, i):
        if isinstance(i, slice):
            return self.take(np.arange(len(self))[i])
        return Unit(
            id=str(self.ids[i]),
            covariates=tuple(self.covariates[i].tolist()),
            x=int(self.x[i]),
            y=int(self.y[i]),
        )

    def take(self, idx) -> Dataset:
        idx = np.asarray(idx)
        return Dataset(
            ids=self.ids[idx],
            covariates=self.covariates[idx],
            x=self.x[idx],
            y=self.y[idx],
            covariate_names=self.covariate_names,
        )

    def units(self) -> list[Unit]:
        return list(self)

    @property
    def id_rank(self) -> np.ndarray:
        """Position of each id in ascending (lexicographic) id order."""
        if self._rank is None:
            rank = np.empty(len(self), dtype=np.int64)
            rank[np.argsort(self.ids, kind="stable")] = np.arange(len(self))
            object.__setattr__(self, "_rank", _readonly(rank))
        return self._rank

    @staticmethod
    def concat(parts: Sequence[Dataset]) -> Dataset:
        names = parts[0].covariate_names
        for p in parts[1:]:
            if p.covariate_names != names:
                raise ValidationError("cannot combine datasets with different covariate schemas")
        return Dataset(
            ids=np.concatenate([p.ids for p in parts]),
            covariates=np.concatenate([p.covariates for p in parts]),
            x=np.concatenate([p.x for p in parts]),
            y=np.concatenate([p.y for p in parts]),
            covariate_names=names,
        )


UnitsLike = Union[Dataset, Sequence[Unit]]


def as_dataset(units: UnitsLike, covariate_names: Sequence[str] | None = None) -> Dataset:
    if isinstance(units, Dataset):
        return units
    return Dataset.from_units(units, covariate_names)


@dataclass(frozen=True, eq=False)
class PartitionedSample:
    set_a: Dataset
    set_b: Dataset
    set_c: Dataset
    set_d: Dataset

    @property
    def covariate_names(self) -> tuple[str, ...]:
        return self.set_a.covariate_names

    @property
    def n0(self) -> int:
        return len(self.set_a) + len(self.set_b)

    @property
    def n1(self) -> int:
        return len(self.set_c) + len(self.set_d)

    @property
    def balanced(self) -> bool:
        return self.n0 == self.n1

    @property
    def sizes(self) -> dict[str, int]:
        return {
            "A": len(self.set_a),
            "B": len(self.set_b),
            "C": len(self.set_c),
            "D": len(self.set_d),
        }

    def pool(self) -> Dataset:
        """The X=0 arm, A followed by B."""
        return Dataset.concat([self.set_a, self.set_b])

    def all_units(self) -> Dataset:
        return Dataset.concat([self.set_a, self.set_b, self.set_c, self.set_d])

    def replace_d(self, set_d: Dataset) -> PartitionedSample:
        return PartitionedSample(self.set_a, self.set_b, self.set_c, set_d)


def _split(data: Dataset) -> PartitionedSample:
    cell = 2 * data.x.astype(np.int64) + data.y
    return PartitionedSample(*(data.take(np.flatnonzero(cell == k)) for k in range(4)))


def partition_dataset(units: UnitsLike, *, check_ids: bool = True) -> PartitionedSample:
    """Split units into the sets A, B, C, D.

    Raises :class:`ValidationError` on an empty input, non-binary x/y, a
    ragged covariate schema, or (unless ``check_ids`` is false) duplicate ids.
    """
    data = as_dataset(units)
    if len(data) == 0:
        raise ValidationError("cannot partition an empty dataset")
    if check_ids:
        uniq, counts = np.unique(data.ids, return_counts=True)
        if (counts > 1).any():
            raise ValidationError(f"duplicate unit id {str(uniq[np.argmax(counts > 1)])!r}")
    return _split(data)


@dataclass(frozen=True)
class ContingencyTable:
    """2x2 counts.  ``x_not`` / ``y_not`` stand for x' and y'."""

    n_xy: int
    n_xy_not: int
    n_x_not_y: int
    n_x_not_y_not: int
    regime: str = "observational"

    def __post_init__(self):
        for name in ("n_xy", "n_xy_not", "n_x_not_y", "n_x_not_y_not"):
            v = getattr(self, name)
            if isinstance(v, float) and v.is_integer():
                v = int(v)
                object.__setattr__(self, name, v)
            if not isinstance(v, (int, np.integer)) or isinstance(v, bool):
                raise ValidationError(f"{name} must be an integer count, got {v!r}")
            if v < 0:
                raise ValidationError(f"{name} must be nonnegative, got {v}")
            object.__setattr__(self, name, int(v))
        if self.regime not in REGIMES:
            raise ValidationError(f"regime must be one of {REGIMES}, got {self.regime!r}")
        if self.total == 0:
            raise ValidationError("contingency table is empty")

    @property
    def total(self) -> int:
        return self.n_xy + self.n_xy_not + self.n_x_not_y + self.n_x_not_y_not

    @property
    def n_x(self) -> int:
        return self.n_xy + self.n_xy_not

    @property
    def n_x_not(self) -> int:
        return self.n_x_not_y + self.n_x_not_y_not

    # set-size view: A=x'y', B=x'y, C=xy', D=xy
    @property
    def sizes(self) -> dict[str, int]:
        return {"A": self.n_x_not_y_not, "B": self.n_x_not_y, "C": self.n_xy_not, "D": self.n_xy}

    def counts(self) -> tuple[int, int, int, int]:
        return (self.n_xy, self.n_xy_not, self.n_x_not_y, self.n_x_not_y_not)


def contingency_from_partition(
    p: PartitionedSample, regime: str = "observational"
) -> ContingencyTable:
    s = p.sizes
    return ContingencyTable(
        n_xy=s["D"], n_xy_not=s["C"], n_x_not_y=s["B"], n_x_not_y_not=s["A"], regime=regime
    )


def as_table(obj: ContingencyTable | PartitionedSample) -> ContingencyTable:
    if isinstance(obj, ContingencyTable):
        return obj
    if isinstance(obj, PartitionedSample):
        return contingency_from_partition(obj)
    raise TypeError(f"expected ContingencyTable or PartitionedSample, got {type(obj).__name__}")


def _exact_probs(t: ContingencyTable) -> dict[str, Fraction]:
    if t.n_x == 0:
        raise EstimationError("undefined conditional: column x has zero total")
    if t.n_x_not == 0:
        raise EstimationError("undefined conditional: column x' has zero total")
    n = t.total
    return {
        "p_y_given_x": Fraction(t.n_xy, t.n_x),
        "p_y_given_x_not": Fraction(t.n_x_not_y, t.n_x_not),
        "p_xy": Fraction(t.n_xy, n),
        "p_x_not_y": Fraction(t.n_x_not_y, n),
        "p_y": Fraction(t.n_xy + t.n_x_not_y, n),
        "p_x_not_y_not": Fraction(t.n_x_not_y_not, n),
    }


def conditional_probs(t: ContingencyTable | PartitionedSample) -> dict[str, float]:
    """Conditional and joint probabilities of a table.

    Keys: ``p_y_given_x``, ``p_y_given_x_not``, ``p_xy``, ``p_x_not_y``, ``p_y``
    and ``p_x_not_y_not``.  Computed exactly and rounded once, so
    ``p_y == p_xy + p_x_not_y`` up to a single rounding.
    """
    return {k: float(v) for k, v in _exact_probs(as_table(t)).items()}


def expand_table(t: ContingencyTable, covariates: np.ndarray | None = None) -> Dataset:
    """Synthesize unit-level data whose partition reproduces ``t``.

    Units are ordered A, B, C, D with ids ``a0..``, ``b0..`` and so on.
    ``covariates`` (optional) must have one row per unit in that order.
    """
    s = t.sizes
    ids, xs, ys = [], [], []
    for name, x, y in (("A", 0, 0), ("B", 0, 1), ("C", 1, 0), ("D", 1, 1)):
        ids += [f"{name.lower()}{i}" for i in range(s[name])]
        xs += [x] * s[name]
        ys += [y] * s[name]
    n = len(ids)
    cov = np.zeros((n, 0)) if covariates is None else np.asarray(covariates, dtype=float).reshape(n, -1)
    return Dataset(ids=np.array(ids), covariates=cov, x=np.array(xs), y=np.array(ys))
