"""CSV/JSON readers and writers.

Unit CSV: header ``id,x,y,<covariate names...>``, one unit per row.

Table CSV::

    cell,count
    xy,16
    xy_not,984
    x_not_y,14
    x_not_y_not,986
    regime,experimental

``"-"`` as a path means stdin (readers) or stdout (writers).
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, TextIO

import numpy as np

from .core import ContingencyTable, Dataset, Unit, ValidationError

__all__ = [
    "read_text",
    "load_units_csv",
    "units_to_csv",
    "load_table",
    "table_to_csv",
    "load_target_csv",
    "RunReport",
]

TABLE_CELLS = ("xy", "xy_not", "x_not_y", "x_not_y_not")


def read_text(source) -> str:
    """Read a path, ``"-"`` (stdin) or an open text stream."""
    if hasattr(source, "read"):
        return source.read()
    if str(source) == "-":
        return sys.stdin.read()
    return Path(source).read_text(encoding="utf-8")


def digest(text: str) -> str:
    return "sha256:" + hashlib.sha256(text.encode("utf-8")).hexdigest()


def _binary(value: str, name: str, line: int) -> int:
    try:
        v = float(value)
    except ValueError:
        raise ValidationError(f"line {line}: {name}={value!r} is not a number") from None
    if v not in (0.0, 1.0):
        raise ValidationError(f"line {line}: {name} must be 0 or 1, got {value!r}")
    return int(v)


def parse_units_csv(text: str) -> Dataset:
    rows = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(rows)]
    except StopIteration:
        raise ValidationError("unit CSV is empty") from None
    if header[:3] != ["id", "x", "y"]:
        raise ValidationError(f"line 1: header must start with id,x,y; got {','.join(header[:3])}")
    names = tuple(header[3:])
    if len(set(names)) != len(names):
        raise ValidationError("line 1: duplicate covariate name in header")
    ids, xs, ys, cov = [], [], [], []
    seen: dict[str, int] = {}
    for line, row in enumerate(rows, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ValidationError(f"line {line}: expected {len(header)} fields, got {len(row)}")
        uid = row[0].strip()
        if uid in seen:
            raise ValidationError(f"line {line}: duplicate id {uid!r} (first seen on line {seen[uid]})")
        seen[uid] = line
        xs.append(_binary(row[1], "x", line))
        ys.append(_binary(row[2], "y", line))
        vals = []
        for name, c in zip(names, row[3:]):
            c = c.strip()
            if c == "":
                raise ValidationError(f"line {line}: missing value for covariate {name!r}")
            try:
                v = float(c)
            except ValueError:
                raise ValidationError(f"line {line}: covariate {name}={c!r} is not a number") from None
            if math.isnan(v):
                raise ValidationError(f"line {line}: missing value for covariate {name!r}")
            vals.append(v)
        ids.append(uid)
        cov.append(vals)
    return Dataset(
        ids=np.array(ids, dtype=str),
        covariates=np.array(cov, dtype=float).reshape(len(ids), len(names)),
        x=np.array(xs, dtype=np.int8),
        y=np.array(ys, dtype=np.int8),
        covariate_names=names,
    )


def load_units_csv(source) -> Dataset:
    """Load units from a path, ``"-"`` or a text stream."""
    return parse_units_csv(read_text(source))


def units_to_csv(data: Dataset) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["id", "x", "y", *data.covariate_names])
    for i in range(len(data)):
        w.writerow([data.ids[i], int(data.x[i]), int(data.y[i]),
                    *(repr(float(v)) for v in data.covariates[i])])
    return buf.getvalue()


def parse_table(text: str) -> ContingencyTable:
    counts: dict[str, int] = {}
    regime = None
    for line, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not row or row[0].strip().startswith("#") and "regime" not in row[0]:
            continue
        key = row[0].strip().lstrip("#").strip()
        if key.startswith("regime"):
            # "regime,<value>" or "# regime: <value>"
            regime = row[1].strip() if len(row) > 1 else key.partition(":")[2].strip()
            continue
        if line == 1 and [c.strip() for c in row[:2]] == ["cell", "count"]:
            continue
        if key not in TABLE_CELLS:
            raise ValidationError(f"line {line}: unknown cell {key!r}; expected one of {TABLE_CELLS}")
        if key in counts:
            raise ValidationError(f"line {line}: cell {key!r} given twice")
        if len(row) < 2:
            raise ValidationError(f"line {line}: missing count for cell {key!r}")
        try:
            v = float(row[1])
        except ValueError:
            raise ValidationError(f"line {line}: count {row[1]!r} is not a number") from None
        if v < 0:
            raise ValidationError(f"line {line}: negative count {row[1].strip()} for cell {key!r}")
        if not v.is_integer():
            raise ValidationError(f"line {line}: count {row[1].strip()} is not an integer")
        counts[key] = int(v)
    missing = [c for c in TABLE_CELLS if c not in counts]
    if missing:
        raise ValidationError(f"table is missing cell(s): {', '.join(missing)}")
    if regime is None:
        raise ValidationError("table is missing the regime line (experimental or observational)")
    return ContingencyTable(
        n_xy=counts["xy"],
        n_xy_not=counts["xy_not"],
        n_x_not_y=counts["x_not_y"],
        n_x_not_y_not=counts["x_not_y_not"],
        regime=regime,
    )


def load_table(source) -> ContingencyTable:
    return parse_table(read_text(source))


def table_to_csv(t: ContingencyTable) -> str:
    return (
        "cell,count\n"
        f"xy,{t.n_xy}\nxy_not,{t.n_xy_not}\nx_not_y,{t.n_x_not_y}\n"
        f"x_not_y_not,{t.n_x_not_y_not}\nregime,{t.regime}\n"
    )


def load_target_csv(source, covariate_names: tuple[str, ...]) -> Unit:
    """One-row CSV describing a target individual.

    Must contain a column for every covariate in ``covariate_names``; ``id``,
    ``x`` and ``y`` are optional (defaults ``target``, 1, 1).
    """
    rows = list(csv.DictReader(io.StringIO(read_text(source))))
    if len(rows) != 1:
        raise ValidationError(f"target CSV must have exactly one data row, found {len(rows)}")
    row = {k.strip(): (v or "").strip() for k, v in rows[0].items() if k is not None}
    missing = [c for c in covariate_names if c not in row or row[c] == ""]
    if missing:
        raise ValidationError(f"target CSV lacks covariate(s): {', '.join(missing)}")
    try:
        cov = tuple(float(row[c]) for c in covariate_names)
    except ValueError as exc:
        raise ValidationError(f"target CSV: {exc}") from None
    return Unit(
        id=row.get("id") or "target",
        covariates=cov,
        x=_binary(row.get("x") or "1", "x", 2),
        y=_binary(row.get("y") or "1", "y", 2),
    )


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return "nan"
        return v
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


@dataclass
class RunReport:
    """What a CLI run did: command, input digests, spec, payload, timing, seed.

    Infinite floats are stored as the strings ``"inf"`` / ``"-inf"`` so the
    JSON stays standard.
    """

    command: list[str]
    inputs: dict[str, str] = field(default_factory=dict)
    spec: dict | None = None
    payload: dict = field(default_factory=dict)
    seed: int | None = None
    timing: float | None = None

    def to_dict(self) -> dict:
        return _jsonable({
            "command": self.command,
            "inputs": self.inputs,
            "spec": self.spec,
            "payload": self.payload,
            "seed": self.seed,
            "timing": self.timing,
        })

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, allow_nan=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> RunReport:
        d = json.loads(text)
        return cls(
            command=d["command"],
            inputs=d.get("inputs", {}),
            spec=d.get("spec"),
            payload=d.get("payload", {}),
            seed=d.get("seed"),
            timing=d.get("timing"),
        )

    def write(self, fh: TextIO) -> None:
        fh.write(self.to_json())
