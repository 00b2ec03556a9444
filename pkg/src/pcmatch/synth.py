"""Synthetic data: controlled-ratio uniform-Id data and binary Bayesian networks.

Under :func:`gen_example1` the single covariate ``Id`` is uniform and
independent of set membership, so the nearest X=0 neighbour of a D element is
in A with probability |A| / (|A| + |B|).  The expected PC is therefore
``ab_split``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from graphlib import CycleError, TopologicalSorter
from importlib import resources
from itertools import product
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .core import Dataset, ValidationError

__all__ = [
    "largest_remainder",
    "gen_example1",
    "BinaryBayesNet",
    "load_network_spec",
    "sample_bayesnet",
    "exact_marginals",
    "lucas_template",
    "lucas_standin",
]


def largest_remainder(total: int, shares: Sequence[float]) -> list[int]:
    """Split ``total`` into integers proportional to ``shares``.

    Floors first, then hands the leftover units to the largest fractional
    remainders (earlier entries win ties).  Shares are rationalised first so
    e.g. ``1000 * 0.998`` splits as 998 rather than 997.999...
    """
    fr = [Fraction(s).limit_denominator(10**9) for s in shares]
    if any(f < 0 for f in fr) or sum(fr) == 0:
        raise ValidationError("shares must be nonnegative and not all zero")
    norm = sum(fr)
    exact = [total * f / norm for f in fr]
    base = [int(e) for e in exact]
    left = total - sum(base)
    order = sorted(range(len(fr)), key=lambda i: (-(exact[i] - base[i]), i))
    for i in order[:left]:
        base[i] += 1
    return base


@lru_cache(maxsize=64)
def _ids(prefix: str, n: int, offset: int = 0) -> np.ndarray:
    width = len(str(max(n + offset - 1, 0)))
    out = np.array([f"{prefix}{i:0{width}d}" for i in range(offset, offset + n)])
    out.flags.writeable = False  # shared between calls
    return out


def gen_example1(
    n_per_arm: int, ab_split: float = 0.8, cd_split: float = 0.6, seed=None
) -> Dataset:
    """Two arms of ``n_per_arm`` units with one uniform covariate ``Id`` on [0, 1).

    ``ab_split`` is the fraction of the X=0 arm with y=0 (Set A), ``cd_split``
    the fraction of the X=1 arm with y=0 (Set C).  Set sizes are fixed by
    largest-remainder rounding; only the Ids are random.
    """
    if n_per_arm < 1:
        raise ValidationError("n_per_arm must be at least 1")
    for name, v in (("ab_split", ab_split), ("cd_split", cd_split)):
        if not 0.0 <= v <= 1.0:
            raise ValidationError(f"{name} must lie in [0, 1], got {v!r}")
    n_a, n_b = largest_remainder(n_per_arm, [ab_split, 1 - ab_split])
    n_c, n_d = largest_remainder(n_per_arm, [cd_split, 1 - cd_split])
    if n_d == 0:
        raise ValidationError(
            f"cd_split={cd_split} leaves Set D empty at n_per_arm={n_per_arm}"
        )
    rng = np.random.default_rng(seed)
    ids = rng.random(2 * n_per_arm)
    # shuffle outcomes within each arm so unit ids carry no set information
    y0 = rng.permutation(np.r_[np.zeros(n_a, np.int8), np.ones(n_b, np.int8)])
    y1 = rng.permutation(np.r_[np.zeros(n_c, np.int8), np.ones(n_d, np.int8)])
    return Dataset(
        ids=_ids("u", 2 * n_per_arm),
        covariates=ids.reshape(-1, 1),
        x=np.r_[np.zeros(n_per_arm, np.int8), np.ones(n_per_arm, np.int8)],
        y=np.r_[y0, y1],
        covariate_names=("Id",),
    )


@dataclass(frozen=True)
class BinaryBayesNet:
    """Binary network; ``cpt[node][pattern]`` is P(node=1 | parents = pattern).

    A pattern is a bit string over ``parents[node]`` in order, ``""`` for roots.
    """

    nodes: tuple[str, ...]
    parents: Mapping[str, tuple[str, ...]]
    cpt: Mapping[str, Mapping[str, float]]
    cause: str
    effect: str
    covariates: tuple[str, ...]
    order: tuple[str, ...]


def _document(doc) -> dict:
    if isinstance(doc, Mapping):
        return dict(doc)
    if isinstance(doc, Path) or (isinstance(doc, str) and not doc.lstrip().startswith("{")):
        return json.loads(Path(doc).read_text(encoding="utf-8"))
    if isinstance(doc, str):
        return json.loads(doc)
    return json.load(doc)


def load_network_spec(document) -> BinaryBayesNet:
    """Validate a network document (mapping, JSON text, path or open file).

    Fields: ``nodes``, ``edges`` (``[parent, child]`` pairs), ``cpt``,
    ``cause``, ``effect`` and optionally ``covariates`` (defaults to every other
    node).  A node's parents are ordered as its edges appear.
    """
    doc = _document(document)
    for key in ("nodes", "edges", "cpt", "cause", "effect"):
        if key not in doc:
            raise ValidationError(f"network document is missing {key!r}")
    nodes = tuple(str(n) for n in doc["nodes"])
    if len(set(nodes)) != len(nodes):
        raise ValidationError("network document lists a node twice")
    known = set(nodes)
    parents: dict[str, list[str]] = {n: [] for n in nodes}
    for edge in doc["edges"]:
        if len(edge) != 2:
            raise ValidationError(f"edge {edge!r} must be a [parent, child] pair")
        par, child = map(str, edge)
        for n in (par, child):
            if n not in known:
                raise ValidationError(f"edge {par}->{child} refers to unknown node {n!r}")
        if par in parents[child]:
            raise ValidationError(f"duplicate edge {par}->{child}")
        parents[child].append(par)
    try:
        order = tuple(TopologicalSorter({n: parents[n] for n in nodes}).static_order())
    except CycleError as exc:
        raise ValidationError(f"network graph has a cycle: {' -> '.join(exc.args[1])}") from None
    cpt: dict[str, dict[str, float]] = {}
    for n in nodes:
        table = doc["cpt"].get(n)
        if table is None:
            raise ValidationError(f"missing CPT for node {n!r}")
        if not isinstance(table, Mapping):
            table = {"": table}
        rows = {}
        for bits in product("01", repeat=len(parents[n])):
            pat = "".join(bits)
            if pat not in table:
                raise ValidationError(
                    f"missing CPT row for node {n!r}, parent pattern {pat!r} "
                    f"(parents: {', '.join(parents[n]) or 'none'})"
                )
            v = table[pat]
            if v is None:
                raise ValidationError(f"CPT value for node {n!r}, pattern {pat!r} is not filled in")
            v = float(v)
            if not 0.0 <= v <= 1.0:
                raise ValidationError(f"CPT value {v} for node {n!r}, pattern {pat!r} outside [0, 1]")
            rows[pat] = v
        extra = set(table) - set(rows)
        if extra:
            raise ValidationError(f"node {n!r} has CPT rows for unknown patterns {sorted(extra)}")
        cpt[n] = rows
    cause, effect = str(doc["cause"]), str(doc["effect"])
    for role, n in (("cause", cause), ("effect", effect)):
        if n not in known:
            raise ValidationError(f"{role} node {n!r} is not in the network")
    if cause == effect:
        raise ValidationError("cause and effect must be different nodes")
    covs = doc.get("covariates")
    if covs is None:
        covs = [n for n in nodes if n not in (cause, effect)]
    covs = tuple(str(c) for c in covs)
    for c in covs:
        if c not in known or c in (cause, effect):
            raise ValidationError(f"covariate {c!r} must be a node other than cause/effect")
    return BinaryBayesNet(
        nodes=nodes,
        parents={n: tuple(p) for n, p in parents.items()},
        cpt=cpt,
        cause=cause,
        effect=effect,
        covariates=covs,
        order=order,
    )


def _cpt_vector(net: BinaryBayesNet, node: str) -> np.ndarray:
    k = len(net.parents[node])
    return np.array([net.cpt[node]["".join(b)] for b in product("01", repeat=k)])


def sample_nodes(net: BinaryBayesNet, n: int, seed=None) -> dict[str, np.ndarray]:
    """Ancestral sampling of every node; returns node -> 0/1 array of length n."""
    rng = np.random.default_rng(seed)
    vals: dict[str, np.ndarray] = {}
    for node in net.order:
        idx = np.zeros(n, dtype=np.int64)
        for par in net.parents[node]:
            idx = 2 * idx + vals[par]
        p = _cpt_vector(net, node)[idx]
        vals[node] = (rng.random(n) < p).astype(np.int8)
    return vals


def sample_bayesnet(net: BinaryBayesNet, n: int, seed=None) -> Dataset:
    """Draw ``n`` units; x is the cause node, y the effect node."""
    if n < 1:
        raise ValidationError("n must be at least 1")
    vals = sample_nodes(net, n, seed)
    cov = np.column_stack([vals[c] for c in net.covariates]).astype(float) if net.covariates \
        else np.zeros((n, 0))
    return Dataset(
        ids=_ids("s", n),
        covariates=cov,
        x=vals[net.cause],
        y=vals[net.effect],
        covariate_names=net.covariates,
    )


def exact_marginals(net: BinaryBayesNet) -> dict[str, float]:
    """P(node=1) for every node, by enumerating the full joint (small nets only)."""
    if len(net.nodes) > 20:
        raise ValidationError("exact enumeration is limited to 20 nodes")
    pos = {n: i for i, n in enumerate(net.nodes)}
    out = dict.fromkeys(net.nodes, 0.0)
    for assign in product((0, 1), repeat=len(net.nodes)):
        prob = 1.0
        for node in net.nodes:
            pat = "".join(str(assign[pos[p]]) for p in net.parents[node])
            p1 = net.cpt[node][pat]
            prob *= p1 if assign[pos[node]] else 1.0 - p1
            if prob == 0.0:
                break
        if prob:
            for node in net.nodes:
                if assign[pos[node]]:
                    out[node] += prob
    return out


def _bundled(name: str) -> dict:
    return json.loads(resources.files("pcmatch.data").joinpath(name).read_text(encoding="utf-8"))


def lucas_template() -> dict:
    """LUCAS-topology document with every CPT value left as ``null``."""
    return _bundled("lucas_template.json")


def lucas_standin() -> BinaryBayesNet:
    """LUCAS topology with stand-in CPT values (not the original dataset's)."""
    return load_network_spec(_bundled("lucas_standin.json"))
