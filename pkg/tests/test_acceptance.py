"""Acceptance checks, one per criterion.

Each check returns ``(passed, detail)``.  Under pytest every criterion is a
test and a PASS/FAIL line is printed in the terminal summary; run this file
directly (``python3 tests/test_acceptance.py``) to print the lines without
pytest.
"""

from __future__ import annotations

import contextlib
import io
import itertools
import json
import sys
import tempfile
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from pcmatch import (
    ContingencyTable,
    Dataset,
    EstimationError,
    MatchSpec,
    StrataRatios,
    estimate_pc,
    gen_example1,
    lucas_standin,
    partition_dataset,
    pc_bounds,
    pc_from_coefficients,
    pc_under_monotonicity,
    pn_bounds,
    resampling_distribution,
    risk_ratio,
    sample_bayesnet,
    sensitivity_sweep,
    simulation_distribution,
)
from pcmatch.cli import main as cli_main
from pcmatch.estimator import counted_coefficients
from pcmatch.fileio import units_to_csv
from pcmatch.pn import perturb
from pcmatch.synth import _bundled

try:
    from conftest import ACCEPTANCE
except ImportError:  # run as a script
    ACCEPTANCE = {}

T1_EXP = ContingencyTable(16, 984, 14, 986, "experimental")
T1_OBS = ContingencyTable(2, 998, 28, 972, "observational")
T2_EXP = ContingencyTable(30, 70, 12, 88, "experimental")
T2_OBS = ContingencyTable(18, 82, 24, 76, "observational")

M_VALUES = (1, 3, 5)
SPECS = [MatchSpec(m=m) for m in M_VALUES]


def _example1(n, ab=0.8, cd=0.6):
    return lambda rng: gen_example1(n, ab, cd, seed=rng)


# -- 1 ---------------------------------------------------------------------


def criterion_1():
    before = pn_bounds(T1_EXP, T1_OBS)
    after = pn_bounds(perturb(T1_EXP, "x'y", 1), T1_OBS)
    ok = before.pn_lower == 1.0 and after.pn_lower == 0.0 and after.raw_lower == 0.0
    return ok, f"PN lower {before.pn_lower!r} -> {after.pn_lower!r} after x'y 14->15"


# -- 2 ---------------------------------------------------------------------


def criterion_2():
    curve = sensitivity_sweep(T2_EXP, T2_OBS, "x'y@experimental", range(10), "pn_lower")
    err = max(abs(v - (9 - k) / 9) for k, v in curve.points)
    ok = err <= 1e-12 and curve.points[-1] == (9, 0.0)
    return ok, f"max |pn_lower - (9-k)/9| = {err:.2e}, value at k=9 is {curve.values[-1]!r}"


# -- 3 ---------------------------------------------------------------------


def _closed_form_bounds(t):
    p1 = Fraction(t.n_xy, t.n_x)
    p0 = Fraction(t.n_x_not_y, t.n_x_not)
    return max(Fraction(0), 1 - p0 / p1), min(Fraction(1), Fraction(t.n_x_not_y_not, t.n_x_not) / p1)


def criterion_3():
    got1, got2 = pc_bounds(T1_EXP), pc_bounds(T2_EXP)
    exact1, exact2 = _closed_form_bounds(T1_EXP), _closed_form_bounds(T2_EXP)
    ok = (
        exact1 == (Fraction(1, 8), 1)
        and exact2 == (Fraction(3, 5), 1)
        and got1 == tuple(map(float, exact1))
        and got2 == tuple(map(float, exact2))
    )
    return ok, f"Table 1 {got1}, Table 2 {got2}"


# -- 4 ---------------------------------------------------------------------

SIZES = (5, 10, 50, 100, 500, 1000)
C4_SEEDS = (20240, 20241, 20242)


def criterion_4(iterations=1000):
    lines, ok = [], True
    medians = {}
    for n in SIZES:
        dists = simulation_distribution(_example1(n), SPECS, iterations, seed=C4_SEEDS[0])
        medians[n] = [d.median for d in dists]
        if n == 1000:
            first = dists
    for n in (500, 1000):
        dev = max(abs(v - 0.8) for v in medians[n])
        ok &= dev <= 0.02
        lines.append(f"N={n} max|median-0.8|={dev:.4f}")
    # small-sample inaccuracy; m=5 is excluded because at N=5 it matches the
    # whole pool and returns |A|/(|A|+|B|) = 0.8 exactly
    for n in (5, 10):
        devs = [abs(v - 0.8) for v in medians[n][:2]]
        ok &= min(devs) > 0.02
        lines.append(f"N={n} |median-0.8| m1={devs[0]:.4f} m3={devs[1]:.4f} (m5 {medians[n][2]:.4f})")
    for i, seed in enumerate(C4_SEEDS):
        dists = first if i == 0 else simulation_distribution(_example1(1000), SPECS, iterations, seed=seed)
        sd = [d.sd for d in dists]
        iqr = [d.iqr for d in dists]
        ordered = sd[2] <= sd[1] <= sd[0] and iqr[2] <= iqr[1] <= iqr[0]
        ok &= ordered
        lines.append(f"seed {seed}: sd {[round(v, 4) for v in sd]} iqr {[round(v, 4) for v in iqr]}")
    return ok, "; ".join(lines)


# -- 5 ---------------------------------------------------------------------

D_COUNTS = (2, 5, 10, 15, 20, 30, 40, 50, 75, 100, 200, 300)


def criterion_5(iterations=1000):
    res = {}
    for d in D_COUNTS:
        res[d] = simulation_distribution(_example1(1000, cd=1 - d / 1000), SPECS, iterations, seed=7000 + d)
    ok = abs(res[2][2].median - 0.8) <= 0.05
    worst = max(abs(x.median - 0.8) for d in D_COUNTS if d >= 5 for x in res[d])
    ok &= worst <= 0.05
    spread = all(res[2][j].iqr > res[300][j].iqr and res[2][j].sd > res[300][j].sd for j in range(3))
    ok &= spread
    detail = (
        f"|D|=2 m5 median {res[2][2].median:.4f}; worst |median-0.8| for |D|>=5 {worst:.4f}; "
        f"sd at |D|=2 {[round(x.sd, 4) for x in res[2]]} vs |D|=300 {[round(x.sd, 4) for x in res[300]]}"
    )
    return ok, detail


# -- 6 ---------------------------------------------------------------------


def criterion_6(iterations=1000):
    data = sample_bayesnet(lucas_standin(), 2000, seed=2024)
    strata = StrataRatios.from_data(data)
    wins, inside, lines = 0, True, []
    for seed in (1, 2, 3):
        plain = resampling_distribution(data, 400, MatchSpec(), iterations, seed=seed)
        strat = resampling_distribution(data, 400, MatchSpec(), iterations, strata=strata, seed=seed)
        for d in (plain, strat):
            inside &= bool(np.all((d.lower <= d.pc_clamped) & (d.pc_clamped <= d.upper)))
            inside &= not d.skipped
        wins += strat.sd < plain.sd
        lines.append(f"seed {seed}: sd {plain.sd:.4f} -> {strat.sd:.4f}")
    ok = wins >= 2 and inside
    return ok, f"stratified tighter in {wins}/3 ({'; '.join(lines)}); all clamped values in bounds: {inside}"


# -- 7 ---------------------------------------------------------------------

GRID = (0.0, 0.25, 0.5, 0.75, 1.0)


def _oracle_pc(pool, d_vals):
    # pool: list of (id, Id, source); exhaustive nearest neighbour, ties to lowest id
    hits = 0
    for z in d_vals:
        best = min(pool, key=lambda e: (abs(z - e[1]), e[0]))
        hits += best[2] == "A"
    return hits / len(d_vals)


def _tiny_instances(stride=31):
    kinds = [(g, s) for g in GRID for s in "AB"]
    pools = [c for k in range(1, 5) for c in itertools.combinations_with_replacement(kinds, k)]
    ds = [c for k in range(1, 5) for c in itertools.combinations_with_replacement(GRID, k)]
    for i, (pool, d_vals) in enumerate(itertools.product(pools, ds)):
        if i % stride == 0:
            yield i, pool, d_vals


def criterion_7():
    spec = MatchSpec(metric="absolute_difference", tie_rule="lowest_id")
    n, bad = 0, []
    for i, pool, d_vals in _tiny_instances():
        n += 1
        # alternate id order so ties are not always resolved towards A
        order = range(len(pool)) if i % 2 else range(len(pool) - 1, -1, -1)
        pool_units = [(f"p{k}", g, s) for k, (g, s) in zip(order, pool)]
        ids = [u[0] for u in pool_units] + [f"d{k}" for k in range(len(d_vals))]
        cov = [u[1] for u in pool_units] + list(d_vals)
        y = [int(u[2] == "B") for u in pool_units] + [1] * len(d_vals)
        x = [0] * len(pool_units) + [1] * len(d_vals)
        data = Dataset(ids=ids, covariates=np.array(cov).reshape(-1, 1), x=x, y=y)
        est = estimate_pc(partition_dataset(data), spec, warn_unbalanced=False)
        if est.pc_raw != _oracle_pc(pool_units, d_vals):
            bad.append(i)
    ok = 0 < n <= 4096 and not bad
    return ok, f"{n} instances, {len(bad)} mismatches"


# -- 8 ---------------------------------------------------------------------


def _random_partition(rng):
    n0, n1 = (int(v) for v in rng.integers(2, 40, size=2))
    cov = rng.choice([0.0, 0.5, 1.0], size=(n0 + n1, 2)) if rng.random() < 0.5 else rng.normal(size=(n0 + n1, 2))
    x = np.r_[np.zeros(n0, int), np.ones(n1, int)]
    y = (rng.random(n0 + n1) < rng.uniform(0.1, 0.9)).astype(int)
    y[n0] = 1  # |D| >= 1
    return partition_dataset(Dataset(ids=[f"u{i}" for i in range(n0 + n1)], covariates=cov, x=x, y=y))


def criterion_8(count=1000):
    rng = np.random.default_rng(88)
    eq4 = 0.0
    balanced_ok = True
    n_balanced = n_mono = 0
    mono_ok = True
    for _ in range(count):
        p = _random_partition(rng)
        m = int(rng.choice([1, 3, 5]))
        est = estimate_pc(p, MatchSpec(m=m), warn_unbalanced=False)
        eq4 = max(eq4, abs(est.pc_raw - (1 - est.b * est.n_b / est.n_d)))
        mb = int(rng.choice([1, 2]))
        if p.n0 >= mb * est.n_d:
            n_balanced += 1
            spec = MatchSpec(m=mb, mode="balanced_assignment")
            bal = estimate_pc(p, spec, warn_unbalanced=False)
            used_a, used_b = counted_coefficients(p, spec)
            a = Fraction(used_a, mb * bal.n_a) if bal.n_a else Fraction(0)
            b = Fraction(used_b, mb * bal.n_b) if bal.n_b else Fraction(0)
            balanced_ok &= 0 <= a <= 1 and 0 <= b <= 1
            balanced_ok &= a * bal.n_a + b * bal.n_b == bal.n_d
            balanced_ok &= 0 <= bal.a_counted <= 1 and 0 <= bal.b_counted <= 1
            balanced_ok &= abs(bal.a - float(a)) <= 1e-12 and abs(bal.b - float(b)) <= 1e-12
        t = ContingencyTable(est.n_d, est.n_c, est.n_b, est.n_a)
        try:
            mono = pc_under_monotonicity(t)
        except EstimationError:
            continue
        n_mono += 1
        mono_ok &= abs(pc_from_coefficients(1.0, risk_ratio(t)) - mono) <= 1e-12
    ok = eq4 <= 1e-12 and balanced_ok and mono_ok
    return ok, (f"max |pc_raw - (1 - b|B|/|D|)| {eq4:.1e}; balanced exact on {n_balanced} partitions: {balanced_ok}; "
                f"monotonicity identity on {n_mono} feasible tables: {mono_ok}")


# -- 9 ---------------------------------------------------------------------


def _cli_stdout(argv):
    buf, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(buf), contextlib.redirect_stderr(err):
        code = cli_main(argv)
    if code:
        raise RuntimeError(err.getvalue())
    return buf.getvalue()


def criterion_9():
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        units = tmp / "units.csv"
        units.write_text(units_to_csv(gen_example1(150, seed=1)))
        runs = {
            "simulate example1": ["simulate", "--example1", "--n", "200", "--seed", "3"],
            "simulate network": ["simulate", "--network", str(tmp / "net.json"), "--n", "300", "--seed", "3"],
            "bootstrap": ["distribution", str(units), "--method", "bootstrap", "--iterations", "50",
                          "--seed", "4", "--csv", "-"],
            "resample": ["distribution", str(units), "--method", "resample", "--arm-size", "100",
                         "--iterations", "50", "--seed", "4", "--csv", "-"],
            "stratified": ["distribution", str(units), "--method", "resample", "--arm-size", "100",
                           "--strata", "0.2,0.4", "--iterations", "50", "--seed", "4", "--csv", "-"],
            "ensemble": ["distribution", str(units), "--method", "ensemble", "--m", "1,3,5",
                         "--seed", "4", "--csv", "-"],
        }
        (tmp / "net.json").write_text(json.dumps(_bundled("lucas_standin.json")))
        same = {name: _cli_stdout(argv) == _cli_stdout(argv) for name, argv in runs.items()}
        reseeded = [("5" if a == "4" else a) for a in runs["bootstrap"]]
        differs = _cli_stdout(reseeded) != _cli_stdout(runs["bootstrap"])
    ok = all(same.values()) and differs
    return ok, f"identical reruns: {same}; different seed changes output: {differs}"


CRITERIA = {
    1: ("PN reproduction", criterion_1),
    2: ("PN sweep", criterion_2),
    3: ("PC bounds", criterion_3),
    4: ("Example-1 convergence", criterion_4),
    5: ("rare-event behaviour", criterion_5),
    6: ("stratification effect", criterion_6),
    7: ("oracle equivalence", criterion_7),
    8: ("algebraic identities", criterion_8),
    9: ("CLI determinism", criterion_9),
}


def _line(k, ok, detail):
    return f"criterion {k} {'PASS' if ok else 'FAIL'}: {CRITERIA[k][0]} -- {detail}"


@pytest.mark.parametrize("k", [pytest.param(k, marks=pytest.mark.slow) if k in (4, 5, 6) else k
                               for k in CRITERIA])
def test_criterion(k):
    ok, detail = CRITERIA[k][1]()
    line = _line(k, ok, detail)
    ACCEPTANCE[k] = line
    print(line)
    assert ok, line


if __name__ == "__main__":
    failed = 0
    for k, (_, fn) in CRITERIA.items():
        ok, detail = fn()
        failed += not ok
        print(_line(k, ok, detail), flush=True)
    sys.exit(1 if failed else 0)
