"""Command-line interface: ``pcmatch <subcommand> ...``.

Every subcommand prints a JSON run report on stdout (``simulate`` prints the
generated units CSV instead when writing to stdout).  Failures exit with
status 1 and a JSON error record on stderr.
"""

from __future__ import annotations

import argparse
import io
import json
import sys
import time
import warnings
from pathlib import Path

from . import __version__
from .core import EstimationError, ValidationError, as_table, partition_dataset
from .distribution import (
    StrataRatios,
    bootstrap_distribution,
    ensemble_distribution,
    resampling_distribution,
)
from .estimator import (
    estimate_pc,
    pc_bounds,
    pc_under_monotonicity,
    pc_under_reverse_monotonicity,
    risk_ratio,
)
from .fileio import (
    RunReport,
    digest,
    load_target_csv,
    parse_table,
    parse_units_csv,
    read_text,
    units_to_csv,
)
from .g2i import IndividualQuery, estimate_individual_pc, retention_profile
from .matching import METRICS, MODES, TIE_RULES, MatchSpec
from .pn import CELLS, ESTIMATORS, pn_bounds, sensitivity_sweep
from .synth import gen_example1, load_network_spec, sample_bayesnet

DISPLAY_KEYS = ("pc_raw", "pc_clamped", "a", "b", "rr", "bound_lower", "bound_upper")


class _Inputs:
    """Reads inputs once and remembers their digests for the report."""

    def __init__(self):
        self.digests: dict[str, str] = {}

    def text(self, path: str) -> str:
        txt = read_text(path)
        self.digests[path] = digest(txt)
        return txt


def _display(d: dict) -> dict:
    out = {}
    for k in DISPLAY_KEYS:
        v = d.get(k)
        if isinstance(v, float):
            out[k] = "inf" if v == float("inf") else f"{v:.4f}"
    return out


def _write_out(path: str | None, text: str) -> None:
    if path is None:
        return
    if path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _add_match_args(p: argparse.ArgumentParser, multi: bool = False) -> None:
    help_multi = " (comma-separated list for --method ensemble)" if multi else ""
    p.add_argument("--metric", default="euclidean_standardized",
                   help=f"one of {', '.join(METRICS)}{help_multi}")
    p.add_argument("--m", default="1", help=f"matches per D element{help_multi}")
    p.add_argument("--tie-rule", default="fractional", choices=TIE_RULES)
    p.add_argument("--mode", default="with_replacement", choices=MODES)
    p.add_argument("--match-threshold", dest="threshold", type=float, default=None,
                   help="minimum similarity 1/(1+d) for a pool element to be eligible")
    p.add_argument("--identity-tol", type=float, default=0.0)
    p.add_argument("--no-standardize", action="store_true",
                   help="plain Euclidean distance for euclidean_standardized")


def _spec(args, metric: str | None = None, m: int | None = None) -> MatchSpec:
    return MatchSpec(
        metric=metric or args.metric,
        m=int(m if m is not None else args.m),
        threshold_t=args.threshold,
        tie_rule=args.tie_rule,
        mode=args.mode,
        standardize=not args.no_standardize,
        identity_tol=args.identity_tol,
    )


def _load_units(inputs: _Inputs, path: str):
    return parse_units_csv(inputs.text(path))


def cmd_partition(args, inputs):
    data = _load_units(inputs, args.units)
    p = partition_dataset(data)
    payload = {"sizes": p.sizes, "n0": p.n0, "n1": p.n1, "balanced": p.balanced,
               "covariates": list(p.covariate_names)}
    return RunReport(command=[], payload=payload)


def cmd_estimate(args, inputs):
    p = partition_dataset(_load_units(inputs, args.units))
    spec = _spec(args)
    est = estimate_pc(p, spec)
    d = est.to_dict()
    d["display"] = _display(d)
    return RunReport(command=[], spec=spec.to_dict(), payload=d)


def _table_or_units(text: str):
    first = text.lstrip().splitlines()[0] if text.strip() else ""
    if first.replace(" ", "").startswith("cell,count"):
        return parse_table(text)
    return as_table(partition_dataset(parse_units_csv(text)))


def _corollary(fn, t) -> dict:
    try:
        return {"feasible": True, "value": fn(t)}
    except EstimationError as exc:
        return {"feasible": False, "value": None, "reason": str(exc)}


def cmd_bounds(args, inputs):
    t = _table_or_units(inputs.text(args.source))
    lower, upper = pc_bounds(t)
    payload = {
        "table": {"xy": t.n_xy, "xy_not": t.n_xy_not, "x_not_y": t.n_x_not_y,
                  "x_not_y_not": t.n_x_not_y_not, "regime": t.regime},
        "rr": risk_ratio(t),
        "bound_lower": lower,
        "bound_upper": upper,
        "monotonicity": _corollary(pc_under_monotonicity, t),
        "reverse_monotonicity": _corollary(pc_under_reverse_monotonicity, t),
    }
    payload["display"] = _display(payload)
    return RunReport(command=[], payload=payload)


def cmd_pn(args, inputs):
    exp = parse_table(inputs.text(args.experimental))
    obs = parse_table(inputs.text(args.observational))
    return RunReport(command=[], payload=pn_bounds(exp, obs).to_dict())


def cmd_sweep(args, inputs):
    exp = parse_table(inputs.text(args.experimental))
    obs = parse_table(inputs.text(args.observational)) if args.observational else None
    curve = sensitivity_sweep(exp, obs, args.cell, range(args.k_min, args.k_max + 1), args.estimator)
    _write_out(args.csv, curve.to_csv())
    return RunReport(command=[], payload=curve.to_dict())


def _strata(value: str, data) -> StrataRatios | None:
    if value is None:
        return None
    if value == "data":
        return StrataRatios.from_data(data)
    try:
        p0, p1 = (float(v) for v in value.split(","))
    except ValueError:
        raise ValidationError(f"--strata must be 'p0,p1' or 'data', got {value!r}") from None
    return StrataRatios(p0, p1)


def cmd_distribution(args, inputs):
    data = _load_units(inputs, args.units)
    spec_dict = None
    if args.method == "ensemble":
        metrics = args.metric.split(",")
        ms = [int(v) for v in args.m.split(",")]
        specs = [_spec(args, metric=mt, m=m) for mt in metrics for m in ms]
        dist = ensemble_distribution(data, specs, seed=args.seed)
        spec_dict = {"ensemble": [s.to_dict() for s in specs]}
    else:
        spec = _spec(args)
        spec_dict = spec.to_dict()
        if args.method == "bootstrap":
            dist = bootstrap_distribution(data, spec, args.iterations, args.seed, n_jobs=args.n_jobs)
        else:
            if args.arm_size is None:
                raise ValidationError("--arm-size is required for --method resample")
            dist = resampling_distribution(
                data, args.arm_size, spec, args.iterations,
                strata=_strata(args.strata, data), seed=args.seed, n_jobs=args.n_jobs,
            )
    _write_out(args.csv, dist.to_csv())
    summary = dist.summary_record()
    summary["display"] = {k: f"{summary[k]:.4f}" for k in
                          ("median", "iqr", "sd", "min", "max", "envelope_lower", "envelope_upper")}
    return RunReport(command=[], spec=spec_dict, payload=summary, seed=args.seed)


def cmd_simulate(args, inputs):
    if args.example1 == bool(args.network):
        raise ValidationError("simulate needs exactly one of --example1 or --network")
    if args.example1:
        data = gen_example1(args.n, args.ab_split, args.cd_split, seed=args.seed)
        source = {"generator": "example1", "n_per_arm": args.n,
                  "ab_split": args.ab_split, "cd_split": args.cd_split}
    else:
        net = load_network_spec(json.loads(inputs.text(args.network)))
        data = sample_bayesnet(net, args.n, seed=args.seed)
        source = {"generator": "network", "n": args.n, "cause": net.cause, "effect": net.effect}
    text = units_to_csv(data)
    if args.out == "-":
        sys.stdout.write(text)
        return None
    _write_out(args.out, text)
    p = partition_dataset(data)
    source.update({"out": args.out, "sizes": p.sizes, "csv_digest": digest(text)})
    return RunReport(command=[], payload=source, seed=args.seed)


def cmd_g2i(args, inputs):
    data = _load_units(inputs, args.units)
    p = partition_dataset(data)
    target = load_target_csv(io.StringIO(inputs.text(args.target)), p.covariate_names)
    spec = _spec(args)
    est = estimate_individual_pc(p, IndividualQuery(target, args.t, spec))
    d = est.to_dict()
    d["retained_d"] = est.n_d
    d["threshold_t"] = args.t
    d["retention_profile"] = [{"threshold": t, "retained_d": n}
                              for t, n in retention_profile(p, target, spec)]
    d["display"] = _display(d)
    return RunReport(command=[], spec=spec.to_dict(), payload=d)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pcmatch", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"pcmatch {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("partition", help="set sizes and arm balance")
    p.add_argument("units")
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser("estimate", help="matching estimate of PC")
    p.add_argument("units")
    _add_match_args(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("bounds", help="PC bounds, RR and corollary values")
    p.add_argument("source", help="unit CSV or table CSV")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("pn", help="PN bounds from experimental and observational tables")
    p.add_argument("experimental")
    p.add_argument("observational")
    p.set_defaults(func=cmd_pn)

    p = sub.add_parser("sweep", help="perturbation sweep of a PN/PC lower bound")
    p.add_argument("experimental")
    p.add_argument("observational", nargs="?")
    p.add_argument("--cell", required=True, help=f"<cell>@<experimental|observational>, cell in {CELLS}")
    p.add_argument("--k-min", type=int, default=0)
    p.add_argument("--k-max", type=int, required=True)
    p.add_argument("--estimator", default="pn_lower", choices=ESTIMATORS)
    p.add_argument("--csv", help="write the curve CSV here ('-' for stdout)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("distribution", help="distribution of PC")
    p.add_argument("units")
    p.add_argument("--method", required=True, choices=("bootstrap", "resample", "ensemble"))
    p.add_argument("--iterations", type=int, default=1000)
    p.add_argument("--arm-size", type=int)
    p.add_argument("--strata", help="'p0,p1' target Y=1 shares per arm, or 'data'")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--n-jobs", type=int, default=1)
    p.add_argument("--csv", help="write per-iteration samples here ('-' for stdout)")
    _add_match_args(p, multi=True)
    p.set_defaults(func=cmd_distribution)

    p = sub.add_parser("simulate", help="generate synthetic units")
    p.add_argument("--example1", action="store_true")
    p.add_argument("--network", help="network JSON document")
    p.add_argument("--n", type=int, required=True, help="units per arm (example1) or total (network)")
    p.add_argument("--ab-split", type=float, default=0.8)
    p.add_argument("--cd-split", type=float, default=0.6)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("g2i", help="PC for one target individual")
    p.add_argument("units")
    p.add_argument("target")
    p.add_argument("--threshold", dest="t", type=float, required=True,
                   help="similarity threshold for keeping D elements")
    _add_match_args(p)
    p.set_defaults(func=cmd_g2i)
    return ap


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    inputs = _Inputs()
    start = time.perf_counter()
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            report = args.func(args, inputs)
    except (ValidationError, EstimationError, OSError, json.JSONDecodeError) as exc:
        err = {"error": {"type": type(exc).__name__, "message": str(exc), "command": argv}}
        sys.stderr.write(json.dumps(err, sort_keys=True) + "\n")
        return 1
    if report is None:
        return 0
    report.command = argv
    report.inputs = inputs.digests
    report.timing = round(time.perf_counter() - start, 6)
    msgs = sorted({str(w.message) for w in caught})
    if msgs:
        report.payload["warnings"] = msgs
    out = sys.stdout
    if getattr(args, "csv", None) == "-":
        # CSV already went to stdout; keep the report on stderr
        out = sys.stderr
    report.write(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
