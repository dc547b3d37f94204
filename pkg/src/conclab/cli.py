"""Batch experiment runner.

Usage shape::

    conclab <scenario> [--n ...] [--seed U64] [--samples M] [--p ...]
            [--out PATH] [--format csv|json] [--threads K] [--tol X]
            [--family NAME ...] [--measure PATH] [--atoms N]
            [--delta-exp X] [--num-seeds K] [--mc]

Scenarios: cube-scan, subset, thm5, identities, third-moment, moments,
position, var.  Every run writes both a machine JSON report and a human CSV
table when --out is given; numeric fields are serialized at full round-trip
precision in both.  The exit code is 0 exactly when every assertion passed.
"""

import argparse
import csv
import json
import sys

import numpy as np

from .experiments import ExperimentSpec, run_scenario


def _native(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, dict):
        return {k: _native(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_native(v) for v in value]
    return value


def report_rows_to_csv(rows, stream):
    """RFC-4180 rows with repr-serialized floats, one line per report row."""
    header = []
    for row in rows:
        for key in row:
            if key not in header:
                header.append(key)
    writer = csv.writer(stream)
    writer.writerow(header)
    for row in rows:
        record = []
        for key in header:
            value = _native(row.get(key, ""))
            if isinstance(value, bool):
                record.append(str(value))
            elif isinstance(value, float):
                record.append(repr(value))
            else:
                record.append(str(value))
        writer.writerow(record)


def report_to_json(report):
    return json.dumps(_native(report.to_dict()), indent=2)


def _strip_known_extension(path):
    for ext in (".json", ".csv"):
        if path.endswith(ext):
            return path[: -len(ext)]
    return path


def write_report(report, out_base):
    base = _strip_known_extension(out_base)
    with open(base + ".json", "w") as handle:
        handle.write(report_to_json(report))
        handle.write("\n")
    with open(base + ".csv", "w", newline="") as handle:
        report_rows_to_csv(report.rows, handle)
    return base + ".json", base + ".csv"


def build_parser():
    parser = argparse.ArgumentParser(
        prog="conclab",
        description="spherical concentration experiments on discrete measures",
    )
    parser.add_argument("scenario", choices=ExperimentSpec.KNOWN)
    parser.add_argument("--n", type=int, nargs="+", default=[], help="dimension list")
    parser.add_argument("--seed", type=int, default=None, help="64-bit unsigned seed")
    parser.add_argument("--samples", type=int, default=None, help="Monte Carlo budget")
    parser.add_argument("--p", type=float, nargs="+", default=None, help="moment exponents")
    parser.add_argument("--out", default=None, help="output path base (writes .json and .csv)")
    parser.add_argument("--format", choices=("csv", "json"), default="csv")
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--tol", type=float, default=None)
    parser.add_argument(
        "--family",
        nargs="+",
        default=None,
        choices=("gaussian", "laplace", "uniform-cube"),
        help="measure families for sampling scenarios",
    )
    parser.add_argument("--measure", default=None, help="measure CSV path")
    parser.add_argument("--atoms", type=int, default=0, help="atom count for sampled measures")
    parser.add_argument("--delta-exp", type=float, default=0.5, help="subset size exponent")
    parser.add_argument("--num-seeds", type=int, default=20, help="seed repetitions (subset)")
    parser.add_argument("--mc", action="store_true", help="add the Monte Carlo cross-check (var)")
    return parser


def spec_from_args(args):
    kwargs = {
        "scenario": args.scenario,
        "n_list": list(args.n),
        "threads": args.threads,
        "families": list(args.family) if args.family else None,
        "measure_path": args.measure,
        "atoms": args.atoms,
        "delta_exp": args.delta_exp,
        "num_seeds": args.num_seeds,
        "use_mc": args.mc,
    }
    if args.seed is not None:
        kwargs["seed"] = args.seed
    if args.samples is not None:
        kwargs["samples"] = args.samples
    if args.p is not None:
        kwargs["p_list"] = list(args.p)
    if args.tol is not None:
        kwargs["tol"] = args.tol
    if kwargs["families"] is None:
        kwargs.pop("families")
    return ExperimentSpec(**kwargs)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        spec = spec_from_args(args)
        report = run_scenario(spec)
    except (ValueError, OSError) as err:
        print(f"conclab: error: {err}", file=sys.stderr)
        return 2
    if args.out:
        json_path, csv_path = write_report(report, args.out)
        print(f"wrote {json_path} and {csv_path}", file=sys.stderr)
    if args.format == "json":
        print(report_to_json(report))
    else:
        report_rows_to_csv(report.rows, sys.stdout)
        for assertion in report.assertions:
            status = "PASS" if assertion["passed"] else "FAIL"
            detail = f" ({assertion['detail']})" if assertion.get("detail") else ""
            print(f"# {status} {assertion['name']}{detail}")
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
