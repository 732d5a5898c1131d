"""Command-line entry point: ``onebitmc run | verify | print-metrics``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import checks
from .experiments import ExperimentResult, experiments_from_mapping, run_experiment
from .metrics import recovery_errors
from .norms import norm_report

log = logging.getLogger("onebitmc")


def _cmd_run(args) -> int:
    with open(args.config) as fh:
        raw = json.load(fh)
    specs = experiments_from_mapping(raw, full=args.full)
    if args.seed is not None:
        for s in specs:
            s.seed = args.seed
    os.makedirs(args.out, exist_ok=True)
    rows, failures = [], 0
    for spec in specs:
        log.info("experiment %s: d=%dx%d, %d sizes, %d repetitions", spec.name, spec.d1, spec.d2, len(spec.sample_sizes), spec.repetitions)
        res = run_experiment(spec, record_timing=args.timings, keep_traces=args.traces)
        rows.extend(res.rows)
        failures += sum(1 for r in res.data_rows() if r["status"] != "ok")
        if args.traces:
            tdir = os.path.join(args.out, "traces")
            os.makedirs(tdir, exist_ok=True)
            for (name, si, ni, label, rep), trace in res.traces.items():
                trace.to_csv(os.path.join(tdir, f"{name}_s{si}_n{ni}_{label}_r{rep}.csv"))
    ExperimentResult(rows).to_csv(os.path.join(args.out, "results.csv"))
    with open(os.path.join(args.out, "config-echo.json"), "w") as fh:
        json.dump({"experiments": [s.to_config() for s in specs], "full": args.full}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {len(rows)} rows to {os.path.join(args.out, 'results.csv')}")
    if failures:
        print(f"{failures} estimator runs failed; see the status column", file=sys.stderr)
    return 0


def _cmd_verify(args) -> int:
    results = checks.run_all(args.seed)
    for r in results:
        print(r.line())
    return 0 if all(r.passed for r in results) else 1


def _load_matrix(path) -> np.ndarray:
    return np.atleast_2d(np.loadtxt(path, delimiter=",", dtype=float))


def _cmd_metrics(args) -> int:
    E, T = _load_matrix(args.estimate), _load_matrix(args.truth)
    out = recovery_errors(E, T)
    out["norms"] = norm_report(E).to_dict()
    print(json.dumps(out, indent=2, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="onebitmc", description="1-bit matrix completion experiments")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run the experiments in a JSON config")
    r.add_argument("config")
    r.add_argument("--seed", type=int, default=None, help="override every experiment's seed")
    r.add_argument("--out", default="out", help="output directory")
    r.add_argument("--traces", action="store_true", help="write per-run objective traces")
    r.add_argument("--timings", action="store_true", help="fill the wall_ms column (breaks byte-identical reruns)")
    r.add_argument("--full", action="store_true", help="apply each experiment's 'full' overrides")
    r.set_defaults(func=_cmd_run)

    v = sub.add_parser("verify", help="run the randomised property suite")
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(func=_cmd_verify)

    m = sub.add_parser("print-metrics", help="error metrics between two dense CSV matrices")
    m.add_argument("estimate")
    m.add_argument("truth")
    m.set_defaults(func=_cmd_metrics)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    return args.func(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
