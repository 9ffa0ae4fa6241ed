"""Command line entry point: ``nestassort {simulate,oracle,adversarial,table}``."""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import tempfile
from pathlib import Path

import numpy as np

from .adversarial import AdversarialSpec, build_adversarial_instance, deviation_gap_check, kl_report
from .harness import WORKERS_ENV, ExperimentConfig, emit_csv, format_table, run_experiment
from .level_sets import build_catalog, true_value_table
from .model import NestedLogitInstance
from .optimize import DEFAULT_EPSILON_BS, binary_search_optimum
from .policy import optimal_revenue


def _simulate(args) -> int:
    config = ExperimentConfig.load(args.config)
    out = args.out or config.output
    if out is None:
        raise ValueError("no output directory: pass --out or set 'output' in the config")
    traces, summaries = run_experiment(config, args.workers)
    paths = emit_csv(traces, summaries, out)
    for p in paths:
        print(p)
    return 0


def _oracle(args) -> int:
    instance = NestedLogitInstance.load(args.instance)
    catalog = build_catalog(instance, args.delta)
    theta, value = binary_search_optimum(true_value_table(instance, catalog), args.epsilon_bs)
    thresholds = catalog.thresholds(theta)
    doc = {
        "delta": args.delta,
        "optimal_revenue": value,
        "thresholds": [None if math.isinf(t) else t for t in thresholds],
        "assortment": [list(s) for s in catalog.combination(theta)],
    }
    if args.delta > 0:
        doc["undiscretized_optimal_revenue"] = optimal_revenue(instance, args.epsilon_bs)
    print(json.dumps(doc, indent=2))
    return 0


def _adversarial(args) -> int:
    rng = np.random.default_rng(args.seed)
    spec = AdversarialSpec.random(args.m, args.eps, rng)
    instance = build_adversarial_instance(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    instance.save(out / "instance.json")
    report = {
        "num_nests": spec.num_nests,
        "epsilon": spec.epsilon,
        "seed": args.seed,
        "type_a_nests": sorted(spec.type_a_set),
        "optimal_assortment": [list(s) for s in spec.optimal_combination()],
        "gap": deviation_gap_check(spec, instance).to_dict(),
        **kl_report(spec, seed=args.seed),
    }
    (out / "report.json").write_text(json.dumps(report, indent=2) + "\n")
    print(json.dumps(report, indent=2))
    return 0 if report["gap"]["passed"] and report["kl_within_bound"] else 1


def _table(args) -> int:
    config = ExperimentConfig.load(args.config)
    summary = Path(config.output) / "summary.csv" if config.output else None
    if summary is None or not summary.exists() or args.rerun:
        traces, summaries = run_experiment(config, args.workers)
        if config.output:
            emit_csv(traces, summaries, config.output)
        else:
            with tempfile.TemporaryDirectory() as tmp:
                _, summary_path = emit_csv(traces, summaries, tmp)
                print(format_table(summary_path))
            return 0
    print(format_table(summary))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nestassort",
        description="Dynamic assortment planning under nested logit choice.",
        epilog=f"The {WORKERS_ENV} environment variable caps the number of worker processes.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a regret experiment and write CSV results")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=_simulate)

    p = sub.add_parser("oracle", help="static optimum of an instance file")
    p.add_argument("--instance", required=True)
    p.add_argument("--delta", type=float, default=0.0)
    p.add_argument("--epsilon-bs", type=float, default=DEFAULT_EPSILON_BS)
    p.set_defaults(func=_oracle)

    p = sub.add_parser("adversarial", help="generate a lower-bound instance and check it")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".")
    p.set_defaults(func=_adversarial)

    p = sub.add_parser("table", help="print the summary of an experiment as a text table")
    p.add_argument("--config", required=True)
    p.add_argument("--rerun", action="store_true", help="ignore an existing summary.csv")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=_table)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError, RuntimeError, KeyError, TypeError) as exc:
        print(f"nestassort {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
