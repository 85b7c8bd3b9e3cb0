from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np
from rich import print

from config import settings
from placement._utils import ConfigurationError
from placement.audit import greedy_ratio, projection_discrepancy, submodularity_violations
from placement.instances import GenSpec, generate_dataset

from ._utils import add_command, load_instances, output_path, seed_for, write_csv

load_priority = 6

CHECKS = ("projection", "submodularity", "greedy")


def audit(options: argparse.Namespace) -> None:
    """Publish projection, diminishing-returns and greedy-ratio diagnostics."""
    if options.dataset is not None:
        instances = load_instances(options.dataset)
    else:
        spec = GenSpec(n=options.n, m=options.m)
        instances = generate_dataset(spec, options.generate, seed_for(options, "audit"))
    if options.count is not None:
        instances = instances[: options.count]
    if not instances:
        raise ConfigurationError("nothing to audit")
    checks = CHECKS if options.check == "all" else (options.check,)
    solver = settings.solve_cache

    rows: list[list[object]] = [["instances", "", len(instances)]]
    if "projection" in checks:
        d = projection_discrepancy(instances, options.max_size, solver)
        rows += [
            ["projection", "pairs", d.checked],
            ["projection", "max_literal", d.max_literal],
            ["projection", "mean_literal", d.mean_literal],
            ["projection", "max_projected_gain", d.max_projected],
            ["projection", "mean_projected_gain", d.mean_projected],
        ]
    if "submodularity" in checks:
        s = submodularity_violations(instances, solver=solver)
        rows += [
            ["submodularity", "triples", s.checked],
            ["submodularity", "violations", s.violations],
            ["submodularity", "worst_excess", s.worst],
        ]
    if "greedy" in checks:
        budget = options.budget or min(3, instances[0].m)
        g = greedy_ratio(instances, budget, solver, settings.exhaustive_limit)
        finite = [r for r in g.ratios if np.isfinite(r)]
        rows += [
            ["greedy", "budget", budget],
            ["greedy", "mean_ratio", float(np.mean(finite)) if finite else None],
            ["greedy", "worst_ratio", g.worst_ratio],
            ["greedy", "worst_instance", g.worst_instance],
            ["greedy", "below_optimum", g.below_optimum],
        ]

    path = output_path(options, options.out, "audit.csv")
    write_csv(path, ("check", "metric", "value"), rows)
    for check, metric, value in rows[1:]:
        print(f"{check:>14} {metric:<22} {value}")


def register(subparsers) -> argparse.ArgumentParser:
    parser = add_command(subparsers, "audit", audit, help="Structural diagnostics of f(S)")
    parser.add_argument("--dataset", type=Path, default=None, help="Dataset to audit")
    parser.add_argument(
        "--generate", type=int, default=100, help="Synthetic instances when no dataset is given"
    )
    parser.add_argument("--n", type=int, default=5, help="Synthetic measurement points")
    parser.add_argument("--m", type=int, default=6, help="Synthetic candidate positions")
    parser.add_argument("--count", type=int, default=None, help="Audit only the first N")
    parser.add_argument("--check", choices=("all",) + CHECKS, default="all")
    parser.add_argument("--max-size", type=int, default=2, help="Largest |S| for projection")
    parser.add_argument("--budget", "-M", type=int, default=None, help="Greedy-ratio budget")
    parser.add_argument("--out", type=Path, default=None, help="CSV report path")
    return parser
