from __future__ import annotations

import argparse

from rich import print

from placement._utils import ConfigurationError

from ._utils import add_command, output_path, write_count_summary, write_csv
from .eval import add_policy_arguments, run_evaluation

load_priority = 5

HEADER = ("instance_id", "limit_mg", "count", "mg")


def min_actuators(options: argparse.Namespace) -> None:
    """Actuators needed to reach each MG limit, per instance, with quartiles."""
    if options.limit is None and options.limits is None:
        raise ConfigurationError("give --limit or --limits")
    mode, results = run_evaluation(options)

    rows, agg = [], []
    for config, report in results:
        for r in report.rows:
            rows.append([r.instance_id, config.limit_mg, r.count, r.mg])
        agg.append([config.limit_mg, report.mean_count, report.mean_mg])
    path = output_path(options, options.out, f"min-actuators-{mode}.csv")
    write_csv(path, HEADER, rows, agg)
    summary = path.with_name(path.stem + ".summary.csv")
    write_count_summary(summary, [(c.limit_mg, r.counts()) for c, r in results])
    for config, report in results:
        print(f"MG < {config.limit_mg:g}: mean actuators {report.mean_count:.3g}")


def register(subparsers) -> argparse.ArgumentParser:
    parser = add_command(
        subparsers,
        "min-actuators",
        min_actuators,
        help="Count the actuators a policy needs to meet MG limits",
    )
    add_policy_arguments(parser)
    parser.set_defaults(budget=None)
    return parser
