from __future__ import annotations

import argparse
from pathlib import Path

from rich import print
from rich.table import Table

from config import settings
from placement._utils import ConfigurationError
from placement.agent import EVAL_MODES, EvalReport, count_summary, evaluate_policy
from placement.env import EpisodeConfig
from placement.net import NetworkParams, load_checkpoint

from ._utils import (
    add_command,
    fmt_forces,
    fmt_sequence,
    load_instances,
    output_path,
    parse_limits,
    seed_for,
    write_count_summary,
    write_csv,
)

load_priority = 4

HEADER = (
    "instance_id",
    "budget",
    "limit_mg",
    "selected_sequence",
    "forces",
    "mg",
    "rmsg",
    "count",
)


def resolve_policy(options: argparse.Namespace) -> tuple[str, NetworkParams | None]:
    params = load_checkpoint(options.checkpoint) if options.checkpoint else None
    mode = options.mode or (params.arch.kind if params is not None else None)
    if mode is None:
        raise ConfigurationError("--mode or --checkpoint is required")
    if mode in ("d3qn", "rees") and params is None:
        raise ConfigurationError(f"mode {mode} needs --checkpoint")
    return mode, params


def episode_configs(options: argparse.Namespace) -> list[EpisodeConfig]:
    chosen = [x for x in (options.budget, options.limit, options.limits) if x is not None]
    if len(chosen) != 1:
        raise ConfigurationError("give exactly one of --budget, --limit or --limits")
    if options.budget is not None:
        return [EpisodeConfig.budget_mode(options.budget)]
    if options.limit is not None:
        return [EpisodeConfig.spec_limit(options.limit)]
    return [EpisodeConfig.spec_limit(x) for x in parse_limits(options.limits)]


def run_evaluation(
    options: argparse.Namespace,
) -> tuple[str, list[tuple[EpisodeConfig, EvalReport]]]:
    if options.dataset is None:
        raise ConfigurationError("--dataset is required")
    mode, params = resolve_policy(options)
    configs = episode_configs(options)
    instances = load_instances(options.dataset)
    results = []
    for config in configs:
        # each setting replays the same random stream
        report = evaluate_policy(
            params, instances, config, mode, settings.solve_cache, seed_for(options, "eval")
        )
        results.append((config, report))
    return mode, results


def eval_(options: argparse.Namespace) -> None:
    """Evaluate a policy on a dataset in Budget or SpecLimit mode."""
    mode, results = run_evaluation(options)
    rows, agg = [], []
    for config, report in results:
        for r in report.rows:
            rows.append(
                [
                    r.instance_id,
                    config.budget,
                    config.limit_mg,
                    fmt_sequence(r.selected),
                    fmt_forces(r.forces),
                    r.mg,
                    r.rmsg,
                    r.count,
                ]
            )
        means = [report.mean_mg, report.mean_rmsg, report.mean_count]
        agg.append([config.budget, config.limit_mg, "", "", *means])
    path = output_path(options, options.out, f"eval-{mode}.csv")
    write_csv(path, HEADER, rows, agg)

    table = Table(title=f"{mode} on {options.dataset}")
    for column in ("setting", "mean MG", "mean RMSG", "mean count", "count q1/median/q3"):
        table.add_column(column)
    for config, report in results:
        s = count_summary(report.counts())
        setting = f"M={config.budget}" if config.is_budget else f"MG<{config.limit_mg:g}"
        table.add_row(
            setting,
            f"{report.mean_mg:.6g}",
            f"{report.mean_rmsg:.6g}",
            f"{report.mean_count:.3g}",
            f"{s.q1:g}/{s.median:g}/{s.q3:g}",
        )
    print(table)

    if options.limits is not None:
        summary = path.with_name(path.stem + ".counts.csv")
        write_count_summary(summary, [(c.limit_mg, r.counts()) for c, r in results])


def add_policy_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--dataset", type=Path, default=None, help="Dataset file")
    parser.add_argument("--checkpoint", type=Path, default=None, help="Trained network")
    parser.add_argument(
        "--mode",
        choices=EVAL_MODES,
        default=None,
        help="Policy to roll out (default: the checkpoint's kind)",
    )
    parser.add_argument("--limit", type=float, default=None, help="Single MG limit")
    parser.add_argument(
        "--limits", default=None, help="Comma-separated MG limits, e.g. 0.025,0.03,0.035"
    )
    parser.add_argument("--out", type=Path, default=None, help="CSV report path")


def register(subparsers) -> argparse.ArgumentParser:
    parser = add_command(subparsers, "eval", eval_, help="Evaluate a placement policy")
    add_policy_arguments(parser)
    parser.add_argument("--budget", "-M", type=int, default=None, help="Actuator budget M")
    return parser
