from __future__ import annotations

import argparse
import math
import time
from pathlib import Path

import numpy as np
from rich import print

from config import settings
from placement._utils import ConfigurationError, logger
from placement.model import rms_gap
from placement.oracle import exhaustive_select, greedy_select

from ._utils import add_command, fmt_sequence, load_instances, output_path, write_csv

load_priority = 2

HEADER = ("instance_id", "selected_sequence", "mg", "rmsg", "exhaustive_mg", "runtime_ms")


def greedy(options: argparse.Namespace) -> None:
    """Greedy oracle per instance, with the exhaustive optimum where affordable."""
    if options.dataset is None:
        raise ConfigurationError("--dataset is required")
    if options.budget is None:
        raise ConfigurationError("--budget is required")
    instances = load_instances(options.dataset)
    limit = options.exhaustive_limit or settings.exhaustive_limit
    solver = settings.solve_cache

    rows = []
    for i, inst in enumerate(instances):
        start = time.perf_counter()
        state = greedy_select(inst, options.budget, solver)
        elapsed_ms = (time.perf_counter() - start) * 1000.0
        exhaustive_mg = None
        if not options.no_exhaustive and math.comb(inst.m, options.budget) <= limit:
            exhaustive_mg = exhaustive_select(inst, options.budget, solver, limit).d
        rows.append(
            [
                i,
                fmt_sequence(state.selected),
                state.d,
                rms_gap(state.solution.delta),
                exhaustive_mg,
                round(elapsed_ms, 3) if options.timing else None,
            ]
        )
        logger.debug(f"instance {i}: greedy {state.selected} mg={state.d:.6g}")

    exhaustive = [r[4] for r in rows if r[4] is not None]
    agg = [
        "",
        float(np.mean([r[2] for r in rows])),
        float(np.mean([r[3] for r in rows])),
        float(np.mean(exhaustive)) if len(exhaustive) == len(rows) else None,
        None,
    ]
    path = output_path(options, options.out, f"greedy-M{options.budget}.csv")
    write_csv(path, HEADER, rows, [agg])
    logger.debug(f"solve cache: {solver.hits} hits, {solver.misses} misses")
    print(f"greedy M={options.budget}: mean MG {agg[1]:.6g}, mean RMSG {agg[2]:.6g} -> {path}")


def register(subparsers) -> argparse.ArgumentParser:
    parser = add_command(
        subparsers, "greedy", greedy, help="Run the greedy (and exhaustive) placement oracle"
    )
    parser.add_argument("--dataset", type=Path, default=None, help="Dataset file")
    parser.add_argument("--budget", "-M", type=int, default=None, help="Actuator budget M")
    parser.add_argument("--out", type=Path, default=None, help="CSV report path")
    parser.add_argument(
        "--exhaustive-limit",
        type=int,
        default=None,
        help="Skip the exhaustive oracle above this many subsets",
    )
    parser.add_argument(
        "--no-exhaustive", action="store_true", help="Never run the exhaustive oracle"
    )
    parser.add_argument(
        "--timing", action="store_true", help="Fill runtime_ms (output is then not reproducible)"
    )
    return parser
