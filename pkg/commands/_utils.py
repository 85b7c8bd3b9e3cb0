from __future__ import annotations

import argparse
import csv
import json
import math
import os
from contextlib import contextmanager
from functools import update_wrapper
from pathlib import Path
from typing import Any, Callable, Iterable, Iterator, Sequence

import numpy as np
from pydantic import ValidationError

from config import settings
from placement._utils import (
    ConfigurationError,
    NumericalFailure,
    PlacementError,
    TrainingDivergenceError,
    derive_seed,
    logger,
)
from placement.agent import count_summary
from placement.instances import load_dataset
from placement.model import ForceVector, Instance

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INVALID = 2
EXIT_NUMERICAL = 3

Command = Callable[[argparse.Namespace], None]


def common_parser() -> argparse.ArgumentParser:
    """Options every subcommand accepts."""
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument(
        "--debug", "--verbose", "-v", action="store_true", help="Enable debug logging"
    )
    parser.add_argument(
        "--seed", type=int, default=None, help="Global seed (default: SAPO_SEED or 0)"
    )
    parser.add_argument(
        "--output-dir",
        type=Path,
        default=None,
        help="Directory for result files (default: SAPO_OUTPUT_DIR or ./runs)",
    )
    parser.add_argument(
        "--config",
        type=Path,
        default=None,
        help="JSON file of flag values; explicit flags take precedence",
    )
    return parser


def add_command(
    subparsers, name: str, func: Command, help: str
) -> argparse.ArgumentParser:
    parser = subparsers.add_parser(name, help=help, parents=[common_parser()])
    parser.set_defaults(func=wrap_command(func))
    return parser


def exit_code_for(e: BaseException) -> int:
    if isinstance(e, (NumericalFailure, TrainingDivergenceError)):
        return EXIT_NUMERICAL
    if isinstance(e, (ValidationError, FileNotFoundError)):
        return EXIT_INVALID
    if isinstance(e, PlacementError) and isinstance(e, (ValueError, IndexError)):
        return EXIT_INVALID
    return EXIT_FAILURE


def wrap_command(func: Command) -> Callable[[argparse.Namespace], int]:
    def wrapper(options: argparse.Namespace) -> int:
        try:
            logger.info(f"Running {func.__module__.rsplit('.', 1)[-1]}")
            func(options)
        except Exception as e:
            logger.exception("Error in command %s: %s", func.__name__, e)
            return exit_code_for(e)
        logger.info("Done.")
        return EXIT_OK

    return update_wrapper(wrapper, func)


def load_config_file(path: Path) -> dict[str, Any]:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"{path}: line {e.lineno} column {e.colno}: {e.msg}") from e
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path}: expected a JSON object of flag values")
    # keys may be spelled like the flags
    return {k.lstrip("-").replace("-", "_"): v for k, v in data.items()}


# -- option helpers ----------------------------------------------------------


def global_seed(options: argparse.Namespace) -> int:
    return settings.seed if options.seed is None else options.seed


def seed_for(options: argparse.Namespace, subsystem: str) -> np.random.SeedSequence:
    return derive_seed(global_seed(options), subsystem)


def int_seed(options: argparse.Namespace, subsystem: str) -> int:
    return int(seed_for(options, subsystem).generate_state(1)[0])


def output_dir(options: argparse.Namespace) -> Path:
    directory = options.output_dir or settings.output_dir
    directory.mkdir(parents=True, exist_ok=True)
    return directory


def output_path(options: argparse.Namespace, explicit: Path | None, default_name: str) -> Path:
    if explicit is not None:
        Path(explicit).parent.mkdir(parents=True, exist_ok=True)
        return Path(explicit)
    return output_dir(options) / default_name


def parse_limits(text: str) -> list[float]:
    try:
        limits = [float(x) for x in text.split(",") if x.strip()]
    except ValueError as e:
        raise ConfigurationError(f"cannot parse limits {text!r}: {e}") from e
    if not limits or any(not (x > 0 and math.isfinite(x)) for x in limits):
        raise ConfigurationError(f"limits must be positive numbers, got {text!r}")
    return sorted(limits)


def load_instances(path: Path) -> list[Instance]:
    dataset = load_dataset(path)
    if not dataset.instances:
        raise ConfigurationError(f"{path}: dataset has no instances")
    logger.info(f"Loaded {len(dataset)} instances from {path}")
    return dataset.instances


# -- output ------------------------------------------------------------------


@contextmanager
def atomic_output(path: Path) -> Iterator[Path]:
    """Yield ``<path>.partial``; it replaces ``path`` only if the block succeeds."""
    path = Path(path)
    partial = path.with_name(path.name + ".partial")
    yield partial
    os.replace(partial, path)


def fmt(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def fmt_sequence(positions: Iterable[int]) -> str:
    return " ".join(str(int(p)) for p in positions)


def fmt_forces(forces: ForceVector) -> str:
    return " ".join(f"{p}:{v!r}" for p, v in forces.as_dict().items())


COUNT_SUMMARY_HEADER = ("limit_mg", "min", "q1", "median", "q3", "max", "mean")


def write_count_summary(path: Path, counts_by_limit: Sequence[tuple[float, Sequence[int]]]) -> None:
    rows = []
    for limit, counts in counts_by_limit:
        s = count_summary(counts)
        rows.append([limit, s.minimum, s.q1, s.median, s.q3, s.maximum, s.mean])
    write_csv(path, COUNT_SUMMARY_HEADER, rows)


def write_csv(
    path: Path,
    header: Sequence[str],
    rows: Iterable[Sequence[Any]],
    agg_rows: Iterable[Sequence[Any]] = (),
) -> None:
    with atomic_output(path) as partial:
        with open(partial, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([fmt(v) for v in row])
            for row in agg_rows:
                writer.writerow(["#agg", *(fmt(v) for v in row)])
    logger.info(f"Wrote {path}")
