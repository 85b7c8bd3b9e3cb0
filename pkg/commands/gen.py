from __future__ import annotations

import argparse

import numpy as np
from rich import print

from placement._utils import ConfigurationError, logger
from placement.instances import GenSpec, dataset_paths, dump_dataset, generate_dataset
from placement.model import max_gap

from ._utils import add_command, atomic_output, global_seed, output_dir, seed_for

load_priority = 1


def gen(options: argparse.Namespace) -> None:
    """Write <name>.train and <name>.test synthetic datasets."""
    overrides = {
        key: getattr(options, key)
        for key in (
            "n",
            "m",
            "force_bound",
            "smoothness",
            "noise_level",
            "deviation_scale",
        )
        if getattr(options, key) is not None
    }
    overrides["seed"] = global_seed(options)
    spec = GenSpec.full_scale(**overrides) if options.full_scale else GenSpec(**overrides)
    if options.train < 0 or options.test < 0:
        raise ConfigurationError("instance counts must be non-negative")

    directory = output_dir(options)
    train_path, test_path = dataset_paths(directory, options.name)
    for path, count, subsystem in (
        (train_path, options.train, "gen.train"),
        (test_path, options.test, "gen.test"),
    ):
        instances = generate_dataset(spec, count, seed_for(options, subsystem))
        with atomic_output(path) as partial:
            partial.write_text(dump_dataset(instances, spec), encoding="utf-8")
        logger.info(f"Wrote {count} instances to {path}")
        mean_mg = np.mean([max_gap(inst.psi) for inst in instances]) if instances else float("nan")
        print(f"[bold]{path}[/bold]: {count} instances, mean max_gap(psi) = {mean_mg:.6g}")


def register(subparsers) -> argparse.ArgumentParser:
    parser = add_command(subparsers, "gen", gen, help="Generate synthetic train/test datasets")
    parser.add_argument("--name", default="synthetic", help="Dataset base name")
    parser.add_argument("--train", type=int, default=20, help="Training instances")
    parser.add_argument("--test", type=int, default=10, help="Test instances")
    parser.add_argument("--n", type=int, default=None, help="Measurement points")
    parser.add_argument("--m", type=int, default=None, help="Candidate actuator positions")
    parser.add_argument("--force-bound", type=float, default=None, help="Symmetric force bound B")
    parser.add_argument("--smoothness", type=int, default=None, help="Cosine modes k")
    parser.add_argument("--noise-level", type=float, default=None, help="Relative noise")
    parser.add_argument("--deviation-scale", type=float, default=None, help="Peak |psi|")
    parser.add_argument(
        "--full-scale", action="store_true", help="Use n=354, m=18 unless overridden"
    )
    return parser
