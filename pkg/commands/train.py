from __future__ import annotations

import argparse
from pathlib import Path

from rich import print

from config import settings
from placement._utils import ConfigurationError, TrainingDivergenceError, logger
from placement.agent import TrainConfig, TrainingLog, evaluate_policy, train_d3qn, train_rees
from placement.env import EpisodeConfig
from placement.net import save_checkpoint

from ._utils import add_command, atomic_output, int_seed, load_instances, output_path, write_csv

load_priority = 3

TRAINERS = {"d3qn": train_d3qn, "rees": train_rees}

# flag dest -> TrainConfig field
CONFIG_FLAGS = {
    "steps": "total_steps",
    "budget": "budget",
    "epsilon": "epsilon",
    "epsilon_start": "epsilon_start",
    "epsilon_decay_steps": "epsilon_decay_steps",
    "gamma": "gamma",
    "replay_capacity": "replay_capacity",
    "batch_size": "batch_size",
    "target_sync": "target_sync_period",
    "warmup": "warmup",
    "learning_rate": "learning_rate",
    "mirror_instances": "mirror_instances",
}


def eval_log_path(log_path: Path) -> Path:
    """``d3qn.log.csv`` -> ``d3qn.log.eval.csv``."""
    return log_path.with_suffix(".eval.csv")


def write_log(path: Path, log: TrainingLog, with_evaluations: bool = False) -> None:
    write_csv(path, TrainingLog.COLUMNS, log.rows())
    if with_evaluations:
        write_csv(eval_log_path(path), TrainingLog.EVAL_COLUMNS, log.eval_rows())


def train(options: argparse.Namespace) -> None:
    """Train a D3QN agent or the reward-estimation baseline."""
    if options.dataset is None:
        raise ConfigurationError("--dataset is required")
    if options.mode not in TRAINERS:
        raise ConfigurationError(f"--mode must be one of {sorted(TRAINERS)}")
    if options.eval_every < 0:
        raise ConfigurationError(f"--eval-every must be >= 0, got {options.eval_every}")
    if options.eval_dataset is not None and options.eval_every == 0:
        raise ConfigurationError("--eval-dataset needs --eval-every")
    overrides = {
        field: getattr(options, flag)
        for flag, field in CONFIG_FLAGS.items()
        if getattr(options, flag) is not None
    }
    config = TrainConfig(seed=int_seed(options, "train"), **overrides)
    instances = load_instances(options.dataset)
    eval_instances = load_instances(options.eval_dataset) if options.eval_dataset else []

    checkpoint = output_path(options, options.checkpoint, f"{options.mode}.ckpt.json")
    log_path = output_path(options, options.log, f"{options.mode}.log.csv")
    tracking = options.eval_every > 0
    solver = settings.solve_cache
    try:
        params, log = TRAINERS[options.mode](
            instances,
            config,
            solver=solver,
            progress=options.progress,
            eval_instances=eval_instances,
            eval_every=options.eval_every,
        )
    except TrainingDivergenceError as e:
        partial = checkpoint.with_name(checkpoint.name + ".partial")
        if e.last_good is not None:
            save_checkpoint(partial, e.last_good)
            logger.error(f"Last good parameters kept at {partial}")
        if e.log is not None:
            write_log(log_path.with_name(log_path.name + ".partial"), e.log, tracking)
        raise

    with atomic_output(checkpoint) as partial:
        save_checkpoint(partial, params)
    logger.info(f"Wrote checkpoint {checkpoint}")
    write_log(log_path, log, tracking)

    report = evaluate_policy(
        params, instances, EpisodeConfig.budget_mode(config.budget), options.mode, solver
    )
    print(
        f"{options.mode}: {len(log.records)} episodes, train-set mean MG "
        f"{report.mean_mg:.6g}, mean RMSG {report.mean_rmsg:.6g}"
    )


def register(subparsers) -> argparse.ArgumentParser:
    parser = add_command(subparsers, "train", train, help="Train a placement policy")
    parser.add_argument("--dataset", type=Path, default=None, help="Training dataset file")
    parser.add_argument("--mode", choices=sorted(TRAINERS), default="d3qn")
    parser.add_argument("--checkpoint", type=Path, default=None, help="Checkpoint path")
    parser.add_argument("--log", type=Path, default=None, help="Training log CSV path")
    parser.add_argument("--steps", type=int, default=None, help="Total environment steps")
    parser.add_argument("--budget", "-M", type=int, default=None, help="Actuators per episode")
    parser.add_argument("--epsilon", type=float, default=None, help="Exploration after the anneal")
    parser.add_argument("--epsilon-start", type=float, default=None)
    parser.add_argument(
        "--epsilon-decay-steps", type=int, default=None, help="Anneal length, 0 for a fixed epsilon"
    )
    parser.add_argument("--gamma", type=float, default=None)
    parser.add_argument("--replay-capacity", type=int, default=None)
    parser.add_argument("--batch-size", type=int, default=None)
    parser.add_argument("--target-sync", type=int, default=None, help="Steps between target syncs")
    parser.add_argument("--warmup", type=int, default=None, help="Transitions before learning")
    parser.add_argument("--learning-rate", type=float, default=None)
    parser.add_argument(
        "--no-mirror",
        dest="mirror_instances",
        action="store_const",
        const=False,
        default=None,
        help="Do not add psi-negated copies of the training instances",
    )
    parser.add_argument(
        "--eval-dataset", type=Path, default=None, help="Held-out dataset tracked during training"
    )
    parser.add_argument(
        "--eval-every",
        type=int,
        default=0,
        help="Episodes between epsilon=0 evaluations, written to <log>.eval.csv",
    )
    parser.add_argument("--progress", action="store_true", help="Show a progress bar")
    return parser
