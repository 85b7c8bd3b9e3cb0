from ._utils import (
    ConfigurationError,
    DatasetFormatError,
    DatasetValidationError,
    DegenerateInputError,
    DuplicateSelectionError,
    EpisodeFinishedError,
    GenerationError,
    InfeasibleForceError,
    InvalidActionError,
    InvalidBudgetError,
    InvalidPositionError,
    NoActionError,
    NumericalFailure,
    PlacementError,
    TooLargeError,
    TrainingDivergenceError,
    derive_seed,
)
from .agent import TrainConfig, evaluate_policy, select_action, train_d3qn, train_rees
from .env import EpisodeConfig, PlacementEnv, StateMatrix, encode_state, project_residuals
from .instances import GenSpec, generate_dataset, generate_instance, load_dataset, save_dataset
from .lp import SolveCache, simplex_solve, solve_minimax_gap
from .model import ForceVector, Instance, compute_gap, max_gap, rms_gap
from .net import load_checkpoint, save_checkpoint
from .oracle import SelectionState, exhaustive_select, greedy_select, marginal_gain

__all__ = [
    "ConfigurationError",
    "DatasetFormatError",
    "DatasetValidationError",
    "DegenerateInputError",
    "DuplicateSelectionError",
    "EpisodeConfig",
    "EpisodeFinishedError",
    "ForceVector",
    "GenSpec",
    "GenerationError",
    "InfeasibleForceError",
    "Instance",
    "InvalidActionError",
    "InvalidBudgetError",
    "InvalidPositionError",
    "NoActionError",
    "NumericalFailure",
    "PlacementEnv",
    "PlacementError",
    "SelectionState",
    "SolveCache",
    "StateMatrix",
    "TooLargeError",
    "TrainConfig",
    "TrainingDivergenceError",
    "compute_gap",
    "derive_seed",
    "encode_state",
    "evaluate_policy",
    "exhaustive_select",
    "generate_dataset",
    "generate_instance",
    "greedy_select",
    "load_checkpoint",
    "load_dataset",
    "marginal_gain",
    "max_gap",
    "project_residuals",
    "rms_gap",
    "save_checkpoint",
    "save_dataset",
    "select_action",
    "simplex_solve",
    "solve_minimax_gap",
    "train_d3qn",
    "train_rees",
]
