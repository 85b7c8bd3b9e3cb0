from __future__ import annotations

import logging
from typing import Any

import numpy as np

logger = logging.getLogger("sapo")

# LP feasibility/optimality tolerance
TOL = 1e-9

# Fixed ids for seed splitting, see docs/formats.md
SUBSYSTEM_IDS = {
    "gen.train": 1,
    "gen.test": 2,
    "train": 3,
    "eval": 4,
    "audit": 5,
}


class PlacementError(Exception):
    """Base class for every error raised by the placement package."""


class InvalidPositionError(PlacementError, IndexError):
    pass


class InfeasibleForceError(PlacementError, ValueError):
    pass


class DegenerateInputError(PlacementError, ValueError):
    pass


class NumericalFailure(PlacementError):
    pass


class DuplicateSelectionError(PlacementError, ValueError):
    pass


class InvalidBudgetError(PlacementError, ValueError):
    pass


class TooLargeError(PlacementError, ValueError):
    pass


class InvalidActionError(PlacementError, ValueError):
    pass


class EpisodeFinishedError(PlacementError):
    pass


class NoActionError(PlacementError):
    pass


class ConfigurationError(PlacementError, ValueError):
    pass


class GenerationError(PlacementError, ValueError):
    pass


class DatasetFormatError(PlacementError, ValueError):
    pass


class DatasetValidationError(PlacementError, ValueError):
    pass


class TrainingDivergenceError(PlacementError):
    """Raised when a loss or gradient stops being finite.

    ``last_good`` holds the parameters from before the failing update and
    ``log`` the episode records collected so far.
    """

    def __init__(self, message: str, last_good: Any = None, log: Any = None):
        super().__init__(message)
        self.last_good = last_good
        self.log = log


def derive_seed(seed: int, subsystem: str) -> np.random.SeedSequence:
    """Independent, reproducible seed stream for one subsystem."""
    try:
        key = SUBSYSTEM_IDS[subsystem]
    except KeyError:
        raise ConfigurationError(f"Unknown seed subsystem: {subsystem}") from None
    return np.random.SeedSequence(entropy=seed, spawn_key=(key,))
