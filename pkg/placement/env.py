"""Sequential placement as an episodic decision process.

The state matrix is (m + 1) x (n + 1): rows 0..m-1 hold each actuator's
displacement column with the span of the selected columns projected out and
L2-normalized, row m holds the equally treated deviation, and the last column
is the selection mask.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from ._utils import ConfigurationError, EpisodeFinishedError, InvalidActionError, logger
from .lp import solve_minimax_gap
from .model import Instance, check_positions
from .oracle import SelectionState, Solver

BASIS_DROP_TOL = 1e-10
ZERO_ROW_TOL = 1e-12
ZERO_DENOMINATOR_TOL = 1e-12


def _orthonormal_basis(columns: np.ndarray) -> np.ndarray:
    """Modified Gram-Schmidt; dependent columns are dropped."""
    basis: list[np.ndarray] = []
    for j in range(columns.shape[1]):
        v = columns[:, j].copy()
        scale = np.linalg.norm(v)
        for _ in range(2):
            for q in basis:
                v -= (q @ v) * q
        norm = np.linalg.norm(v)
        if norm <= BASIS_DROP_TOL * max(scale, 1.0):
            continue
        basis.append(v / norm)
    if not basis:
        return np.zeros((columns.shape[0], 0))
    return np.column_stack(basis)


def _remove_span(Q: np.ndarray, X: np.ndarray) -> np.ndarray:
    out = np.array(X, dtype=np.float64, copy=True)
    # two sweeps keep the residual orthogonal to working precision
    for _ in range(2):
        for j in range(Q.shape[1]):
            q = Q[:, j]
            out -= np.multiply.outer(q, q @ out)
    return out


def project_residuals(inst: Instance, S: Iterable[int]) -> tuple[np.ndarray, np.ndarray]:
    """Components of U's columns and of psi orthogonal to span(U_S).

    Returns ``(U_o, psi_o)`` with ``U_o`` n x m; columns of selected actuators
    are exactly zero.
    """
    positions = sorted(set(check_positions(inst, S)))
    if not positions:
        return inst.U.copy(), inst.psi.copy()
    Q = _orthonormal_basis(inst.U[:, positions])
    U_o = _remove_span(Q, inst.U)
    U_o[:, positions] = 0.0
    psi_o = _remove_span(Q, inst.psi)
    return U_o, psi_o


@dataclass(frozen=True, eq=False)
class StateMatrix:
    grid: np.ndarray = field(repr=False)

    def __post_init__(self):
        grid = np.array(self.grid, dtype=np.float64, copy=True)
        grid.setflags(write=False)
        object.__setattr__(self, "grid", grid)

    @property
    def m(self) -> int:
        return self.grid.shape[0] - 1

    @property
    def n(self) -> int:
        return self.grid.shape[1] - 1

    @property
    def residual_rows(self) -> np.ndarray:
        return self.grid[: self.m, : self.n]

    @property
    def psi_row(self) -> np.ndarray:
        return self.grid[self.m, : self.n]

    @property
    def mask(self) -> np.ndarray:
        return self.grid[: self.m, self.n] > 0.5

    def available(self) -> np.ndarray:
        return np.flatnonzero(~self.mask)


def _normalize(v: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(v)
    if norm <= ZERO_ROW_TOL:
        return np.zeros_like(v)
    return v / norm


def encode_state(inst: Instance, state: SelectionState) -> StateMatrix:
    n, m = inst.n, inst.m
    U_o, psi_o = project_residuals(inst, state.selected)
    grid = np.zeros((m + 1, n + 1))
    for e in range(m):
        grid[e, :n] = _normalize(U_o[:, e])
    grid[m, :n] = _normalize(psi_o)
    grid[list(state.selected), n] = 1.0
    return StateMatrix(grid)


@dataclass(frozen=True)
class EpisodeConfig:
    """Either a fixed actuator budget or a maximum-gap limit."""

    budget: int | None = None
    limit_mg: float | None = None

    def __post_init__(self):
        if (self.budget is None) == (self.limit_mg is None):
            raise ConfigurationError("set exactly one of budget or limit_mg")
        if self.budget is not None and self.budget < 1:
            raise ConfigurationError(f"budget must be positive, got {self.budget}")
        if self.limit_mg is not None and not self.limit_mg > 0:
            raise ConfigurationError(f"limit_mg must be positive, got {self.limit_mg}")

    @classmethod
    def budget_mode(cls, M: int) -> EpisodeConfig:
        return cls(budget=M)

    @classmethod
    def spec_limit(cls, limit_mg: float) -> EpisodeConfig:
        return cls(limit_mg=limit_mg)

    @property
    def is_budget(self) -> bool:
        return self.budget is not None

    def validate_for(self, inst: Instance) -> None:
        if self.budget is not None and self.budget > inst.m:
            raise ConfigurationError(f"budget {self.budget} exceeds m={inst.m}")


@dataclass(frozen=True, eq=False)
class Transition:
    state: StateMatrix
    action: int
    reward: float
    next_state: StateMatrix
    done: bool
    # f(S_{t+1}) and ||delta_{S_t}||_2, kept for diagnostics
    max_gap_after: float = float("nan")
    gap_norm_before: float = float("nan")


class PlacementEnv:
    """One episode over one instance; not thread-safe."""

    def __init__(
        self,
        inst: Instance,
        config: EpisodeConfig,
        solver: Solver = solve_minimax_gap,
    ):
        config.validate_for(inst)
        self.inst = inst
        self.config = config
        self.solver = solver
        self.selection: SelectionState | None = None
        self.state: StateMatrix | None = None
        self.done = True

    def reset(self) -> StateMatrix:
        self.selection = SelectionState.initial(self.inst, self.solver)
        self.state = encode_state(self.inst, self.selection)
        # a limit already met needs no actuator at all
        self.done = (
            self.config.limit_mg is not None and self.selection.d < self.config.limit_mg
        )
        return self.state

    def step(self, action: int) -> Transition:
        if self.selection is None or self.done:
            raise EpisodeFinishedError("episode is finished, call reset()")
        action = int(action)
        if not 0 <= action < self.inst.m or self.state.mask[action]:
            raise InvalidActionError(f"action {action} is masked or out of range")

        before = self.selection
        gap_norm = float(np.linalg.norm(before.solution.delta))
        after = before.with_added(self.inst, action, self.solver)
        if gap_norm <= ZERO_DENOMINATOR_TOL:
            reward = 0.0
            done = True
        else:
            reward = (before.d - after.d) / gap_norm
            count = len(after.selected)
            if self.config.budget is not None:
                done = count == self.config.budget
            else:
                done = after.d < self.config.limit_mg or count == self.inst.m

        next_state = encode_state(self.inst, after)
        transition = Transition(
            state=self.state,
            action=action,
            reward=reward,
            next_state=next_state,
            done=done,
            max_gap_after=after.d,
            gap_norm_before=gap_norm,
        )
        logger.debug(f"step a={action} f={after.d:.6g} r={reward:.6g} done={done}")
        self.selection = after
        self.state = next_state
        self.done = done
        return transition
