"""Set-function view of actuator selection: marginal gains, greedy and brute force."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Iterable

from ._utils import DuplicateSelectionError, InvalidBudgetError, TooLargeError, logger
from .lp import SubproblemSolution, solve_minimax_gap
from .model import Instance, check_positions

Solver = Callable[[Instance, Iterable[int]], SubproblemSolution]

EXHAUSTIVE_LIMIT = 100_000


@dataclass(frozen=True)
class SelectionState:
    """Actuators chosen so far (in selection order) with their cached f(S) solve."""

    selected: tuple[int, ...]
    solution: SubproblemSolution

    @classmethod
    def initial(cls, inst: Instance, solver: Solver = solve_minimax_gap) -> SelectionState:
        return cls((), solver(inst, ()))

    @property
    def d(self) -> float:
        return self.solution.d

    def with_added(
        self, inst: Instance, e: int, solver: Solver = solve_minimax_gap
    ) -> SelectionState:
        (e,) = check_positions(inst, (e,))
        if e in self.selected:
            raise DuplicateSelectionError(f"position {e} is already selected")
        selected = self.selected + (e,)
        return SelectionState(selected, solver(inst, selected))


def marginal_gain(
    inst: Instance, state: SelectionState, e: int, solver: Solver = solve_minimax_gap
) -> float:
    """f(S_t) - f(S_t + {e})."""
    return state.d - state.with_added(inst, e, solver).d


def best_extension(
    inst: Instance, state: SelectionState, solver: Solver
) -> SelectionState:
    best: SelectionState | None = None
    for e in range(inst.m):
        if e in state.selected:
            continue
        candidate = state.with_added(inst, e, solver)
        # strict comparison keeps the lowest index on ties
        if best is None or candidate.d < best.d:
            best = candidate
    assert best is not None
    return best


def greedy_trajectory(
    inst: Instance, M: int, solver: Solver = solve_minimax_gap
) -> list[SelectionState]:
    """States S_0 .. S_M visited by the greedy policy."""
    if not 1 <= M <= inst.m:
        raise InvalidBudgetError(f"budget M={M} outside 1..{inst.m}")
    states = [SelectionState.initial(inst, solver)]
    for _ in range(M):
        nxt = best_extension(inst, states[-1], solver)
        logger.debug(f"greedy picked {nxt.selected[-1]} f={nxt.d:.6g}")
        states.append(nxt)
    return states


def greedy_select(
    inst: Instance, M: int, solver: Solver = solve_minimax_gap
) -> SelectionState:
    """Add the actuator with the largest marginal gain M times."""
    return greedy_trajectory(inst, M, solver)[-1]


def exhaustive_select(
    inst: Instance,
    M: int,
    solver: Solver = solve_minimax_gap,
    limit: int = EXHAUSTIVE_LIMIT,
) -> SelectionState:
    """Best subset of size M by enumeration; optimal among sizes <= M by monotonicity."""
    if not 0 <= M <= inst.m:
        raise InvalidBudgetError(f"budget M={M} outside 0..{inst.m}")
    count = math.comb(inst.m, M)
    if count > limit:
        raise TooLargeError(f"C({inst.m}, {M}) = {count} subsets exceeds limit {limit}")
    best: SelectionState | None = None
    for subset in itertools.combinations(range(inst.m), M):
        solution = solver(inst, subset)
        if best is None or solution.d < best.d:
            best = SelectionState(subset, solution)
    assert best is not None
    return best
