"""Minimax-gap linear program and the dense two-phase simplex that solves it.

For a fixed actuator set S the best achievable maximum gap is

    f(S) = min d
           s.t.  U_S F_S + d 1 + psi >= 0
                 U_S F_S - d 1 + psi <= 0
                 F_l <= F_S <= F_L

Variables are (F_S, d). ``d`` is boxed to [0, max|psi| + 1]; ``F = 0`` already
achieves ``max|psi|`` so the box never cuts off the optimum.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from expiringdict import ExpiringDict

from ._utils import TOL, ConfigurationError, DuplicateSelectionError, NumericalFailure, logger
from .model import ForceVector, GapVector, Instance, check_positions, max_gap

MAX_ITERATIONS = 10_000


class LPStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    NUMERICAL_FAILURE = "numerical_failure"


@dataclass(frozen=True)
class LPResult:
    status: LPStatus
    x: np.ndarray | None = None
    objective: float = float("nan")
    iterations: int = 0


@dataclass(frozen=True)
class SubproblemSolution:
    d: float
    forces: ForceVector
    delta: GapVector = field(repr=False)
    status: LPStatus = LPStatus.OPTIMAL

    def __post_init__(self):
        delta = np.array(self.delta, dtype=np.float64, copy=True)
        delta.setflags(write=False)
        object.__setattr__(self, "delta", delta)


def _pivot(T: np.ndarray, basis: np.ndarray, r: int, e: int) -> None:
    T[r] /= T[r, e]
    col = T[:, e].copy()
    col[r] = 0.0
    T -= np.outer(col, T[r])
    basis[r] = e


def _iterate(
    T: np.ndarray, basis: np.ndarray, tol: float, max_iterations: int
) -> tuple[LPStatus, int]:
    """Run primal simplex on tableau ``T`` (objective row last, rhs column last).

    Dantzig pricing with lowest-index ties, switching to Bland's rule after
    2 * (rows + cols) pivots.
    """
    rows = T.shape[0] - 1
    cols = T.shape[1] - 1
    bland_after = 2 * (rows + cols)
    for it in range(max_iterations):
        reduced = T[-1, :-1]
        bland = it >= bland_after
        if bland:
            candidates = np.flatnonzero(reduced < -tol)
            if candidates.size == 0:
                return LPStatus.OPTIMAL, it
            e = int(candidates[0])
        else:
            e = int(np.argmin(reduced))
            if reduced[e] >= -tol:
                return LPStatus.OPTIMAL, it

        col = T[:-1, e]
        eligible = col > tol
        if not eligible.any():
            return LPStatus.UNBOUNDED, it
        rhs = np.maximum(T[:-1, -1], 0.0)
        ratios = np.full(rows, np.inf)
        ratios[eligible] = rhs[eligible] / col[eligible]
        best = ratios.min()
        ties = np.flatnonzero(ratios <= best + 1e-12 * (1.0 + abs(best)))
        if bland:
            r = int(ties[np.argmin(basis[ties])])
        else:
            r = int(ties[np.argmax(col[ties])])
        _pivot(T, basis, r, e)
    return LPStatus.NUMERICAL_FAILURE, max_iterations


def simplex_solve(
    c,
    A,
    b,
    bounds,
    tol: float = TOL,
    max_iterations: int = MAX_ITERATIONS,
) -> LPResult:
    """Minimize ``c @ x`` subject to ``A @ x <= b`` and ``lo <= x <= hi``.

    ``bounds`` is a (k, 2) array of finite per-variable boxes. The problem is
    shifted to ``y = x - lo`` and solved with a two-phase tableau method.
    """
    c = np.asarray(c, dtype=np.float64).reshape(-1)
    k = c.size
    if k == 0:
        raise ConfigurationError("LP needs at least one variable")
    A = np.asarray(A, dtype=np.float64).reshape(-1, k)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if A.shape[0] != b.size:
        raise ConfigurationError(f"A has {A.shape[0]} rows but b has {b.size} entries")
    box = np.asarray(bounds, dtype=np.float64).reshape(k, 2)
    if not np.all(np.isfinite(box)):
        raise ConfigurationError("every variable needs a finite box")
    lo, hi = box[:, 0], box[:, 1]
    if np.any(lo > hi):
        return LPResult(LPStatus.INFEASIBLE)

    rows = np.vstack([A, np.eye(k)])
    rhs = np.concatenate([b - A @ lo, hi - lo])
    R = rows.shape[0]
    flip = rhs < 0
    rows[flip] *= -1.0
    rhs[flip] *= -1.0
    art_rows = np.flatnonzero(flip)
    n_art = art_rows.size
    N = k + R + n_art

    T = np.zeros((R + 1, N + 1))
    T[:R, :k] = rows
    T[np.arange(R), k + np.arange(R)] = np.where(flip, -1.0, 1.0)
    T[art_rows, k + R + np.arange(n_art)] = 1.0
    T[:R, -1] = rhs
    basis = k + np.arange(R)
    basis[art_rows] = k + R + np.arange(n_art)

    iterations = 0
    if n_art:
        T[R, k + R : N] = 1.0
        T[R] -= T[art_rows].sum(axis=0)
        status, used = _iterate(T, basis, tol, max_iterations)
        iterations += used
        if status is not LPStatus.OPTIMAL:
            return LPResult(LPStatus.NUMERICAL_FAILURE, iterations=iterations)
        if -T[R, -1] > tol * (1.0 + rhs.max()):
            return LPResult(LPStatus.INFEASIBLE, iterations=iterations)

        keep = np.ones(R, dtype=bool)
        for i in range(R):
            if basis[i] < k + R:
                continue
            T[i, -1] = 0.0
            candidates = np.flatnonzero(np.abs(T[i, : k + R]) > tol)
            if candidates.size:
                _pivot(T, basis, i, int(candidates[0]))
            else:
                keep[i] = False
        T = np.vstack([T[:R][keep], T[R:]])
        T = np.hstack([T[:, : k + R], T[:, -1:]])
        basis = basis[keep]

    n_cols = k + R
    cost = np.zeros(n_cols)
    cost[:k] = c
    T[-1, :] = 0.0
    T[-1, :n_cols] = cost
    for i, bi in enumerate(basis):
        if cost[bi] != 0.0:
            T[-1] -= cost[bi] * T[i]
    status, used = _iterate(T, basis, tol, max_iterations - iterations)
    iterations += used
    if status is not LPStatus.OPTIMAL:
        return LPResult(status, iterations=iterations)

    y = np.zeros(n_cols)
    y[basis] = T[:-1, -1]
    x = np.clip(lo + y[:k], lo, hi)
    return LPResult(LPStatus.OPTIMAL, x=x, objective=float(c @ x), iterations=iterations)


def solve_minimax_gap(inst: Instance, S: Iterable[int]) -> SubproblemSolution:
    """f(S): the smallest maximum gap reachable with actuator set ``S``.

    The set is solved in ascending index order, so the returned forces do not
    depend on the order in which ``S`` was built.
    """
    positions = check_positions(inst, S)
    if len(set(positions)) != len(positions):
        raise DuplicateSelectionError(f"actuator set has duplicates: {positions}")
    baseline = max_gap(inst.psi)
    if not positions:
        return SubproblemSolution(d=baseline, forces=ForceVector(), delta=inst.psi)

    idx = sorted(positions)
    k = len(idx)
    U_S = inst.U[:, idx]
    ones = np.ones((inst.n, 1))
    A = np.vstack([np.hstack([-U_S, -ones]), np.hstack([U_S, -ones])])
    b = np.concatenate([inst.psi, -inst.psi])
    cost = np.zeros(k + 1)
    cost[-1] = 1.0
    box = np.vstack(
        [
            np.column_stack([inst.f_lower[idx], inst.f_upper[idx]]),
            [[0.0, baseline + 1.0]],
        ]
    )
    result = simplex_solve(cost, A, b, box)
    if result.status is not LPStatus.OPTIMAL:
        # zero force is always feasible, so anything but optimal is a solver fault
        raise NumericalFailure(
            f"minimax LP for S={idx} ended {result.status.value} "
            f"after {result.iterations} pivots"
        )
    logger.debug(f"LP S={idx} d={result.objective:.6g} pivots={result.iterations}")

    F = np.clip(result.x[:k], inst.f_lower[idx], inst.f_upper[idx])
    delta = inst.psi + U_S @ F
    d = max_gap(delta)
    if d > baseline:
        F = np.zeros(k)
        delta = inst.psi
        d = baseline
    return SubproblemSolution(d=d, forces=ForceVector(tuple(idx), F), delta=delta)


class SolveCache:
    """Bounded memo of ``solve_minimax_gap`` keyed by instance content and set."""

    def __init__(self, max_len: int = 100_000, max_age_seconds: float = 3600):
        self._cache = ExpiringDict(max_len=max_len, max_age_seconds=max_age_seconds)
        self.hits = 0
        self.misses = 0

    def solve(self, inst: Instance, S: Iterable[int]) -> SubproblemSolution:
        S = tuple(S)
        key = (inst.fingerprint, tuple(sorted(S)))
        cached = self._cache.get(key)
        if cached is not None:
            self.hits += 1
            return cached
        self.misses += 1
        solution = solve_minimax_gap(inst, S)
        self._cache[key] = solution
        return solution

    __call__ = solve

    def __len__(self) -> int:
        return len(self._cache)
