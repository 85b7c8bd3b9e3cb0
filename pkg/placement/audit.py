"""Diagnostics on the set-function structure of f(S).

None of these are used by training; they publish how far the learned-state
features and the greedy heuristic are from their idealized counterparts.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._utils import TOL, logger
from .env import ZERO_ROW_TOL, project_residuals
from .lp import solve_minimax_gap
from .model import Instance, max_gap
from .oracle import EXHAUSTIVE_LIMIT, Solver, exhaustive_select, greedy_select


def projected_single_gap(inst: Instance, S: Sequence[int], e: int) -> tuple[float, float]:
    """f over the projected problem (U_o, psi_o) with only actuator e available.

    Returns ``(f_proj({e}), f_proj(()))``.
    """
    U_o, psi_o = project_residuals(inst, S)
    baseline = max_gap(psi_o)
    column = U_o[:, [e]]
    if np.linalg.norm(column) <= ZERO_ROW_TOL:
        return baseline, baseline
    projected = Instance(
        psi=psi_o,
        U=column,
        f_lower=inst.f_lower[[e]],
        f_upper=inst.f_upper[[e]],
    )
    return solve_minimax_gap(projected, (0,)).d, baseline


@dataclass(frozen=True)
class DiscrepancyReport:
    checked: int
    max_literal: float
    mean_literal: float
    max_projected: float
    mean_projected: float


def projection_discrepancy(
    instances: Sequence[Instance],
    max_size: int = 2,
    solver: Solver = solve_minimax_gap,
) -> DiscrepancyReport:
    """Compare true marginal gains with their projected-problem stand-ins.

    Over every S with |S| <= max_size and e outside S, ``literal`` is
    |gain - f_proj({e})| and ``projected`` is |gain - (f_proj(()) - f_proj({e}))|.
    """
    literal, projected = [], []
    for inst in instances:
        for size in range(min(max_size, inst.m - 1) + 1):
            for S in itertools.combinations(range(inst.m), size):
                f_S = solver(inst, S).d
                for e in range(inst.m):
                    if e in S:
                        continue
                    gain = f_S - solver(inst, S + (e,)).d
                    single, base = projected_single_gap(inst, S, e)
                    literal.append(abs(gain - single))
                    projected.append(abs(gain - (base - single)))
    if not literal:
        return DiscrepancyReport(0, 0.0, 0.0, 0.0, 0.0)
    report = DiscrepancyReport(
        checked=len(literal),
        max_literal=float(np.max(literal)),
        mean_literal=float(np.mean(literal)),
        max_projected=float(np.max(projected)),
        mean_projected=float(np.mean(projected)),
    )
    logger.info(f"projection discrepancy over {report.checked} pairs: {report}")
    return report


@dataclass(frozen=True)
class SubmodularityReport:
    checked: int
    violations: int
    worst: float


def submodularity_violations(
    instances: Sequence[Instance],
    tol: float = TOL,
    solver: Solver = solve_minimax_gap,
) -> SubmodularityReport:
    """Count (S, t, e) with gain(S + {t}, e) > gain(S, e) + tol, for |S| <= 1."""
    checked = violations = 0
    worst = 0.0
    for inst in instances:
        f = {(): solver(inst, ()).d}

        def value(subset: tuple[int, ...]) -> float:
            key = tuple(sorted(subset))
            if key not in f:
                f[key] = solver(inst, key).d
            return f[key]

        for size in range(min(1, inst.m - 2) + 1):
            for S in itertools.combinations(range(inst.m), size):
                rest = [x for x in range(inst.m) if x not in S]
                for t, e in itertools.permutations(rest, 2):
                    small = value(S) - value(S + (e,))
                    large = value(S + (t,)) - value(S + (t, e))
                    excess = large - small
                    checked += 1
                    if excess > tol:
                        violations += 1
                        worst = max(worst, excess)
    return SubmodularityReport(checked, violations, worst)


@dataclass(frozen=True)
class GreedyRatioReport:
    ratios: list[float]
    below_optimum: int
    worst_instance: int

    @property
    def mean_ratio(self) -> float:
        return float(np.mean(self.ratios))

    @property
    def worst_ratio(self) -> float:
        return self.ratios[self.worst_instance]


def _ratio(greedy: float, optimum: float) -> float:
    if optimum <= TOL:
        return 1.0 if greedy <= TOL else float("inf")
    return greedy / optimum


def greedy_ratio(
    instances: Sequence[Instance],
    M: int,
    solver: Solver = solve_minimax_gap,
    limit: int = EXHAUSTIVE_LIMIT,
) -> GreedyRatioReport:
    """Greedy f(S) over the exhaustive optimum, per instance."""
    ratios = []
    below = 0
    for inst in instances:
        g = greedy_select(inst, M, solver).d
        opt = exhaustive_select(inst, M, solver, limit).d
        if g < opt - TOL:
            below += 1
        ratios.append(_ratio(g, opt))
    worst = int(np.argmax(ratios)) if ratios else -1
    return GreedyRatioReport(ratios, below, worst)
