"""Problem data: the linear gap surrogate and its quality metrics."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping

import numpy as np
import numpy.typing as npt

from ._utils import TOL, DegenerateInputError, InfeasibleForceError, InvalidPositionError

GapVector = npt.NDArray[np.float64]


def _frozen(values, ndim: int, name: str) -> np.ndarray:
    arr = np.array(values, dtype=np.float64, copy=True)
    if arr.ndim != ndim:
        raise DegenerateInputError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DegenerateInputError(f"{name} contains non-finite values")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Instance:
    """One fuselage pair: deviation ``psi`` (n), displacement ``U`` (n x m), force box."""

    psi: np.ndarray
    U: np.ndarray
    f_lower: np.ndarray
    f_upper: np.ndarray

    def __post_init__(self):
        psi = _frozen(self.psi, 1, "psi")
        U = _frozen(self.U, 2, "U")
        f_lower = _frozen(self.f_lower, 1, "f_lower")
        f_upper = _frozen(self.f_upper, 1, "f_upper")
        n, m = U.shape
        if n < 1 or m < 1:
            raise DegenerateInputError(f"U must be non-empty, got shape {U.shape}")
        if psi.shape != (n,):
            raise DegenerateInputError(f"psi has length {psi.size}, expected n={n}")
        if f_lower.shape != (m,) or f_upper.shape != (m,):
            raise DegenerateInputError(f"force bounds must have length m={m}")
        if np.any(f_lower > 0) or np.any(f_upper < 0):
            raise DegenerateInputError("force bounds must straddle zero (f_lower <= 0 <= f_upper)")
        zero_cols = np.flatnonzero(~U.any(axis=0))
        if zero_cols.size:
            raise DegenerateInputError(f"U has all-zero columns: {zero_cols.tolist()}")
        object.__setattr__(self, "psi", psi)
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "f_lower", f_lower)
        object.__setattr__(self, "f_upper", f_upper)

    @property
    def n(self) -> int:
        return self.U.shape[0]

    @property
    def m(self) -> int:
        return self.U.shape[1]

    @cached_property
    def fingerprint(self) -> str:
        h = hashlib.sha1()
        for arr in (self.psi, self.U, self.f_lower, self.f_upper):
            h.update(str(arr.shape).encode())
            h.update(arr.tobytes())
        return h.hexdigest()

    @property
    def symmetric_bounds(self) -> bool:
        return bool(np.array_equal(self.f_lower, -self.f_upper))

    def negated(self) -> Instance:
        """The instance with psi -> -psi; under symmetric bounds every f(S) is unchanged."""
        return Instance(psi=-self.psi, U=self.U, f_lower=self.f_lower, f_upper=self.f_upper)


@dataclass(frozen=True)
class ForceVector:
    """Forces applied at an ordered set of positions."""

    positions: tuple[int, ...] = ()
    values: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        positions = tuple(int(p) for p in self.positions)
        values = np.array(self.values, dtype=np.float64, copy=True).reshape(-1)
        if len(positions) != values.size:
            raise DegenerateInputError("positions and values differ in length")
        if len(set(positions)) != len(positions):
            raise DegenerateInputError(f"duplicate positions in {positions}")
        values.setflags(write=False)
        object.__setattr__(self, "positions", positions)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_mapping(cls, forces: Mapping[int, float]) -> ForceVector:
        keys = list(forces)
        return cls(tuple(keys), np.array([forces[k] for k in keys], dtype=np.float64))

    def __len__(self) -> int:
        return len(self.positions)

    def as_dict(self) -> dict[int, float]:
        return {p: float(v) for p, v in zip(self.positions, self.values)}


def check_positions(inst: Instance, positions: Iterable[int]) -> tuple[int, ...]:
    out = tuple(int(p) for p in positions)
    for p in out:
        if not 0 <= p < inst.m:
            raise InvalidPositionError(f"position {p} outside 0..{inst.m - 1}")
    return out


def compute_gap(inst: Instance, forces: ForceVector) -> GapVector:
    """delta = psi + U_S F_S."""
    positions = check_positions(inst, forces.positions)
    if not positions:
        return inst.psi.copy()
    idx = list(positions)
    lo, hi = inst.f_lower[idx], inst.f_upper[idx]
    slack = TOL * (1.0 + np.maximum(np.abs(lo), np.abs(hi)))
    bad = (forces.values < lo - slack) | (forces.values > hi + slack)
    if np.any(bad):
        where = [positions[i] for i in np.flatnonzero(bad)]
        raise InfeasibleForceError(f"forces outside bounds at positions {where}")
    return inst.psi + inst.U[:, idx] @ forces.values


def _as_gap(delta) -> np.ndarray:
    arr = np.asarray(delta, dtype=np.float64).reshape(-1)
    if arr.size == 0:
        raise DegenerateInputError("gap vector is empty")
    return arr


def max_gap(delta) -> float:
    """MG: the L-infinity norm of the gap vector."""
    return float(np.max(np.abs(_as_gap(delta))))


def rms_gap(delta) -> float:
    """RMSG: sqrt(mean(delta_i^2))."""
    arr = _as_gap(delta)
    return float(np.sqrt(np.mean(arr * arr)))
