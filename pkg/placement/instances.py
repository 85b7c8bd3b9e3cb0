"""Synthetic fuselage-like instances and the dataset file format.

Actuators and measurement points sit on a closed cross-section. Each
displacement column is a Fejer bump (non-negative, k cosine modes) centred on
its actuator, normalized to unit peak and optionally perturbed multiplicatively;
the initial deviation is a random smooth field with the same k modes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from ._utils import DatasetFormatError, DatasetValidationError, GenerationError, logger
from .model import Instance

DATASET_VERSION = 1


class GenSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    n: int = Field(default=40, ge=2)
    m: int = Field(default=12, ge=1)
    force_bound: float = Field(default=5.0, gt=0)
    smoothness: int = Field(default=6, ge=1)
    noise_level: float = Field(default=0.05, ge=0)
    deviation_scale: float = Field(default=1.0, ge=0)
    seed: int = 0

    @classmethod
    def full_scale(cls, **overrides) -> GenSpec:
        return cls(**{"n": 354, "m": 18, **overrides})


def _angles(count: int, offset: float = 0.0) -> np.ndarray:
    return 2.0 * np.pi * (np.arange(count) + offset) / count


def fejer_weights(k: int) -> np.ndarray:
    w = 2.0 * (1.0 - np.arange(k) / k)
    w[0] = 1.0
    return w


def build_displacement_matrix(
    actuator_angles: Sequence[float],
    measurement_angles: Sequence[float],
    smoothness: int,
    noise_level: float = 0.0,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """n x m matrix of unit-peak bumps, one column per actuator angle."""
    theta = np.asarray(actuator_angles, dtype=np.float64)
    phi = np.asarray(measurement_angles, dtype=np.float64)
    modes = np.arange(smoothness)
    diff = phi[:, None] - theta[None, :]
    U = np.tensordot(np.cos(diff[..., None] * modes), fejer_weights(smoothness), axes=1)
    U /= smoothness
    if noise_level > 0:
        if rng is None:
            raise GenerationError("noise_level > 0 needs a random generator")
        U = U * (1.0 + noise_level * rng.standard_normal(U.shape))
    return U


def smooth_field(
    measurement_angles: Sequence[float], smoothness: int, scale: float, rng: np.random.Generator
) -> np.ndarray:
    phi = np.asarray(measurement_angles, dtype=np.float64)
    modes = np.arange(smoothness)
    a = rng.standard_normal(smoothness)
    b = rng.standard_normal(smoothness)
    field_ = np.cos(np.outer(phi, modes)) @ a + np.sin(np.outer(phi, modes)) @ b
    peak = np.max(np.abs(field_))
    if scale == 0 or peak == 0:
        return np.zeros_like(phi)
    return field_ * (scale / peak)


def generate_instance(spec: GenSpec, rng: np.random.Generator) -> Instance:
    phi = _angles(spec.n)
    theta = _angles(spec.m, offset=0.5 * spec.m / spec.n)
    U = build_displacement_matrix(theta, phi, spec.smoothness, spec.noise_level, rng)
    if not np.all(U.any(axis=0)):
        raise GenerationError("generated an all-zero displacement column")
    psi = smooth_field(phi, spec.smoothness, spec.deviation_scale, rng)
    bound = np.full(spec.m, spec.force_bound)
    return Instance(psi=psi, U=U, f_lower=-bound, f_upper=bound)


def generate_dataset(
    spec: GenSpec, count: int, seed: np.random.SeedSequence | int | None = None
) -> list[Instance]:
    rng = np.random.default_rng(spec.seed if seed is None else seed)
    return [generate_instance(spec, rng) for _ in range(count)]


# -- persistence -------------------------------------------------------------


class InstanceRecord(BaseModel):
    n: int = Field(gt=0)
    m: int = Field(gt=0)
    psi: list[float]
    U: list[list[float]]
    f_lower: list[float]
    f_upper: list[float]

    @model_validator(mode="after")
    def _check_shapes(self) -> InstanceRecord:
        if len(self.psi) != self.n:
            raise ValueError(f"psi has {len(self.psi)} entries, expected n={self.n}")
        if len(self.U) != self.n:
            raise ValueError(f"U has {len(self.U)} rows, expected n={self.n}")
        for i, row in enumerate(self.U):
            if len(row) != self.m:
                raise ValueError(f"U row {i} has {len(row)} entries, expected m={self.m}")
        for name in ("f_lower", "f_upper"):
            if len(getattr(self, name)) != self.m:
                raise ValueError(f"{name} has {len(getattr(self, name))} entries, expected m={self.m}")
        return self

    @classmethod
    def from_instance(cls, inst: Instance) -> InstanceRecord:
        return cls(
            n=inst.n,
            m=inst.m,
            psi=inst.psi.tolist(),
            U=inst.U.tolist(),
            f_lower=inst.f_lower.tolist(),
            f_upper=inst.f_upper.tolist(),
        )

    def to_instance(self) -> Instance:
        return Instance(psi=self.psi, U=self.U, f_lower=self.f_lower, f_upper=self.f_upper)


class DatasetFile(BaseModel):
    version: int = DATASET_VERSION
    gen_spec: GenSpec | None = None
    instances: list[InstanceRecord]


@dataclass(frozen=True)
class Dataset:
    instances: list[Instance]
    gen_spec: GenSpec | None = None

    def __len__(self) -> int:
        return len(self.instances)


def dataset_paths(directory: Path | str, name: str) -> tuple[Path, Path]:
    directory = Path(directory)
    return directory / f"{name}.train", directory / f"{name}.test"


def dump_dataset(instances: Sequence[Instance], gen_spec: GenSpec | None = None) -> str:
    record = DatasetFile(
        gen_spec=gen_spec,
        instances=[InstanceRecord.from_instance(inst) for inst in instances],
    )
    # floats are written in shortest round-trip form
    return record.model_dump_json()


def save_dataset(
    path: Path | str, instances: Sequence[Instance], gen_spec: GenSpec | None = None
) -> None:
    Path(path).write_text(dump_dataset(instances, gen_spec), encoding="utf-8")
    logger.info(f"Wrote {len(instances)} instances to {path}")


def _describe(e: ValidationError) -> str:
    parts = []
    for err in e.errors():
        loc = ".".join(str(p) for p in err["loc"])
        parts.append(f"{loc}: {err['msg']}")
    return "; ".join(parts)


def load_dataset(path: Path | str) -> Dataset:
    text = Path(path).read_text(encoding="utf-8")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise DatasetFormatError(f"{path}: line {e.lineno} column {e.colno}: {e.msg}") from e
    try:
        record = DatasetFile.model_validate(raw)
    except ValidationError as e:
        raise DatasetValidationError(f"{path}: {_describe(e)}") from e
    if record.version != DATASET_VERSION:
        raise DatasetValidationError(f"{path}: version: unsupported value {record.version}")
    instances = []
    for i, rec in enumerate(record.instances):
        try:
            instances.append(rec.to_instance())
        except ValueError as e:
            raise DatasetValidationError(f"{path}: instances.{i}: {e}") from e
    return Dataset(instances=instances, gen_spec=record.gen_spec)
