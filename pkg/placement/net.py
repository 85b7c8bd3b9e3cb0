"""Dense networks in plain numpy: the dueling Q-network and the reward estimator.

Both read the m x 2n input built from a state matrix: row e is the
normalized residual of actuator e followed by the normalized deviation.

Q-network: a shared row encoder (2n -> 64 -> 64, ReLU) feeds an advantage head
per row (64 -> 32 -> 1) and, through the mean-pooled encoding, a value head
(64 -> 32 -> 1); Q = V + A - mean(A). The reward estimator is a plain
2n -> 64 -> 32 -> 1 ReLU network on single rows.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from ._utils import ConfigurationError, DatasetFormatError, TrainingDivergenceError
from .env import StateMatrix

CHECKPOINT_VERSION = 1


class NetArch(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["d3qn", "rees"]
    n: int = Field(gt=0)
    m: int = Field(gt=0)
    encoder_widths: tuple[int, ...] = (64, 64)
    head_widths: tuple[int, ...] = (32,)
    reward_widths: tuple[int, ...] = (64, 32)

    @property
    def input_width(self) -> int:
        return 2 * self.n

    def layer_shapes(self) -> dict[str, list[tuple[int, int]]]:
        def chain(widths: tuple[int, ...], start: int) -> list[tuple[int, int]]:
            shapes, width = [], start
            for w in widths:
                shapes.append((w, width))
                width = w
            return shapes

        if self.kind == "rees":
            return {"reward": chain(self.reward_widths + (1,), self.input_width)}
        enc = chain(self.encoder_widths, self.input_width)
        hidden = enc[-1][0] if enc else self.input_width
        return {
            "encoder": enc,
            "advantage": chain(self.head_widths + (1,), hidden),
            "value": chain(self.head_widths + (1,), hidden),
        }


@dataclass
class NetworkParams:
    """Named weight arrays (``<block>.<i>.W`` of shape (out, in), ``<block>.<i>.b``)."""

    arch: NetArch
    arrays: dict[str, np.ndarray] = field(repr=False)

    def layers(self, block: str) -> list[tuple[np.ndarray, np.ndarray]]:
        out = []
        i = 0
        while f"{block}.{i}.W" in self.arrays:
            out.append((self.arrays[f"{block}.{i}.W"], self.arrays[f"{block}.{i}.b"]))
            i += 1
        return out

    def copy(self) -> NetworkParams:
        return type(self)(self.arch, {k: v.copy() for k, v in self.arrays.items()})

    def zeros_like(self) -> NetworkParams:
        return type(self)(self.arch, {k: np.zeros_like(v) for k, v in self.arrays.items()})

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(v)) for v in self.arrays.values())

    def equals(self, other: NetworkParams) -> bool:
        return (
            self.arch == other.arch
            and self.arrays.keys() == other.arrays.keys()
            and all(np.array_equal(v, other.arrays[k]) for k, v in self.arrays.items())
        )


class QNetworkParams(NetworkParams):
    pass


class RewardNetParams(NetworkParams):
    pass


def _params_class(kind: str) -> type[NetworkParams]:
    return QNetworkParams if kind == "d3qn" else RewardNetParams


def init_params(arch: NetArch, rng: np.random.Generator) -> NetworkParams:
    """He-style uniform fan-in initialization with zero biases."""
    arrays: dict[str, np.ndarray] = {}
    for block, shapes in arch.layer_shapes().items():
        for i, (fan_out, fan_in) in enumerate(shapes):
            limit = np.sqrt(6.0 / fan_in)
            arrays[f"{block}.{i}.W"] = rng.uniform(-limit, limit, size=(fan_out, fan_in))
            arrays[f"{block}.{i}.b"] = np.zeros(fan_out)
    return _params_class(arch.kind)(arch, arrays)


def check_shapes(params: NetworkParams) -> None:
    for block, shapes in params.arch.layer_shapes().items():
        layers = params.layers(block)
        if len(layers) != len(shapes):
            raise ConfigurationError(f"{block}: expected {len(shapes)} layers, got {len(layers)}")
        for i, ((W, b), shape) in enumerate(zip(layers, shapes)):
            if W.shape != shape or b.shape != (shape[0],):
                raise ConfigurationError(
                    f"{block}.{i}: expected W{shape}, got W{W.shape} b{b.shape}"
                )


# -- building blocks ---------------------------------------------------------


def _mlp_forward(layers, X: np.ndarray, relu_last: bool):
    acts, pre = [X], []
    H = X
    for i, (W, b) in enumerate(layers):
        Z = H @ W.T + b
        H = np.maximum(Z, 0.0) if (relu_last or i < len(layers) - 1) else Z
        pre.append(Z)
        acts.append(H)
    return H, (acts, pre)


def _mlp_backward(layers, cache, grad: np.ndarray, relu_last: bool):
    acts, pre = cache
    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(layers)  # type: ignore[list-item]
    G = grad
    for i in reversed(range(len(layers))):
        W, _ = layers[i]
        if relu_last or i < len(layers) - 1:
            G = G * (pre[i] > 0.0)
        G2 = G.reshape(-1, G.shape[-1])
        H2 = acts[i].reshape(-1, acts[i].shape[-1])
        grads[i] = (G2.T @ H2, G2.sum(axis=0))
        G = G @ W
    return G, grads


def _store(arrays: dict, block: str, grads) -> None:
    for i, (dW, db) in enumerate(grads):
        arrays[f"{block}.{i}.W"] = dW
        arrays[f"{block}.{i}.b"] = db


def _as_batch(params: NetworkParams, X, ndim: int) -> tuple[np.ndarray, bool]:
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == ndim - 1
    if single:
        X = X[None]
    if X.ndim != ndim or X.shape[-1] != params.arch.input_width:
        raise ConfigurationError(
            f"input shape {X.shape} does not match width {params.arch.input_width}"
        )
    return X, single


# -- input construction ------------------------------------------------------


def build_input(state: StateMatrix) -> np.ndarray:
    """m x 2n matrix: residual row e next to the replicated deviation row."""
    rows = state.residual_rows
    psi = np.broadcast_to(state.psi_row, rows.shape)
    return np.concatenate([rows, psi], axis=1)


# -- dueling Q-network -------------------------------------------------------


@dataclass
class QTape:
    single: bool
    m: int
    encoder: tuple
    advantage: tuple
    value: tuple
    V: np.ndarray
    A: np.ndarray


def q_forward_tape(params: NetworkParams, X) -> tuple[np.ndarray, QTape]:
    X, single = _as_batch(params, X, 3)
    E, enc_cache = _mlp_forward(params.layers("encoder"), X, relu_last=True)
    A, adv_cache = _mlp_forward(params.layers("advantage"), E, relu_last=False)
    A = A[..., 0]
    V, val_cache = _mlp_forward(params.layers("value"), E.mean(axis=1), relu_last=False)
    V = V[:, 0]
    Q = V[:, None] + A - A.mean(axis=1, keepdims=True)
    tape = QTape(single, X.shape[1], enc_cache, adv_cache, val_cache, V, A)
    return (Q[0] if single else Q), tape


def q_forward(params: NetworkParams, X) -> np.ndarray:
    """Q-values, length m for one input or (B, m) for a batch."""
    return q_forward_tape(params, X)[0]


def q_backward(params: NetworkParams, tape: QTape, dQ) -> NetworkParams:
    """Gradients of a loss whose derivative with respect to Q is ``dQ``."""
    dQ = np.asarray(dQ, dtype=np.float64)
    if tape.single:
        dQ = dQ[None]
    dA = dQ - dQ.mean(axis=1, keepdims=True)
    dV = dQ.sum(axis=1)
    dE_adv, g_adv = _mlp_backward(params.layers("advantage"), tape.advantage, dA[..., None], False)
    dP, g_val = _mlp_backward(params.layers("value"), tape.value, dV[:, None], False)
    dE = dE_adv + dP[:, None, :] / tape.m
    _, g_enc = _mlp_backward(params.layers("encoder"), tape.encoder, dE, True)
    arrays: dict[str, np.ndarray] = {}
    _store(arrays, "encoder", g_enc)
    _store(arrays, "advantage", g_adv)
    _store(arrays, "value", g_val)
    return type(params)(params.arch, {k: arrays[k] for k in params.arrays})


# -- reward estimator --------------------------------------------------------


@dataclass
class RewardTape:
    shape: tuple[int, ...]
    cache: tuple


def reward_net_tape(params: NetworkParams, rows) -> tuple[np.ndarray, RewardTape]:
    rows = np.asarray(rows, dtype=np.float64)
    if rows.shape[-1] != params.arch.input_width:
        raise ConfigurationError(
            f"row width {rows.shape[-1]} does not match {params.arch.input_width}"
        )
    flat = rows.reshape(-1, rows.shape[-1])
    out, cache = _mlp_forward(params.layers("reward"), flat, relu_last=False)
    return out[:, 0].reshape(rows.shape[:-1]), RewardTape(rows.shape[:-1], cache)


def reward_net_predict(params: NetworkParams, rows) -> np.ndarray:
    return reward_net_tape(params, rows)[0]


def reward_net_forward(params: NetworkParams, row) -> float:
    row = np.asarray(row, dtype=np.float64)
    if row.ndim != 1:
        raise ConfigurationError(f"expected a single row, got shape {row.shape}")
    return float(reward_net_predict(params, row))


def reward_net_backward(params: NetworkParams, tape: RewardTape, dOut) -> NetworkParams:
    grad = np.asarray(dOut, dtype=np.float64).reshape(-1, 1)
    _, grads = _mlp_backward(params.layers("reward"), tape.cache, grad, False)
    arrays: dict[str, np.ndarray] = {}
    _store(arrays, "reward", grads)
    return type(params)(params.arch, arrays)


def action_scores(params: NetworkParams, state: StateMatrix) -> np.ndarray:
    """Per-actuator scores: Q-values or predicted rewards depending on the network."""
    X = build_input(state)
    if params.arch.kind == "d3qn":
        return q_forward(params, X)
    return reward_net_predict(params, X)


# -- optimizers --------------------------------------------------------------


class GradientDescent:
    def __init__(self, learning_rate: float):
        self.learning_rate = learning_rate

    def step(self, params: NetworkParams, grads: NetworkParams) -> NetworkParams:
        lr = self.learning_rate
        return type(params)(
            params.arch, {k: v - lr * grads.arrays[k] for k, v in params.arrays.items()}
        )


class Adam:
    def __init__(
        self,
        learning_rate: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}

    def step(self, params: NetworkParams, grads: NetworkParams) -> NetworkParams:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1**self.t
        c2 = 1.0 - b2**self.t
        new = {}
        for k, w in params.arrays.items():
            g = grads.arrays[k]
            m = self._m.get(k, np.zeros_like(w)) * b1 + (1.0 - b1) * g
            v = self._v.get(k, np.zeros_like(w)) * b2 + (1.0 - b2) * g * g
            self._m[k], self._v[k] = m, v
            new[k] = w - self.learning_rate * (m / c1) / (np.sqrt(v / c2) + self.eps)
        return type(params)(params.arch, new)


def sgd_update(params: NetworkParams, grads: NetworkParams, optimizer) -> NetworkParams:
    for k, g in grads.arrays.items():
        if not np.all(np.isfinite(g)):
            raise TrainingDivergenceError(f"non-finite gradient in {k}", last_good=params)
    updated = optimizer.step(params, grads)
    if not updated.is_finite():
        raise TrainingDivergenceError("update produced non-finite parameters", last_good=params)
    return updated


# -- checkpoints -------------------------------------------------------------


class ArrayRecord(BaseModel):
    shape: list[int]
    data: list[float]


class CheckpointFile(BaseModel):
    version: int
    kind: Literal["d3qn", "rees"]
    arch: NetArch
    arrays: dict[str, ArrayRecord]


def save_checkpoint(path: Path | str, params: NetworkParams) -> None:
    record = CheckpointFile(
        version=CHECKPOINT_VERSION,
        kind=params.arch.kind,
        arch=params.arch,
        arrays={
            k: ArrayRecord(shape=list(v.shape), data=v.reshape(-1).tolist())
            for k, v in params.arrays.items()
        },
    )
    Path(path).write_text(record.model_dump_json(), encoding="utf-8")


def load_checkpoint(path: Path | str) -> NetworkParams:
    text = Path(path).read_text(encoding="utf-8")
    try:
        record = CheckpointFile.model_validate(json.loads(text))
    except json.JSONDecodeError as e:
        raise DatasetFormatError(f"{path}: line {e.lineno} column {e.colno}: {e.msg}") from e
    except ValidationError as e:
        raise ConfigurationError(f"{path}: invalid checkpoint: {e}") from e
    if record.version != CHECKPOINT_VERSION:
        raise ConfigurationError(f"{path}: unsupported checkpoint version {record.version}")
    arrays = {
        k: np.array(r.data, dtype=np.float64).reshape(r.shape) for k, r in record.arrays.items()
    }
    params = _params_class(record.kind)(record.arch, arrays)
    check_shapes(params)
    return params
