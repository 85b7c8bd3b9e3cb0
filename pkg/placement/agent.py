"""Dueling double DQN training, the reward-estimation baseline and policy evaluation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Generic, Literal, Sequence, TypeVar

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from tqdm import tqdm

from ._utils import ConfigurationError, NoActionError, TrainingDivergenceError, logger
from .env import EpisodeConfig, PlacementEnv, StateMatrix, Transition
from .lp import SolveCache
from .model import ForceVector, Instance, rms_gap
from .net import (
    Adam,
    NetArch,
    NetworkParams,
    action_scores,
    build_input,
    init_params,
    q_backward,
    q_forward,
    q_forward_tape,
    reward_net_backward,
    reward_net_tape,
    sgd_update,
)
from .oracle import Solver, best_extension

T = TypeVar("T")

EvalMode = Literal["d3qn", "rees", "greedy-oracle", "random"]
EVAL_MODES: tuple[str, ...] = ("d3qn", "rees", "greedy-oracle", "random")


class TrainConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    epsilon: float = Field(default=0.1, ge=0, le=1)
    # linear anneal from epsilon_start down to epsilon; 0 steps keeps epsilon fixed
    epsilon_start: float = Field(default=1.0, ge=0, le=1)
    epsilon_decay_steps: int = Field(default=6_000, ge=0)
    gamma: float = Field(default=1.0, ge=0, le=1)
    replay_capacity: int = Field(default=20_000, gt=0)
    batch_size: int = Field(default=64, gt=0)
    target_sync_period: int = Field(default=500, gt=0)
    warmup: int = Field(default=500, ge=0)
    total_steps: int = Field(default=12_000, ge=0)
    budget: int = Field(default=6, ge=1)
    learning_rate: float = Field(default=1e-3, gt=0)
    encoder_widths: tuple[int, ...] = (64, 64)
    head_widths: tuple[int, ...] = (32,)
    reward_widths: tuple[int, ...] = (64, 32)
    mirror_instances: bool = True
    seed: int = 0

    @model_validator(mode="after")
    def _batch_fits(self) -> TrainConfig:
        if self.batch_size > self.replay_capacity:
            raise ValueError(
                f"batch_size {self.batch_size} exceeds replay_capacity {self.replay_capacity}"
            )
        return self

    def epsilon_at(self, step: int) -> float:
        if step >= self.epsilon_decay_steps:
            return self.epsilon
        frac = step / self.epsilon_decay_steps
        return self.epsilon_start + (self.epsilon - self.epsilon_start) * frac

    def arch(self, kind: str, n: int, m: int) -> NetArch:
        return NetArch(
            kind=kind,
            n=n,
            m=m,
            encoder_widths=self.encoder_widths,
            head_widths=self.head_widths,
            reward_widths=self.reward_widths,
        )


class ReplayBuffer(Generic[T]):
    """Fixed-capacity ring buffer with uniform sampling without replacement."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ConfigurationError(f"replay capacity must be positive, got {capacity}")
        self.capacity = capacity
        self._items: list[T] = []
        self._next = 0

    def __len__(self) -> int:
        return len(self._items)

    def add(self, item: T) -> None:
        if len(self._items) < self.capacity:
            self._items.append(item)
        else:
            self._items[self._next] = item
        self._next = (self._next + 1) % self.capacity

    def sample_indices(self, batch_size: int, rng: np.random.Generator) -> np.ndarray:
        if batch_size > len(self._items):
            raise ConfigurationError(
                f"cannot sample {batch_size} items from a buffer of {len(self._items)}"
            )
        return rng.choice(len(self._items), size=batch_size, replace=False)

    def sample(self, batch_size: int, rng: np.random.Generator) -> list[T]:
        return [self._items[i] for i in self.sample_indices(batch_size, rng)]


def masked_argmax(scores: np.ndarray, mask: np.ndarray) -> int:
    if mask.all():
        raise NoActionError("every position is already selected")
    scores = np.where(mask, -np.inf, scores)
    return int(np.argmax(scores))


def select_action(
    params: NetworkParams, state: StateMatrix, epsilon: float, rng: np.random.Generator
) -> int:
    """Epsilon-greedy over unmasked positions; greedy ties go to the lowest index."""
    available = state.available()
    if available.size == 0:
        raise NoActionError("every position is already selected")
    if rng.random() < epsilon:
        return int(rng.choice(available))
    return masked_argmax(action_scores(params, state), state.mask)


def double_q_targets(
    online: NetworkParams,
    target: NetworkParams,
    transitions: Sequence[Transition],
    gamma: float,
) -> np.ndarray:
    y = np.array([t.reward for t in transitions], dtype=np.float64)
    live = [i for i, t in enumerate(transitions) if not t.done]
    if not live or gamma == 0:
        return y
    X = np.stack([build_input(transitions[i].next_state) for i in live])
    masks = np.stack([transitions[i].next_state.mask for i in live])
    # online network picks the action, target network values it
    q_online = np.where(masks, -np.inf, q_forward(online, X))
    best = np.argmax(q_online, axis=1)
    q_target = q_forward(target, X)
    y[live] += gamma * q_target[np.arange(len(live)), best]
    return y


def double_q_target(
    online: NetworkParams, target: NetworkParams, transition: Transition, gamma: float
) -> float:
    return float(double_q_targets(online, target, [transition], gamma)[0])


# -- learners ----------------------------------------------------------------


class DQNLearner:
    def __init__(self, params: NetworkParams, config: TrainConfig):
        self.config = config
        self.params = params
        self.target = params.copy()
        self.last_good = params
        self.buffer: ReplayBuffer[Transition] = ReplayBuffer(config.replay_capacity)
        self.optimizer = Adam(config.learning_rate)

    def observe(self, transition: Transition) -> None:
        self.buffer.add(transition)

    def fit_batch(self, batch: Sequence[Transition]) -> float:
        y = double_q_targets(self.params, self.target, batch, self.config.gamma)
        X = np.stack([build_input(t.state) for t in batch])
        actions = np.array([t.action for t in batch])
        rows = np.arange(len(batch))
        q, tape = q_forward_tape(self.params, X)
        diff = q[rows, actions] - y
        loss = float(np.mean(diff * diff))
        if not np.isfinite(loss):
            return loss
        dQ = np.zeros_like(q)
        dQ[rows, actions] = 2.0 * diff / len(batch)
        grads = q_backward(self.params, tape, dQ)
        self.last_good = self.params
        self.params = sgd_update(self.params, grads, self.optimizer)
        return loss

    def learn(self, step: int, rng: np.random.Generator) -> float | None:
        loss = None
        if len(self.buffer) >= max(self.config.warmup, self.config.batch_size):
            loss = self.fit_batch(self.buffer.sample(self.config.batch_size, rng))
        if step % self.config.target_sync_period == 0:
            self.target = self.params.copy()
        return loss


class RewardLearner:
    """Regresses observed per-step rewards on the chosen actuator's input row."""

    def __init__(self, params: NetworkParams, config: TrainConfig):
        self.config = config
        self.params = params
        self.last_good = params
        self.buffer: ReplayBuffer[tuple[np.ndarray, float]] = ReplayBuffer(config.replay_capacity)
        self.optimizer = Adam(config.learning_rate)

    def observe(self, transition: Transition) -> None:
        row = build_input(transition.state)[transition.action]
        self.buffer.add((row, transition.reward))

    def fit_batch(self, batch: Sequence[tuple[np.ndarray, float]]) -> float:
        rows = np.stack([row for row, _ in batch])
        y = np.array([r for _, r in batch])
        pred, tape = reward_net_tape(self.params, rows)
        diff = pred - y
        loss = float(np.mean(diff * diff))
        if not np.isfinite(loss):
            return loss
        grads = reward_net_backward(self.params, tape, 2.0 * diff / len(batch))
        self.last_good = self.params
        self.params = sgd_update(self.params, grads, self.optimizer)
        return loss

    def learn(self, step: int, rng: np.random.Generator) -> float | None:
        if len(self.buffer) >= max(self.config.warmup, self.config.batch_size):
            return self.fit_batch(self.buffer.sample(self.config.batch_size, rng))
        return None


# -- training loop -----------------------------------------------------------


@dataclass(frozen=True)
class EpisodeRecord:
    episode: int
    steps: int
    terminal_mg: float
    terminal_rmsg: float
    mean_loss: float | None
    epsilon: float


@dataclass(frozen=True)
class EvalRecord:
    """Exploitation-only (epsilon = 0) means over one split, taken during training."""

    episode: int
    steps: int
    split: str
    mean_mg: float
    mean_rmsg: float


@dataclass
class TrainingLog:
    COLUMNS = ("episode", "steps", "terminal_mg", "terminal_rmsg", "mean_loss", "epsilon")
    EVAL_COLUMNS = ("episode", "steps", "split", "mean_mg", "mean_rmsg")

    records: list[EpisodeRecord] = field(default_factory=list)
    losses: list[float] = field(default_factory=list)
    evaluations: list[EvalRecord] = field(default_factory=list)

    def rows(self) -> list[list[object]]:
        return [
            [
                r.episode,
                r.steps,
                repr(r.terminal_mg),
                repr(r.terminal_rmsg),
                "" if r.mean_loss is None else repr(r.mean_loss),
                repr(r.epsilon),
            ]
            for r in self.records
        ]

    def eval_rows(self) -> list[list[object]]:
        return [
            [r.episode, r.steps, r.split, repr(r.mean_mg), repr(r.mean_rmsg)]
            for r in self.evaluations
        ]


def _streams(seed: int) -> dict[str, np.random.Generator]:
    names = ("init", "instances", "explore", "replay")
    children = np.random.SeedSequence(seed).spawn(len(names))
    return {name: np.random.default_rng(child) for name, child in zip(names, children)}


def _common_dims(instances: Sequence[Instance]) -> tuple[int, int]:
    if not instances:
        raise ConfigurationError("training set is empty")
    dims = {(inst.n, inst.m) for inst in instances}
    if len(dims) != 1:
        raise ConfigurationError(f"instances disagree on (n, m): {sorted(dims)}")
    return dims.pop()


def episode_pool(instances: Sequence[Instance], config: TrainConfig) -> list[Instance]:
    """Instances episodes are drawn from: the training set, plus psi-negated copies."""
    pool = list(instances)
    if config.mirror_instances:
        pool += [inst.negated() for inst in instances if inst.symmetric_bounds]
    return pool


def _track(
    kind: str,
    params: NetworkParams,
    splits: dict[str, Sequence[Instance]],
    episode_config: EpisodeConfig,
    solver: Solver,
    episode: int,
    step: int,
    log: TrainingLog,
) -> None:
    for split, insts in splits.items():
        if not insts:
            continue
        report = evaluate_policy(params, insts, episode_config, kind, solver)
        log.evaluations.append(EvalRecord(episode, step, split, report.mean_mg, report.mean_rmsg))
        logger.info(
            f"{kind} episode {episode} {split}: "
            f"mean MG {report.mean_mg:.4g}, mean RMSG {report.mean_rmsg:.4g}"
        )


def _train(
    kind: str,
    instances: Sequence[Instance],
    config: TrainConfig,
    solver: Solver | None,
    progress: bool,
    eval_instances: Sequence[Instance] = (),
    eval_every: int = 0,
) -> tuple[NetworkParams, TrainingLog]:
    n, m = _common_dims(instances)
    if config.budget > m:
        raise ConfigurationError(f"budget {config.budget} exceeds m={m}")
    if eval_every < 0:
        raise ConfigurationError(f"eval_every must be >= 0, got {eval_every}")
    if eval_instances and _common_dims(eval_instances) != (n, m):
        raise ConfigurationError(
            f"evaluation instances have (n, m) = {_common_dims(eval_instances)}, "
            f"training instances have {(n, m)}"
        )
    rngs = _streams(config.seed)
    params = init_params(config.arch(kind, n, m), rngs["init"])
    learner = DQNLearner(params, config) if kind == "d3qn" else RewardLearner(params, config)
    solver = solver or SolveCache()
    episode_config = EpisodeConfig.budget_mode(config.budget)
    pool = episode_pool(instances, config)
    splits = {"train": instances, "test": eval_instances}
    log = TrainingLog()

    step = 0
    episode = 0
    with tqdm(total=config.total_steps, desc=kind, disable=not progress, leave=False) as bar:
        while step < config.total_steps:
            inst = pool[int(rngs["instances"].integers(len(pool)))]
            env = PlacementEnv(inst, episode_config, solver)
            state = env.reset()
            epsilon = config.epsilon_at(step)
            losses: list[float] = []
            while not env.done and step < config.total_steps:
                action = select_action(learner.params, state, epsilon, rngs["explore"])
                transition = env.step(action)
                learner.observe(transition)
                step += 1
                bar.update(1)
                try:
                    loss = learner.learn(step, rngs["replay"])
                except TrainingDivergenceError as e:
                    e.log = log
                    raise
                if loss is not None:
                    if not np.isfinite(loss):
                        raise TrainingDivergenceError(
                            f"non-finite loss at step {step} (episode {episode + 1})",
                            last_good=learner.params,
                            log=log,
                        )
                    losses.append(loss)
                    log.losses.append(loss)
                state = transition.next_state
            if not env.done:
                break
            episode += 1
            delta = env.selection.solution.delta
            log.records.append(
                EpisodeRecord(
                    episode=episode,
                    steps=step,
                    terminal_mg=env.selection.d,
                    terminal_rmsg=rms_gap(delta),
                    mean_loss=float(np.mean(losses)) if losses else None,
                    epsilon=epsilon,
                )
            )
            if episode % 200 == 0:
                recent = log.records[-200:]
                logger.info(
                    f"{kind} episode {episode} step {step}: "
                    f"mean MG {np.mean([r.terminal_mg for r in recent]):.4g}"
                )
            if eval_every and episode % eval_every == 0:
                _track(kind, learner.params, splits, episode_config, solver, episode, step, log)
    return learner.params, log


def train_d3qn(
    instances: Sequence[Instance],
    config: TrainConfig,
    solver: Solver | None = None,
    progress: bool = False,
    eval_instances: Sequence[Instance] = (),
    eval_every: int = 0,
) -> tuple[NetworkParams, TrainingLog]:
    return _train("d3qn", instances, config, solver, progress, eval_instances, eval_every)


def train_rees(
    instances: Sequence[Instance],
    config: TrainConfig,
    solver: Solver | None = None,
    progress: bool = False,
    eval_instances: Sequence[Instance] = (),
    eval_every: int = 0,
) -> tuple[NetworkParams, TrainingLog]:
    return _train("rees", instances, config, solver, progress, eval_instances, eval_every)


# -- evaluation --------------------------------------------------------------

Policy = Callable[[PlacementEnv, StateMatrix], int]


def score_policy(scores: Callable[[PlacementEnv, StateMatrix], np.ndarray]) -> Policy:
    """Greedy policy over arbitrary per-actuator scores."""

    def choose(env: PlacementEnv, state: StateMatrix) -> int:
        return masked_argmax(np.asarray(scores(env, state), dtype=np.float64), state.mask)

    return choose


def greedy_oracle_policy(env: PlacementEnv, state: StateMatrix) -> int:
    return best_extension(env.inst, env.selection, env.solver).selected[-1]


def random_policy(rng: np.random.Generator) -> Policy:
    def choose(env: PlacementEnv, state: StateMatrix) -> int:
        return int(rng.choice(state.available()))

    return choose


def make_policy(
    mode: str, params: NetworkParams | None, rng: np.random.Generator | None = None
) -> Policy:
    if mode == "greedy-oracle":
        return greedy_oracle_policy
    if mode == "random":
        return random_policy(rng if rng is not None else np.random.default_rng(0))
    if mode not in ("d3qn", "rees"):
        raise ConfigurationError(f"unknown policy mode {mode!r}")
    if params is None or params.arch.kind != mode:
        got = None if params is None else params.arch.kind
        raise ConfigurationError(f"mode {mode!r} needs {mode} parameters, got {got}")
    return score_policy(lambda env, state: action_scores(params, state))


def run_episode(env: PlacementEnv, policy: Policy) -> list[Transition]:
    state = env.reset()
    transitions = []
    while not env.done:
        transition = env.step(policy(env, state))
        transitions.append(transition)
        state = transition.next_state
    return transitions


@dataclass(frozen=True)
class EvalRow:
    instance_id: int
    selected: tuple[int, ...]
    forces: ForceVector
    mg: float
    rmsg: float

    @property
    def count(self) -> int:
        return len(self.selected)


@dataclass(frozen=True)
class EvalReport:
    rows: list[EvalRow]

    @property
    def mean_mg(self) -> float:
        return float(np.mean([r.mg for r in self.rows]))

    @property
    def mean_rmsg(self) -> float:
        return float(np.mean([r.rmsg for r in self.rows]))

    @property
    def mean_count(self) -> float:
        return float(np.mean([r.count for r in self.rows]))

    def counts(self) -> list[int]:
        return [r.count for r in self.rows]


def evaluate_policy(
    params: NetworkParams | None,
    instances: Sequence[Instance],
    config: EpisodeConfig,
    mode: str,
    solver: Solver | None = None,
    seed: np.random.SeedSequence | int = 0,
) -> EvalReport:
    """Roll one exploitation-only episode per instance and record the outcome."""
    if params is not None and mode in ("d3qn", "rees"):
        for inst in instances:
            if (inst.n, inst.m) != (params.arch.n, params.arch.m):
                raise ConfigurationError(
                    f"network built for (n={params.arch.n}, m={params.arch.m}) "
                    f"but instance has (n={inst.n}, m={inst.m})"
                )
    policy = make_policy(mode, params, np.random.default_rng(seed))
    solver = solver or SolveCache()
    rows = []
    for i, inst in enumerate(instances):
        env = PlacementEnv(inst, config, solver)
        run_episode(env, policy)
        selection = env.selection
        rows.append(
            EvalRow(
                instance_id=i,
                selected=selection.selected,
                forces=selection.solution.forces,
                mg=selection.d,
                rmsg=rms_gap(selection.solution.delta),
            )
        )
    return EvalReport(rows)


@dataclass(frozen=True)
class CountSummary:
    minimum: float
    q1: float
    median: float
    q3: float
    maximum: float
    mean: float


def count_summary(counts: Sequence[int]) -> CountSummary:
    """Five-number summary (linear-interpolated quartiles) plus mean."""
    arr = np.asarray(counts, dtype=np.float64)
    lo, q1, med, q3, hi = np.percentile(arr, [0, 25, 50, 75, 100])
    return CountSummary(float(lo), float(q1), float(med), float(q3), float(hi), float(arr.mean()))
