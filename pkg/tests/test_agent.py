import numpy as np
import pytest
from pydantic import ValidationError

from placement._utils import ConfigurationError, NoActionError, TrainingDivergenceError
from placement.agent import (
    DQNLearner,
    ReplayBuffer,
    TrainConfig,
    count_summary,
    episode_pool,
    double_q_target,
    double_q_targets,
    evaluate_policy,
    make_policy,
    run_episode,
    score_policy,
    select_action,
    train_d3qn,
    train_rees,
)
from placement.env import EpisodeConfig, PlacementEnv, StateMatrix, Transition
from placement.instances import GenSpec, generate_dataset
from placement.lp import SolveCache, solve_minimax_gap
from placement.model import Instance, rms_gap
from placement.net import NetArch, NetworkParams, init_params
from placement.oracle import greedy_select


def toy_state(m: int, selected=()) -> StateMatrix:
    grid = np.zeros((m + 1, 2))
    grid[:m, 0] = np.arange(1, m + 1)
    grid[m, 0] = 1.0
    for e in selected:
        grid[e, 0] = 0.0
        grid[e, 1] = 1.0
    return StateMatrix(grid)


def linear_q_params(weights) -> NetworkParams:
    """One-unit dueling net: A(s, e) = a * relu(x_e) and V(s) = v for residual entry x_e."""
    m = len(weights)
    arch = NetArch(kind="d3qn", n=1, m=m, encoder_widths=(1,), head_widths=())
    arrays = {
        "encoder.0.W": np.array([[1.0, 0.0]]),
        "encoder.0.b": np.zeros(1),
        "advantage.0.W": np.array([[float(weights[0])]]),
        "advantage.0.b": np.zeros(1),
        "value.0.W": np.zeros((1, 1)),
        "value.0.b": np.array([float(weights[1])]),
    }
    return NetworkParams(arch, arrays)


def test_train_config_invariants():
    TrainConfig()
    with pytest.raises(ValidationError):
        TrainConfig(batch_size=10, replay_capacity=5)
    with pytest.raises(ValidationError):
        TrainConfig(epsilon=1.5)
    with pytest.raises(ValidationError):
        TrainConfig(gamma=-0.1)


def test_replay_buffer_ring_and_distinct_samples():
    buf: ReplayBuffer[int] = ReplayBuffer(5)
    for i in range(8):
        buf.add(i)
    assert len(buf) == 5
    rng = np.random.default_rng(0)
    sample = buf.sample(5, rng)
    assert sorted(sample) == [3, 4, 5, 6, 7]
    with pytest.raises(ConfigurationError):
        buf.sample(6, rng)


def test_replay_sampling_is_uniform():
    buf: ReplayBuffer[int] = ReplayBuffer(50)
    for i in range(50):
        buf.add(i)
    rng = np.random.default_rng(1)
    counts = np.zeros(50)
    draws = 100_000
    batch = 10
    for _ in range(draws // batch):
        counts[buf.sample_indices(batch, rng)] += 1
    p = 1 / 50
    sigma = np.sqrt(draws * p * (1 - p))
    assert np.all(np.abs(counts - draws * p) <= 5 * sigma)


def test_greedy_action_is_argmax_over_unmasked():
    params = linear_q_params([1.0, 0.0])
    state = toy_state(4)
    rng = np.random.default_rng(0)
    # advantage grows with the row entry, so the last row wins
    assert select_action(params, state, 0.0, rng) == 3
    assert select_action(params, toy_state(4, selected=(3,)), 0.0, rng) == 2


def test_greedy_ties_go_to_lowest_index():
    params = linear_q_params([0.0, 0.0])
    assert select_action(params, toy_state(4, selected=(0,)), 0.0, np.random.default_rng(0)) == 1


def test_random_actions_are_uniform_over_unmasked():
    params = linear_q_params([1.0, 0.0])
    state = toy_state(5, selected=(2,))
    rng = np.random.default_rng(2)
    draws = [select_action(params, state, 1.0, rng) for _ in range(10_000)]
    counts = np.bincount(draws, minlength=5)
    assert counts[2] == 0
    expected = 10_000 / 4
    chi2 = sum((counts[e] - expected) ** 2 / expected for e in (0, 1, 3, 4))
    # 99.9th percentile of chi-square with three degrees of freedom
    assert chi2 < 16.27


def test_masked_position_never_chosen():
    params = linear_q_params([1.0, 0.0])
    state = toy_state(3, selected=(2,))
    rng = np.random.default_rng(3)
    for eps in (0.0, 0.5, 1.0):
        assert all(select_action(params, state, eps, rng) != 2 for _ in range(3_000))


def test_no_action_when_everything_selected():
    params = linear_q_params([1.0, 0.0])
    with pytest.raises(NoActionError):
        select_action(params, toy_state(2, selected=(0, 1)), 0.1, np.random.default_rng(0))


def make_transition(reward, done, next_state) -> Transition:
    return Transition(toy_state(3), 0, reward, next_state, done)


def test_terminal_target_is_reward():
    params = linear_q_params([1.0, 0.5])
    t = make_transition(0.7, True, toy_state(3, selected=(0,)))
    assert double_q_target(params, params, t, 1.0) == 0.7


def test_zero_discount_target_is_reward():
    params = linear_q_params([1.0, 0.5])
    t = make_transition(0.3, False, toy_state(3, selected=(0,)))
    assert double_q_target(params, params, t, 0.0) == 0.3


def test_double_q_target_hand_computed():
    # next state rows carry 1, 2, 0 with row 2 masked
    next_state = toy_state(3, selected=(2,))
    online = linear_q_params([1.0, 0.0])
    target = linear_q_params([-1.0, 0.25])
    # online advantages (1, 2, 0) over unmasked rows pick action 1
    # target: A = (-1, -2, 0), mean -1, V = 0.25 -> Q = (0.25, -0.75, 1.25)
    t = make_transition(0.5, False, next_state)
    assert double_q_target(online, target, t, 0.9) == pytest.approx(0.5 + 0.9 * -0.75)
    batched = double_q_targets(online, target, [t, make_transition(0.2, True, next_state)], 0.9)
    np.testing.assert_allclose(batched, [0.5 + 0.9 * -0.75, 0.2])


def small_config(**overrides) -> TrainConfig:
    base = dict(
        total_steps=60,
        budget=2,
        replay_capacity=200,
        batch_size=8,
        warmup=10,
        target_sync_period=15,
        encoder_widths=(16, 16),
        head_widths=(8,),
        reward_widths=(16, 8),
        epsilon_decay_steps=0,
        seed=5,
    )
    base.update(overrides)
    return TrainConfig(**base)


def test_zero_steps_returns_initial_params(small_family):
    config = small_config(total_steps=0)
    params, log = train_d3qn(small_family, config)
    assert log.records == [] and log.losses == []
    again, _ = train_d3qn(small_family, config)
    assert params.equals(again)
    reward_params, reward_log = train_rees(small_family, config)
    assert reward_params.arch.kind == "rees" and reward_log.records == []


def test_training_is_deterministic(small_family):
    config = small_config()
    a, log_a = train_d3qn(small_family, config)
    b, log_b = train_d3qn(small_family, config)
    assert a.equals(b)
    assert log_a.rows() == log_b.rows()
    assert log_a.records[-1].steps == 60
    assert all(r.mean_loss is None or np.isfinite(r.mean_loss) for r in log_a.records)
    assert len(log_a.records) == 30


def test_training_rejects_bad_inputs(small_family, desk_family):
    with pytest.raises(ConfigurationError):
        train_d3qn([], small_config())
    with pytest.raises(ConfigurationError):
        train_d3qn(small_family + desk_family[:1], small_config())
    with pytest.raises(ConfigurationError):
        train_d3qn(small_family, small_config(budget=6))


def test_target_network_changes_only_at_sync(small_family):
    config = small_config(target_sync_period=7, warmup=8)
    rng = np.random.default_rng(0)
    params = init_params(config.arch("d3qn", 12, 5), rng)
    learner = DQNLearner(params, config)
    env = PlacementEnv(small_family[0], EpisodeConfig.budget_mode(2))
    step = 0
    for _ in range(12):
        state = env.reset()
        while not env.done:
            t = env.step(select_action(learner.params, state, 0.5, rng))
            learner.observe(t)
            step += 1
            before = learner.target
            learner.learn(step, rng)
            if step % 7 == 0:
                assert learner.target.equals(learner.params)
                assert learner.target is not learner.params
            else:
                assert learner.target is before
            state = t.next_state


def test_fixed_batch_loss_decreases(small_family):
    config = small_config(learning_rate=1e-4, gamma=0.0)
    rng = np.random.default_rng(4)
    learner = DQNLearner(init_params(config.arch("d3qn", 12, 5), rng), config)
    env = PlacementEnv(small_family[1], EpisodeConfig.budget_mode(2))
    batch = []
    while len(batch) < 16:
        state = env.reset()
        while not env.done:
            t = env.step(select_action(learner.params, state, 1.0, rng))
            batch.append(t)
            state = t.next_state
    losses = [learner.fit_batch(batch) for _ in range(100)]
    assert losses[-1] < losses[0]


def test_epsilon_anneal():
    config = TrainConfig(epsilon_start=1.0, epsilon=0.1, epsilon_decay_steps=100)
    assert config.epsilon_at(0) == 1.0
    assert config.epsilon_at(50) == pytest.approx(0.55)
    assert config.epsilon_at(100) == 0.1
    assert config.epsilon_at(10_000) == 0.1
    fixed = TrainConfig(epsilon=0.3, epsilon_decay_steps=0)
    assert {fixed.epsilon_at(s) for s in (0, 1, 500)} == {0.3}


def test_log_follows_epsilon_anneal(small_family):
    config = small_config(epsilon_start=1.0, epsilon=0.1, epsilon_decay_steps=40)
    _, log = train_d3qn(small_family, config)
    eps = [r.epsilon for r in log.records]
    assert eps[0] == 1.0 and eps[-1] == 0.1
    assert all(a >= b for a, b in zip(eps, eps[1:]))


def test_episode_pool_adds_negated_copies(small_family):
    pool = episode_pool(small_family, small_config())
    assert len(pool) == 2 * len(small_family)
    for inst, mirror in zip(small_family, pool[len(small_family):]):
        np.testing.assert_array_equal(mirror.psi, -inst.psi)
        for S in [(), (1,), (0, 3)]:
            assert solve_minimax_gap(mirror, S).d == pytest.approx(
                solve_minimax_gap(inst, S).d, abs=1e-9
            )
    assert episode_pool(small_family, small_config(mirror_instances=False)) == list(small_family)

    lopsided = Instance(psi=[1.0, 2.0], U=np.eye(2), f_lower=[-1.0, -1.0], f_upper=[2.0, 1.0])
    assert episode_pool([lopsided], small_config()) == [lopsided]


def test_training_tracks_both_splits(small_family):
    train_set, held_out = small_family[:4], small_family[4:]
    config = small_config()
    params, log = train_d3qn(small_family[:4], config, eval_instances=held_out, eval_every=10)
    assert [(r.episode, r.split) for r in log.evaluations] == [
        (10, "train"), (10, "test"), (20, "train"), (20, "test"), (30, "train"), (30, "test"),
    ]
    assert [r.steps for r in log.evaluations[::2]] == [20, 40, 60]
    final = evaluate_policy(params, held_out, EpisodeConfig.budget_mode(2), "d3qn")
    assert log.evaluations[-1].mean_mg == final.mean_mg
    assert log.evaluations[-1].mean_rmsg == final.mean_rmsg
    assert log.eval_rows()[0][:3] == [10, 20, "train"]

    # evaluation draws no random numbers, so training itself is unchanged
    untracked, plain = train_d3qn(train_set, config)
    assert params.equals(untracked) and plain.evaluations == []
    assert plain.rows() == log.rows()


def test_tracking_rejects_bad_options(small_family, desk_family):
    with pytest.raises(ConfigurationError):
        train_rees(small_family, small_config(), eval_every=-1)
    with pytest.raises(ConfigurationError):
        train_rees(small_family, small_config(), eval_instances=desk_family, eval_every=5)


def test_divergence_carries_last_good(small_family):
    config = small_config(learning_rate=1e300, warmup=8, total_steps=40)
    with pytest.raises(TrainingDivergenceError) as info:
        train_d3qn(small_family, config)
    assert info.value.last_good is not None and info.value.last_good.is_finite()
    assert info.value.log is not None


def test_perfect_reward_scores_reproduce_greedy(small_family):
    solver = SolveCache()

    def true_scores(env, state):
        # ranking by the gap after the step matches ranking by the true reward
        return np.array(
            [
                -env.selection.with_added(env.inst, e, solver).d if not state.mask[e] else 0.0
                for e in range(env.inst.m)
            ]
        )

    for inst in small_family:
        env = PlacementEnv(inst, EpisodeConfig.budget_mode(3), solver)
        run_episode(env, score_policy(true_scores))
        assert env.selection.selected == greedy_select(inst, 3).selected


def test_greedy_oracle_mode_matches_greedy_select(small_family):
    report = evaluate_policy(None, small_family, EpisodeConfig.budget_mode(3), "greedy-oracle")
    for row, inst in zip(report.rows, small_family):
        greedy = greedy_select(inst, 3)
        assert row.selected == greedy.selected
        assert row.mg == greedy.d
        assert row.rmsg == rms_gap(greedy.solution.delta)
        assert row.count == 3


def test_full_budget_gives_same_mg_for_every_mode(small_family):
    rng = np.random.default_rng(0)
    q = init_params(NetArch(kind="d3qn", n=12, m=5), rng)
    r = init_params(NetArch(kind="rees", n=12, m=5), rng)
    config = EpisodeConfig.budget_mode(5)
    full = [solve_minimax_gap(inst, range(5)).d for inst in small_family]
    for mode, params in (("d3qn", q), ("rees", r), ("greedy-oracle", None), ("random", None)):
        report = evaluate_policy(params, small_family, config, mode)
        np.testing.assert_array_equal([row.mg for row in report.rows], full)


def test_evaluation_is_deterministic(small_family):
    q = init_params(NetArch(kind="d3qn", n=12, m=5), np.random.default_rng(9))
    config = EpisodeConfig.spec_limit(0.1)
    a = evaluate_policy(q, small_family, config, "d3qn")
    b = evaluate_policy(q, small_family, config, "d3qn")
    assert [r.selected for r in a.rows] == [r.selected for r in b.rows]
    c = evaluate_policy(None, small_family, config, "random", seed=3)
    d = evaluate_policy(None, small_family, config, "random", seed=3)
    assert [r.selected for r in c.rows] == [r.selected for r in d.rows]


def test_spec_limit_counts_nonincreasing(small_family):
    counts = []
    for limit in (0.025, 0.03, 0.035, 0.04, 0.045, 0.05):
        report = evaluate_policy(
            None, small_family, EpisodeConfig.spec_limit(limit), "greedy-oracle"
        )
        counts.append(report.counts())
    for lower, higher in zip(counts, counts[1:]):
        assert all(a >= b for a, b in zip(lower, higher))


def test_spec_limit_count_zero_when_met_at_reset():
    inst = Instance(psi=[0.001, -0.001], U=[[1.0], [0.5]], f_lower=[-1], f_upper=[1])
    report = evaluate_policy(None, [inst], EpisodeConfig.spec_limit(0.01), "greedy-oracle")
    assert report.rows[0].count == 0
    report = evaluate_policy(None, [inst], EpisodeConfig.spec_limit(0.0001), "greedy-oracle")
    assert report.rows[0].count == 1


def test_policy_mode_needs_matching_params():
    q = init_params(NetArch(kind="d3qn", n=2, m=2), np.random.default_rng(0))
    with pytest.raises(ConfigurationError):
        make_policy("rees", q)
    with pytest.raises(ConfigurationError):
        make_policy("d3qn", None)
    with pytest.raises(ConfigurationError):
        make_policy("ppo", q)


def test_eval_rejects_mismatched_dimensions(small_family):
    q = init_params(NetArch(kind="d3qn", n=40, m=12), np.random.default_rng(0))
    with pytest.raises(ConfigurationError):
        evaluate_policy(q, small_family, EpisodeConfig.budget_mode(2), "d3qn")


def test_count_summary_matches_sort_oracle():
    counts = [5, 1, 4, 4, 2, 7, 3]
    s = count_summary(counts)
    ordered = sorted(counts)

    def quantile(q):
        pos = q * (len(ordered) - 1)
        lo = int(np.floor(pos))
        hi = min(lo + 1, len(ordered) - 1)
        return ordered[lo] + (ordered[hi] - ordered[lo]) * (pos - lo)

    assert (s.minimum, s.maximum) == (1, 7)
    assert s.q1 == pytest.approx(quantile(0.25))
    assert s.median == pytest.approx(quantile(0.5))
    assert s.q3 == pytest.approx(quantile(0.75))
    assert s.mean == pytest.approx(26 / 7)


def cancelling_family() -> list[Instance]:
    rng = np.random.default_rng(17)
    psi = rng.standard_normal(6)
    U = 0.1 * rng.standard_normal((6, 4))
    U[:, 2] = -psi
    bound = np.full(4, 2.0)
    return [Instance(psi=psi, U=U, f_lower=-bound, f_upper=bound)]


@pytest.mark.slow
@pytest.mark.parametrize("train", [train_d3qn, train_rees])
def test_agent_finds_cancelling_actuator(train):
    family = cancelling_family()
    config = small_config(
        total_steps=200, budget=1, warmup=16, batch_size=16, epsilon=0.5, learning_rate=1e-2
    )
    params, _ = train(family, config)
    assert greedy_select(family[0], 1).selected == (2,)
    report = evaluate_policy(
        params, family * 20, EpisodeConfig.budget_mode(1), params.arch.kind
    )
    hits = sum(row.selected == (2,) for row in report.rows)
    assert hits >= 19


@pytest.mark.slow
def test_desk_scale_learning(record_property):
    spec = GenSpec()
    train_set = generate_dataset(spec, 20, seed=1)
    test_set = generate_dataset(spec, 10, seed=2)
    config = TrainConfig(seed=3)
    solver = SolveCache()
    q, _ = train_d3qn(train_set, config, solver)
    r, _ = train_rees(train_set, config, solver)
    episode = EpisodeConfig.budget_mode(config.budget)

    def mean_mg(params, mode):
        return evaluate_policy(params, test_set, episode, mode, solver).mean_mg

    agent = mean_mg(q, "d3qn")
    rees = mean_mg(r, "rees")
    greedy = mean_mg(None, "greedy-oracle")
    random = mean_mg(None, "random")
    for name, value in [("d3qn", agent), ("rees", rees), ("greedy", greedy), ("random", random)]:
        record_property(f"mean_mg_{name}", value)
    assert agent <= 1.05 * greedy
    assert agent <= 0.6 * random
    assert agent <= rees + 0.02 * random
