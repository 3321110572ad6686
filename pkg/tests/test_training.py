"""Returns, REINFORCE updates, and the two training loops."""

import numpy as np
import pytest

import ggsfc.training as training
from ggsfc.environment import SfcRequest, generate_requests
from ggsfc.nn import NonFiniteGradientError
from ggsfc.oracle import label_dataset
from ggsfc.policy import (
    PolicyConfig,
    episode_gradients,
    init_policy_params,
    rollout,
)
from ggsfc.topology import Topology, VnfInstance, generate_pool, internet2_fixture
from ggsfc.training import (
    HistoryRow,
    HyperParams,
    compute_returns,
    greedy_failure_ratio,
    reinforce_update,
    save_history,
    train_rl,
    train_sl,
)


def tiny_topology():
    return Topology(
        num_nodes=4,
        edges=((0, 1, 2), (1, 2, 3), (2, 3, 1), (0, 3, 9)),
        instances=(
            VnfInstance(1, 0, 7),
            VnfInstance(1, 0, 3),
            VnfInstance(2, 1, 5),
        ),
        vnf_type_count=2,
    )


def tiny_cfg():
    return PolicyConfig(hidden_dim=8, vnf_type_count=2, t_prop=2)


# ---------------------------------------------------------------------------
# hyperparameters

@pytest.mark.parametrize("bad", [
    {"alpha_sl": 0.0},
    {"alpha_rl": -1e-5},
    {"gamma": 0.0},
    {"gamma": 1.5},
    {"epsilon": -0.1},
    {"epsilon": 1.01},
    {"lam": -1.0},
    {"episodes": -1},
])
def test_hyperparams_validation(bad):
    with pytest.raises(ValueError):
        HyperParams(**bad)


def test_hyperparams_reward_config_carries_lambda():
    assert HyperParams(lam=2.5).reward_config().lam == 2.5


# ---------------------------------------------------------------------------
# returns

def test_returns_hand_case():
    # G2 = 3, G1 = 2 + 0.5*3 = 3.5, G0 = 1 + 0.5*3.5 = 2.75
    assert compute_returns([1.0, 2.0, 3.0], 0.5).tolist() == [2.75, 3.5, 3.0]


def test_returns_gamma_one_is_suffix_sums():
    assert compute_returns([1.0, 2.0, 3.0], 1.0).tolist() == [6.0, 5.0, 3.0]


def test_returns_terminal_reward_decays_geometrically():
    g = compute_returns([0.0, 0.0, 0.0, 8.0], 0.5)
    assert g.tolist() == [1.0, 2.0, 4.0, 8.0]


def test_returns_of_failure_episode_are_zero():
    assert not compute_returns([0.0, 0.0, 0.0], 0.999).any()


def test_returns_empty():
    assert compute_returns([], 0.9).shape == (0,)


# ---------------------------------------------------------------------------
# reinforce_update

def successful_trace(params, cfg, t):
    rng = np.random.default_rng(0)
    req = SfcRequest(0, 3, (0,))
    for _ in range(50):
        trace = rollout(params, cfg, t, req, HyperParams().reward_config(),
                        mode="epsilon_greedy", rng=rng, epsilon=0.3)
        if trace.success:
            return trace
    raise AssertionError("random policy never succeeded on the tiny case")


def test_update_skips_failure_episodes():
    t = tiny_topology()
    cfg = tiny_cfg()
    params = init_policy_params(cfg, seed=0)
    rng = np.random.default_rng(1)
    req = SfcRequest(0, 3, (0, 1))
    for _ in range(200):
        trace = rollout(params, cfg, t, req, HyperParams().reward_config(),
                        mode="epsilon_greedy", rng=rng, epsilon=0.5)
        if not trace.success:
            break
    else:
        raise AssertionError("never saw a failure")
    assert reinforce_update(params, trace, HyperParams(), cfg) is params


def test_update_raises_weighted_log_likelihood():
    t = tiny_topology()
    cfg = tiny_cfg()
    params = init_policy_params(cfg, seed=2)
    trace = successful_trace(params, cfg, t)
    hp = HyperParams(alpha_rl=1e-9)  # small enough to stay first-order
    returns = compute_returns(trace.rewards, hp.gamma)
    actions = tuple(s.action for s in trace.steps)

    def weighted(p):
        log_probs, _ = episode_gradients(
            p, cfg, t, trace.request, actions, returns,
            max_steps=trace.max_steps, reward_cfg=hp.reward_config(),
        )
        return float(np.dot(returns, log_probs))

    before = weighted(params)
    updated = reinforce_update(params, trace, hp, cfg)
    assert updated is not params
    assert weighted(updated) > before


def test_update_rejects_non_finite_gradients(monkeypatch, caplog):
    t = tiny_topology()
    cfg = tiny_cfg()
    params = init_policy_params(cfg, seed=2)
    trace = successful_trace(params, cfg, t)

    def explode(*args, **kwargs):
        raise NonFiniteGradientError("nan in enc.W_z")

    monkeypatch.setattr(training, "sgd_update", explode)
    with caplog.at_level("WARNING", logger="ggsfc.training"):
        out = reinforce_update(params, trace, HyperParams(), cfg)
    assert out is params
    assert "non-finite" in caplog.text


# ---------------------------------------------------------------------------
# supervised loop

def fixture_sl_setup(n_requests=40, seed=5):
    t = internet2_fixture()
    rng = np.random.default_rng(seed)
    dataset = label_dataset(t, generate_requests(t, n_requests, (1, 2), rng))
    return t, dataset


def test_train_sl_rejects_empty_dataset():
    t, dataset = fixture_sl_setup(2)
    empty = type(dataset)(examples=(), dropped_infeasible=0, dropped_over_budget=0)
    with pytest.raises(ValueError, match="empty"):
        train_sl(init_policy_params(PolicyConfig(), seed=0), PolicyConfig(),
                 t, empty, HyperParams())


def test_train_sl_loss_decreases():
    t, dataset = fixture_sl_setup()
    cfg = PolicyConfig()
    params, history = train_sl(
        init_policy_params(cfg, seed=0), cfg, t, dataset,
        HyperParams(sl_epochs=3, seed=0),
    )
    assert len(history) == 3
    assert history[-1].loss < history[0].loss
    # no holdout: the accuracy columns stay empty
    assert all(np.isnan(r.success_rate) and np.isnan(r.mean_delay) for r in history)


def test_train_sl_holdout_and_early_stop():
    t, dataset = fixture_sl_setup()
    cfg = PolicyConfig()
    holdout = label_dataset(
        t, generate_requests(t, 10, (1, 2), np.random.default_rng(77)))
    # any failure ratio passes a threshold of 1.0, so epoch 1 stops the run
    params, history = train_sl(
        init_policy_params(cfg, seed=0), cfg, t, dataset,
        HyperParams(sl_epochs=30, seed=0), holdout=holdout,
        stop_failure_ratio=1.0,
    )
    assert len(history) == 1
    assert 0.0 <= history[0].success_rate <= 1.0


def test_train_sl_is_deterministic():
    t, dataset = fixture_sl_setup(12)
    cfg = PolicyConfig()
    runs = []
    for _ in range(2):
        params, history = train_sl(
            init_policy_params(cfg, seed=3), cfg, t, dataset,
            HyperParams(sl_epochs=1, seed=3),
        )
        runs.append((params, [r.loss for r in history]))
    assert runs[0][1] == runs[1][1]
    assert all(np.array_equal(runs[0][0][n], runs[1][0][n])
               for n in runs[0][0].names())


def test_greedy_failure_ratio_empty_pairs():
    fr, mean_delay = greedy_failure_ratio(
        init_policy_params(PolicyConfig(), seed=0), PolicyConfig(), [])
    assert np.isnan(fr) and np.isnan(mean_delay)


# ---------------------------------------------------------------------------
# reinforcement loop

def test_train_rl_history_covers_every_episode():
    t = tiny_topology()
    cfg = tiny_cfg()
    params, history = train_rl(
        init_policy_params(cfg, seed=0), t,
        HyperParams(episodes=30, seed=0), cfg,
        chain_len_range=(1, 2),
    )
    assert [r.index for r in history] == list(range(1, 31))
    assert all(0.0 <= r.success_rate <= 1.0 for r in history)
    # window of one episode: the first rate is all-or-nothing
    assert history[0].success_rate in (0.0, 1.0)


def test_train_rl_early_stop_waits_for_a_full_window():
    t = tiny_topology()
    cfg = tiny_cfg()
    params, history = train_rl(
        init_policy_params(cfg, seed=0), t,
        HyperParams(episodes=50, seed=0), cfg,
        chain_len_range=(1, 1), rolling_window=5, stop_success_rate=0.0,
    )
    assert len(history) == 5  # any rate passes 0.0 once the window fills


def test_train_rl_rejects_empty_topology_list():
    with pytest.raises(ValueError, match="no topologies"):
        train_rl(init_policy_params(tiny_cfg(), seed=0), [],
                 HyperParams(episodes=1), tiny_cfg())


def test_train_rl_zero_episodes_is_a_no_op():
    t = tiny_topology()
    cfg = tiny_cfg()
    params = init_policy_params(cfg, seed=0)
    out, history = train_rl(params, t, HyperParams(episodes=0), cfg)
    assert history == []
    assert all(np.array_equal(out[n], params[n]) for n in params.names())


def test_train_rl_draws_from_pool_variants():
    pool = generate_pool(internet2_fixture(), "cs1", pool_size=5, seed=9)
    cfg = PolicyConfig()
    seen = []

    def spy_requests(topo, rng):
        seen.append(topo)
        return generate_requests(topo, 1, (1, 1), rng)[0]

    train_rl(init_policy_params(cfg, seed=0), pool,
             HyperParams(episodes=25, seed=4), cfg, request_fn=spy_requests)
    assert len(seen) == 25
    assert len({id(t) for t in seen}) > 1  # more than one variant drawn


def test_train_rl_is_deterministic():
    t = tiny_topology()
    cfg = tiny_cfg()
    runs = []
    for _ in range(2):
        params, history = train_rl(
            init_policy_params(cfg, seed=1), t,
            HyperParams(episodes=40, seed=7), cfg,
            chain_len_range=(1, 2),
        )
        runs.append((params, [(r.success_rate, r.loss) for r in history]))
    assert runs[0][1] == runs[1][1]
    assert all(np.array_equal(runs[0][0][n], runs[1][0][n])
               for n in runs[0][0].names())


def test_train_rl_progress_callback_sees_every_row():
    t = tiny_topology()
    cfg = tiny_cfg()
    rows = []
    _, history = train_rl(
        init_policy_params(cfg, seed=0), t,
        HyperParams(episodes=10, seed=0), cfg,
        chain_len_range=(1, 1), progress=rows.append,
    )
    assert rows == history


# ---------------------------------------------------------------------------
# history files

def test_save_history_format(tmp_path):
    rows = [
        HistoryRow(index=1, success_rate=0.5, mean_delay=12.0, loss=3.25),
        HistoryRow(index=2, success_rate=0.875, mean_delay=10.5, loss=-41000.0),
    ]
    path = tmp_path / "curve.csv"
    save_history(rows, path, "episode")
    assert path.read_text() == (
        "episode,success_rate,mean_delay,loss\n"
        "1,0.5,12,3.25\n"
        "2,0.875,10.5,-41000\n"
    )
