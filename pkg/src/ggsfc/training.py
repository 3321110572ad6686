"""Supervised pre-training on solver labels and REINFORCE fine-tuning.

SL is teacher-forced cross-entropy down the label path, one example per SGD
step, epochs shuffled.  RL is plain per-episode REINFORCE: rollout with
epsilon-greedy exploration, discounted returns, one ascending step along
sum_t G_t * grad log pi(a_t | s_t).  No baseline, no batching, no reward
normalization; non-finite gradients reject the update and are logged.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .environment import (
    DEFAULT_CHAIN_LEN_RANGE,
    EpisodeTrace,
    RewardConfig,
    SfcRequest,
    generate_requests,
)
from .nn import GradSet, NonFiniteGradientError, ParamSet, sgd_update
from .oracle import LabeledDataset
from .policy import PolicyConfig, episode_gradients, rollout
from .topology import Topology, TopologyPool

logger = logging.getLogger(__name__)

DEFAULT_ROLLING_WINDOW = 200


@dataclass(frozen=True)
class HyperParams:
    alpha_sl: float = 0.001
    alpha_rl: float = 0.00001
    gamma: float = 0.999
    epsilon: float = 0.01
    lam: float = 0.0
    episodes: int = 5000
    sl_epochs: int = 30
    seed: int = 0

    def __post_init__(self) -> None:
        if self.alpha_sl <= 0 or self.alpha_rl <= 0:
            raise ValueError("learning rates must be > 0")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"gamma must be in (0, 1], got {self.gamma}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must be in [0, 1], got {self.epsilon}")
        if self.lam < 0:
            raise ValueError(f"lam must be >= 0, got {self.lam}")
        if self.episodes < 0 or self.sl_epochs < 0:
            raise ValueError("episodes and sl_epochs must be >= 0")

    def reward_config(self) -> RewardConfig:
        return RewardConfig(lam=self.lam)


@dataclass(frozen=True)
class HistoryRow:
    index: int
    success_rate: float
    mean_delay: float
    loss: float


def save_history(rows: Sequence[HistoryRow], path: str | Path, index_name: str) -> None:
    """CSV of the training curve; index_name is 'epoch' (SL) or 'episode' (RL)."""
    lines = [f"{index_name},success_rate,mean_delay,loss"]
    for r in rows:
        lines.append(f"{r.index},{r.success_rate:.6g},{r.mean_delay:.6g},{r.loss:.6g}")
    Path(path).write_text("\n".join(lines) + "\n")


def compute_returns(rewards: Sequence[float], gamma: float) -> np.ndarray:
    """Discounted returns G_t = r_t + gamma * G_{t+1}, G after the end = 0."""
    out = np.zeros(len(rewards))
    acc = 0.0
    for i in range(len(rewards) - 1, -1, -1):
        acc = rewards[i] + gamma * acc
        out[i] = acc
    return out


def reinforce_update(
    params: ParamSet,
    trace: EpisodeTrace,
    hp: HyperParams,
    cfg: PolicyConfig,
) -> ParamSet:
    """One policy-gradient step from a recorded on-policy episode.

    Failure episodes (all rewards zero) change nothing and skip the replay
    entirely.  A non-finite gradient rejects the update and logs a warning.
    """
    returns = compute_returns(trace.rewards, hp.gamma)
    if not returns.any():
        return params
    actions = tuple(s.action for s in trace.steps)
    log_probs, grads = episode_gradients(
        params, cfg, trace.topology, trace.request, actions, returns,
        max_steps=trace.max_steps, reward_cfg=hp.reward_config(),
    )
    recorded = [s.log_prob for s in trace.steps]
    if log_probs != recorded:
        raise AssertionError("replayed log-probs differ from the recorded rollout")
    try:
        return sgd_update(params, grads, hp.alpha_rl, direction="ascend")
    except NonFiniteGradientError:
        logger.warning(
            "skipping non-finite policy-gradient update (request %s->%s)",
            trace.request.source, trace.request.destination,
        )
        return params


# ---------------------------------------------------------------------------
# supervised learning

def _holdout_pairs(
    holdout: LabeledDataset | Sequence[tuple[int, SfcRequest]] | None,
    topo_list: list[Topology],
) -> list[tuple[Topology, SfcRequest]]:
    if holdout is None:
        return []
    if isinstance(holdout, LabeledDataset):
        return [(topo_list[ex.topology_id], ex.request) for ex in holdout.examples]
    return [(topo_list[tid], req) for tid, req in holdout]


def greedy_failure_ratio(
    params: ParamSet,
    cfg: PolicyConfig,
    pairs: Sequence[tuple[Topology, SfcRequest]],
) -> tuple[float, float]:
    """(failure ratio, mean success delay) of greedy rollouts over the pairs."""
    if not pairs:
        return float("nan"), float("nan")
    failures = 0
    delays = []
    for t, req in pairs:
        trace = rollout(params, cfg, t, req, mode="greedy")
        if trace.success:
            delays.append(trace.total_delay)
        else:
            failures += 1
    mean_delay = float(np.mean(delays)) if delays else float("nan")
    return failures / len(pairs), mean_delay


def train_sl(
    params: ParamSet,
    cfg: PolicyConfig,
    topologies: Topology | Sequence[Topology],
    dataset: LabeledDataset,
    hp: HyperParams,
    holdout: LabeledDataset | Sequence[tuple[int, SfcRequest]] | None = None,
    stop_failure_ratio: float | None = None,
    progress: Callable[[HistoryRow], None] | None = None,
) -> tuple[ParamSet, list[HistoryRow]]:
    """Teacher-forced cross-entropy over the labeled dataset.

    Per epoch: shuffle, one SGD descent step per example on
    loss = -sum_t log pi(label action_t).  History rows carry the epoch mean
    loss and the greedy failure ratio on the holdout (nan without one).
    stop_failure_ratio ends training early once the holdout is good enough.
    """
    if not dataset.examples:
        raise ValueError("dataset is empty")
    topo_list = [topologies] if isinstance(topologies, Topology) else list(topologies)
    pairs = _holdout_pairs(holdout, topo_list)
    rng = np.random.default_rng(hp.seed)
    history: list[HistoryRow] = []

    for epoch in range(1, hp.sl_epochs + 1):
        order = rng.permutation(len(dataset.examples))
        losses = np.empty(len(order))
        for j, idx in enumerate(order):
            ex = dataset.examples[idx]
            t = topo_list[ex.topology_id]
            # coefficients of -1 make episode_gradients produce the loss
            # gradient directly
            log_probs, grads = episode_gradients(
                params, cfg, t, ex.request, ex.actions,
                -np.ones(len(ex.actions)), max_steps=len(ex.actions),
            )
            losses[j] = -sum(log_probs)
            try:
                params = sgd_update(params, grads, hp.alpha_sl, direction="descend")
            except NonFiniteGradientError:
                logger.warning("skipping non-finite SL update (example %d)", idx)
        fr, mean_delay = greedy_failure_ratio(params, cfg, pairs)
        row = HistoryRow(
            index=epoch,
            success_rate=1.0 - fr if pairs else float("nan"),
            mean_delay=mean_delay,
            loss=float(losses.mean()),
        )
        history.append(row)
        if progress is not None:
            progress(row)
        if stop_failure_ratio is not None and pairs and fr <= stop_failure_ratio:
            break
    return params, history


# ---------------------------------------------------------------------------
# reinforcement learning

def train_rl(
    params: ParamSet,
    topologies: Topology | TopologyPool | Sequence[Topology],
    hp: HyperParams,
    cfg: PolicyConfig,
    request_fn: Callable[[Topology, np.random.Generator], SfcRequest] | None = None,
    chain_len_range: tuple[int, int] = DEFAULT_CHAIN_LEN_RANGE,
    rolling_window: int = DEFAULT_ROLLING_WINDOW,
    stop_success_rate: float | None = None,
    progress: Callable[[HistoryRow], None] | None = None,
) -> tuple[ParamSet, list[HistoryRow]]:
    """REINFORCE over random episodes.

    Each episode draws a topology uniformly (from the pool's variants, or
    the single given topology), draws a fresh request on it, rolls out with
    epsilon-greedy exploration, and applies one return-weighted update.
    History rows carry the rolling success rate and rolling mean success
    delay over the trailing window, plus the episode's surrogate loss
    -sum_t G_t log pi(a_t).  stop_success_rate ends training early once the
    rolling window is full and good enough.
    """
    if isinstance(topologies, Topology):
        topos: Sequence[Topology] = [topologies]
    elif isinstance(topologies, TopologyPool):
        topos = topologies.variants
    else:
        topos = list(topologies)
    if not topos:
        raise ValueError("no topologies to train on")

    rng = np.random.default_rng(hp.seed)
    reward_cfg = hp.reward_config()
    recent_success: deque[bool] = deque(maxlen=rolling_window)
    recent_delays: deque[int] = deque(maxlen=rolling_window)
    history: list[HistoryRow] = []

    for episode in range(1, hp.episodes + 1):
        t = topos[int(rng.integers(len(topos)))]
        req = request_fn(t, rng) if request_fn else generate_requests(t, 1, chain_len_range, rng)[0]
        trace = rollout(
            params, cfg, t, req, reward_cfg,
            mode="epsilon_greedy", rng=rng, epsilon=hp.epsilon,
        )
        returns = compute_returns(trace.rewards, hp.gamma)
        loss = -float(np.dot(returns, [s.log_prob for s in trace.steps]))
        params = reinforce_update(params, trace, hp, cfg)

        recent_success.append(trace.success)
        if trace.success:
            recent_delays.append(trace.total_delay)
        rate = sum(recent_success) / len(recent_success)
        mean_delay = float(np.mean(recent_delays)) if recent_delays else float("nan")
        row = HistoryRow(index=episode, success_rate=rate, mean_delay=mean_delay, loss=loss)
        history.append(row)
        if progress is not None:
            progress(row)
        if (
            stop_success_rate is not None
            and len(recent_success) == rolling_window
            and rate >= stop_success_rate
        ):
            break
    return params, history
