"""Graph-encoder + recurrent-decoder policy for SFC path generation.

The encoder is a gated graph network: node annotations (VNF availability
bits, source/destination flags, a hosts-pending-type flag, zero-padded to
the hidden width) are propagated T_prop rounds, each round aggregating
neighbor states through the adjacency matrix and updating through one
shared GRU cell.  Node count is a runtime quantity, so one parameter set
runs on any topology.

The decoder is a GRU fed, per step, with the remaining chain as a
multi-hot, the pending type as a one-hot, and the current node's encoder
embedding.  Each candidate node u is scored additively,
logit(u) = v . tanh(h_u W_emb + d W_hid), masked to the current neighbors,
and softmaxed; a sigmoid head over the same joint features decides whether
to process the pending VNF at u (forced to exactly 0 where invalid).  The
encoder re-runs whenever chain progress changes, because the
hosts-pending-type annotation depends on it.

All forward passes cache enough to run exact analytic backprop over a whole
episode (sum of coefficient-weighted action log-probs), which serves both
the supervised cross-entropy loss and the policy-gradient update.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import nn
from .environment import (
    Action,
    EnvState,
    EpisodeTrace,
    RewardConfig,
    SfcRequest,
    TraceStep,
    reset,
    step as env_step,
    valid_actions,
)
from .nn import GradSet, ParamSet
from .topology import Topology, adjacency_matrix

SCORER_VARIANT = "additive-tanh"
ROLLOUT_MODES = ("greedy", "sample", "epsilon_greedy")


@dataclass(frozen=True)
class PolicyConfig:
    """Architecture knobs; annotation width K+3 must fit the hidden width."""

    hidden_dim: int = 32
    vnf_type_count: int = 5
    t_prop: int = 5

    def __post_init__(self) -> None:
        if self.hidden_dim < 1 or self.t_prop < 0 or self.vnf_type_count < 1:
            raise ValueError("hidden_dim, vnf_type_count must be >= 1 and t_prop >= 0")
        if self.feature_width > self.hidden_dim:
            raise ValueError(
                f"annotation width {self.feature_width} (K+3) exceeds "
                f"hidden_dim {self.hidden_dim}"
            )

    @property
    def feature_width(self) -> int:
        return self.vnf_type_count + 3

    @property
    def decoder_input_width(self) -> int:
        return 2 * self.vnf_type_count + self.hidden_dim


def init_policy_params(cfg: PolicyConfig, seed: int = 0) -> ParamSet:
    """Fresh parameters: uniform +-1/sqrt(fan-in) weights, zero biases."""
    rng = np.random.default_rng(seed)
    h = cfg.hidden_dim
    tensors: dict[str, np.ndarray] = {}
    tensors.update(nn.init_gru_params(h, h, rng, prefix="enc."))
    tensors.update(nn.init_gru_params(cfg.decoder_input_width, h, rng, prefix="dec."))
    tensors["score.W_emb"] = nn.uniform_init((h, h), rng)
    tensors["score.W_hid"] = nn.uniform_init((h, h), rng)
    tensors["score.v"] = nn.uniform_init((h,), rng)
    tensors["proc.w"] = nn.uniform_init((h,), rng)
    tensors["proc.b"] = np.zeros(1)
    return ParamSet(tensors)


# ---------------------------------------------------------------------------
# encoder

def annotate(t: Topology, req: SfcRequest, chain_index: int, cfg: PolicyConfig) -> np.ndarray:
    """Initial node states: [availability bits | is-src | is-dst | hosts-pending | 0-pad]."""
    if t.vnf_type_count != cfg.vnf_type_count:
        raise ValueError(
            f"topology declares {t.vnf_type_count} VNF types, policy expects "
            f"{cfg.vnf_type_count}"
        )
    n = t.num_nodes
    h0 = np.zeros((n, cfg.hidden_dim))
    for inst in t.instances:
        h0[inst.node, inst.vnf_type] = 1.0
    k = cfg.vnf_type_count
    h0[req.source, k] = 1.0
    h0[req.destination, k + 1] = 1.0
    if chain_index < len(req.chain):
        pending = req.chain[chain_index]
        for inst in t.instances:
            if inst.vnf_type == pending:
                h0[inst.node, k + 2] = 1.0
    return h0


def encode(
    annotations: np.ndarray,
    a: np.ndarray,
    t_prop: int,
    params: ParamSet,
) -> tuple[np.ndarray, list]:
    """T_prop propagation rounds; returns final node embeddings and caches."""
    n = annotations.shape[0]
    if a.shape != (n, n):
        raise ValueError(f"adjacency shape {a.shape} does not match {n} annotations")
    h = annotations
    caches = []
    for _ in range(t_prop):
        msg = a @ h
        h_new, gru_cache = nn.gru_cell(msg, h, params, prefix="enc.")
        caches.append((a, gru_cache))
        h = h_new
    return h, caches


def encode_backward(
    grad_h: np.ndarray, caches: list
) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    """Backprop through the propagation rounds; returns (grad_annotations, param grads)."""
    grads: dict[str, np.ndarray] = {}
    dh = grad_h
    for a, gru_cache in reversed(caches):
        dmsg, dh_prev, g = nn.gru_cell_backward(dh, gru_cache)
        for name, value in g.items():
            grads[name] = grads.get(name, 0.0) + value
        dh = a.T @ dmsg + dh_prev
    return dh, grads


# ---------------------------------------------------------------------------
# decoder

@dataclass(frozen=True)
class DecoderContext:
    """Recurrent hidden state plus the decoder's three per-step inputs."""

    hidden: np.ndarray          # (H,)
    v_all: np.ndarray           # (K,) multi-hot of the remaining chain
    v_now: np.ndarray           # (K,) one-hot of the pending type
    node_embedding: np.ndarray  # (H,) encoder row of the current node


@dataclass(frozen=True)
class ActionDistribution:
    """Per-node move distribution and per-node process probabilities."""

    node_probs: np.ndarray
    process_prob: np.ndarray
    move_mask: np.ndarray
    process_mask: np.ndarray
    process_logits: np.ndarray  # kept for numerically stable log-probs

    def action_prob(self, a: Action) -> float:
        node_p = self.node_probs[a.next_node]
        if not self.process_mask[a.next_node]:
            return float(node_p) if not a.process else 0.0
        proc_p = self.process_prob[a.next_node]
        return float(node_p * (proc_p if a.process else 1.0 - proc_p))


def _log_sigmoid(x: float) -> float:
    if x >= 0:
        return -np.log1p(np.exp(-x))
    return x - np.log1p(np.exp(x))


def action_log_prob(dist: ActionDistribution, a: Action) -> float:
    """log pi(a) = log P(node) + log P(process decision at that node)."""
    if not dist.move_mask[a.next_node]:
        raise ValueError(f"action moves to masked node {a.next_node}")
    logp = float(np.log(dist.node_probs[a.next_node]))
    if dist.process_mask[a.next_node]:
        x = float(dist.process_logits[a.next_node])
        logp += _log_sigmoid(x) if a.process else _log_sigmoid(-x)
    elif a.process:
        raise ValueError(f"processing at node {a.next_node} is masked (probability 0)")
    return logp


def decode_step(
    enc_h: np.ndarray,
    ctx: DecoderContext,
    move_mask: np.ndarray,
    process_mask: np.ndarray,
    params: ParamSet,
) -> tuple[ActionDistribution, DecoderContext, tuple]:
    """One decoder step: advance the GRU, score nodes, mask, normalize.

    Returns the action distribution, the context with the advanced hidden
    state, and a cache for the backward pass.
    """
    x = np.concatenate([ctx.v_all, ctx.v_now, ctx.node_embedding])
    hidden, gru_cache = nn.gru_cell(x, ctx.hidden, params, prefix="dec.")
    s_pre = enc_h @ params["score.W_emb"] + hidden @ params["score.W_hid"]
    s = np.tanh(s_pre)
    node_logits = s @ params["score.v"]
    node_probs = nn.masked_softmax(node_logits, move_mask)
    process_logits = s @ params["proc.w"] + params["proc.b"][0]
    process_prob = np.where(process_mask, nn.sigmoid(process_logits), 0.0)
    dist = ActionDistribution(
        node_probs=node_probs,
        process_prob=process_prob,
        move_mask=move_mask.copy(),
        process_mask=process_mask.copy(),
        process_logits=process_logits,
    )
    cache = (enc_h, hidden, s, gru_cache, dist)
    return dist, replace(ctx, hidden=hidden), cache


def decode_step_backward(
    coeff: float,
    action: Action,
    cache: tuple,
    params: ParamSet,
    grad_hidden_out: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, dict[str, np.ndarray]]:
    """Gradient of coeff * log pi(action) for one decode step.

    grad_hidden_out carries the downstream gradient flowing into this step's
    advanced hidden state (the recurrence); it is folded in before the GRU
    backward.  Returns (grad_enc_h, grad_hidden_prev,
    grad_node_embedding_input, grads); grad_enc_h covers the scorer's use of
    all embeddings, while the node-embedding input gradient belongs at the
    current node's row.
    """
    enc_h, hidden, s, gru_cache, dist = cache
    i = action.next_node

    dlogits = coeff * nn.log_prob_grad(dist.node_probs, i)
    ds = np.outer(dlogits, params["score.v"])
    grads: dict[str, np.ndarray] = {"score.v": s.T @ dlogits}

    if dist.process_mask[i]:
        sig = nn.sigmoid(dist.process_logits[i : i + 1])[0]
        dproc = coeff * ((1.0 - sig) if action.process else -sig)
        ds[i] += dproc * params["proc.w"]
        grads["proc.w"] = dproc * s[i]
        grads["proc.b"] = np.array([dproc])

    ds_pre = ds * (1.0 - s * s)
    grad_enc_h = ds_pre @ params["score.W_emb"].T
    grads["score.W_emb"] = enc_h.T @ ds_pre
    ds_pre_sum = ds_pre.sum(axis=0)
    grads["score.W_hid"] = np.outer(hidden, ds_pre_sum)
    dhidden = ds_pre_sum @ params["score.W_hid"].T
    if grad_hidden_out is not None:
        dhidden = dhidden + grad_hidden_out

    dx, dh_prev, gru_grads = nn.gru_cell_backward(dhidden, gru_cache)
    for name, value in gru_grads.items():
        grads[name] = grads.get(name, 0.0) + value
    k2 = dx.shape[0] - hidden.shape[0]
    grad_node_embedding = dx[k2:]
    return grad_enc_h, dh_prev, grad_node_embedding, grads


# ---------------------------------------------------------------------------
# episode driver

def _chain_inputs(req: SfcRequest, chain_index: int, k: int) -> tuple[np.ndarray, np.ndarray]:
    v_all = np.zeros(k)
    v_now = np.zeros(k)
    for entry in req.chain[chain_index:]:
        v_all[entry] = 1.0
    if chain_index < len(req.chain):
        v_now[req.chain[chain_index]] = 1.0
    return v_all, v_now


def _masks(state: EnvState, t: Topology) -> tuple[np.ndarray, np.ndarray, tuple[Action, ...]]:
    acts = valid_actions(state, t)
    move = np.zeros(t.num_nodes, dtype=bool)
    proc = np.zeros(t.num_nodes, dtype=bool)
    for a in acts:
        move[a.next_node] = True
        if a.process:
            proc[a.next_node] = True
    return move, proc, acts


@dataclass
class _EpisodeRun:
    trace: EpisodeTrace
    step_caches: list          # (cache, segment_id, coeff slot) per step
    segments: list             # (enc_caches, n) per encoder run
    log_probs: list[float]


def _run_episode(
    params: ParamSet,
    cfg: PolicyConfig,
    t: Topology,
    req: SfcRequest,
    reward_cfg: RewardConfig,
    max_steps: int | None,
    select,                    # (dist, acts, state) -> Action
    want_caches: bool,
) -> _EpisodeRun:
    a_matrix = adjacency_matrix(t)
    state = reset(t, req, max_steps)
    hidden = np.zeros(cfg.hidden_dim)

    segments: list = []
    step_caches: list = []
    trace_steps: list[TraceStep] = []
    log_probs: list[float] = []

    encoded_index = -1
    enc_h = None
    while not state.done:
        if state.chain_index != encoded_index:
            encoded_index = state.chain_index
            h0 = annotate(t, req, encoded_index, cfg)
            enc_h, enc_caches = encode(h0, a_matrix, cfg.t_prop, params)
            segments.append(enc_caches if want_caches else None)
        move_mask, proc_mask, acts = _masks(state, t)
        v_all, v_now = _chain_inputs(req, state.chain_index, cfg.vnf_type_count)
        ctx = DecoderContext(
            hidden=hidden,
            v_all=v_all,
            v_now=v_now,
            node_embedding=enc_h[state.current_node],
        )
        dist, ctx, cache = decode_step(enc_h, ctx, move_mask, proc_mask, params)
        hidden = ctx.hidden

        action = select(dist, acts, state)
        logp = action_log_prob(dist, action)
        log_probs.append(logp)
        if want_caches:
            step_caches.append((cache, len(segments) - 1, state.current_node))

        prev_node, prev_index = state.current_node, state.chain_index
        state, reward, _ = env_step(state, action, t, reward_cfg)
        state = state.with_memory(hidden)
        trace_steps.append(
            TraceStep(
                node=prev_node,
                chain_index=prev_index,
                action=action,
                reward=reward,
                log_prob=logp,
            )
        )

    trace = EpisodeTrace(
        topology=t,
        request=req,
        steps=tuple(trace_steps),
        path=state.path_so_far,
        max_steps=state.max_steps,
    )
    return _EpisodeRun(trace=trace, step_caches=step_caches, segments=segments, log_probs=log_probs)


def _greedy_action(dist: ActionDistribution) -> Action:
    node = int(np.argmax(dist.node_probs))
    process = bool(dist.process_mask[node]) and dist.process_prob[node] >= 0.5
    return Action(node, process)


def _sample_action(dist: ActionDistribution, rng: np.random.Generator) -> Action:
    node = int(rng.choice(len(dist.node_probs), p=dist.node_probs))
    process = False
    if dist.process_mask[node]:
        process = bool(rng.random() < dist.process_prob[node])
    return Action(node, process)


def rollout(
    params: ParamSet,
    cfg: PolicyConfig,
    t: Topology,
    req: SfcRequest,
    reward_cfg: RewardConfig | None = None,
    mode: str = "greedy",
    rng: np.random.Generator | None = None,
    epsilon: float = 0.01,
    max_steps: int | None = None,
) -> EpisodeTrace:
    """Run one episode under the policy.

    greedy: argmax node, process iff its probability >= 0.5 (deterministic).
    sample: draw node from the distribution, then the process coin.
    epsilon_greedy: with probability epsilon take a uniform valid action,
    otherwise the greedy one; log-probs always record the policy's own
    probability of the taken action.
    """
    if mode not in ROLLOUT_MODES:
        raise ValueError(f"unknown rollout mode {mode!r}")
    if mode != "greedy" and rng is None:
        raise ValueError(f"mode {mode!r} needs an rng")
    if reward_cfg is None:
        reward_cfg = RewardConfig()

    def select(dist: ActionDistribution, acts: tuple[Action, ...], state: EnvState) -> Action:
        if mode == "greedy":
            return _greedy_action(dist)
        if mode == "sample":
            return _sample_action(dist, rng)
        if rng.random() < epsilon:
            return acts[int(rng.integers(len(acts)))]
        return _greedy_action(dist)

    run = _run_episode(params, cfg, t, req, reward_cfg, max_steps, select, want_caches=False)
    return run.trace


def episode_gradients(
    params: ParamSet,
    cfg: PolicyConfig,
    t: Topology,
    req: SfcRequest,
    actions: tuple[Action, ...],
    coeffs: np.ndarray | list[float],
    max_steps: int | None = None,
    reward_cfg: RewardConfig | None = None,
) -> tuple[list[float], GradSet]:
    """Forward-replay the action sequence and backprop sum_t coeff_t*log pi(a_t).

    The returned log-probs are computed by the exact code path rollouts use,
    so replaying a recorded trace reproduces its log-probs bit-for-bit.
    """
    if reward_cfg is None:
        reward_cfg = RewardConfig()
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if len(coeffs) != len(actions):
        raise ValueError(f"{len(actions)} actions but {len(coeffs)} coefficients")
    it = iter(actions)

    def select(dist: ActionDistribution, acts, state) -> Action:
        return next(it)

    run = _run_episode(
        params, cfg, t, req, reward_cfg,
        max_steps if max_steps is not None else len(actions),
        select, want_caches=True,
    )
    if len(run.trace.steps) != len(actions):
        raise ValueError(
            f"episode terminated after {len(run.trace.steps)} of {len(actions)} actions"
        )

    grads = GradSet(params)
    n = t.num_nodes
    grad_enc_by_segment = [np.zeros((n, cfg.hidden_dim)) for _ in run.segments]
    dh_next: np.ndarray | None = None
    for (cache, seg_id, cur_node), action, coeff in zip(
        reversed(run.step_caches), reversed(actions), reversed(coeffs)
    ):
        genc, dh_next, gnode, step_grads = decode_step_backward(
            coeff, action, cache, params, grad_hidden_out=dh_next
        )
        grads.add_all(step_grads)
        grad_enc_by_segment[seg_id] += genc
        grad_enc_by_segment[seg_id][cur_node] += gnode

    for seg_id, enc_caches in enumerate(run.segments):
        _, enc_grads = encode_backward(grad_enc_by_segment[seg_id], enc_caches)
        grads.add_all(enc_grads)
    return run.log_probs, grads


# ---------------------------------------------------------------------------
# checkpoints

def save_policy(
    params: ParamSet,
    cfg: PolicyConfig,
    path: str | Path,
    seed: int,
    training_stage: str,
) -> None:
    metadata = {
        "hidden_dim": cfg.hidden_dim,
        "K": cfg.vnf_type_count,
        "propagation_steps": cfg.t_prop,
        "T_prop": cfg.t_prop,
        "seed": seed,
        "training_stage": training_stage,
        "scorer_variant": SCORER_VARIANT,
    }
    nn.save_checkpoint(params, metadata, path)


def load_policy(path: str | Path) -> tuple[ParamSet, PolicyConfig, dict]:
    params, metadata = nn.load_checkpoint(path)
    cfg = PolicyConfig(
        hidden_dim=int(metadata["hidden_dim"]),
        vnf_type_count=int(metadata["K"]),
        t_prop=int(metadata.get("propagation_steps", metadata.get("T_prop"))),
    )
    expected = init_policy_params(cfg, seed=0).shapes()
    actual = params.shapes()
    if expected != actual:
        for name in sorted(set(expected) | set(actual)):
            if expected.get(name) != actual.get(name):
                raise ValueError(
                    f"checkpoint tensor {name!r} has shape {actual.get(name)}, "
                    f"architecture expects {expected.get(name)}"
                )
    return params, cfg, metadata
