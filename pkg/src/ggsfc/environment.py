"""Episode semantics for SFC path generation.

An episode routes one request (source, destination, ordered VNF chain)
through a topology.  Each step moves to a neighbor of the current node and
optionally processes the next pending chain entry at the arrival node.  The
episode succeeds when the whole chain has been processed in order and the
walk stands at the destination; it fails when the step budget runs out.

Total delay of a walk is the sum of traversed edge delays (with
multiplicity) plus the processing delays of the instances used.  Reward is
sparse: success_base - lam * total_delay on the success-terminal step, zero
everywhere else.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .topology import Topology, TopologyError, VnfInstance

DEFAULT_SUCCESS_BASE = 10000.0
DEFAULT_CHAIN_LEN_RANGE = (1, 4)


class InvalidActionError(ValueError):
    """An action outside valid_actions was fed to step: a policy bug."""


@dataclass(frozen=True)
class SfcRequest:
    """One SFC request: route source -> destination visiting the chain in order."""

    source: int
    destination: int
    chain: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "chain", tuple(int(k) for k in self.chain))


@dataclass(frozen=True)
class Action:
    """Move to next_node; optionally process the pending VNF type there."""

    next_node: int
    process: bool


@dataclass(frozen=True)
class PathResult:
    """Edge and instance usage of a walk, with multiplicity, plus its delay."""

    edge_uses: tuple[tuple[int, int], ...]
    instance_uses: tuple[VnfInstance, ...]
    total_delay: int
    success: bool


EMPTY_PATH = PathResult(edge_uses=(), instance_uses=(), total_delay=0, success=False)


@dataclass(frozen=True)
class RewardConfig:
    # lam is the delay-penalty weight (0 rewards any success equally)
    success_base: float = DEFAULT_SUCCESS_BASE
    lam: float = 0.0

    def __post_init__(self) -> None:
        if self.success_base <= 0:
            raise ValueError(f"success_base must be > 0, got {self.success_base}")
        if self.lam < 0:
            raise ValueError(f"lam must be >= 0, got {self.lam}")


@dataclass(frozen=True)
class EnvState:
    """Immutable episode state; step() returns the successor.

    decoder_memory is an opaque slot owned by the policy (its recurrent
    context rides along with the state); the environment never touches it.
    """

    request: SfcRequest
    current_node: int
    chain_index: int
    steps_taken: int
    path_so_far: PathResult
    done: bool
    max_steps: int
    decoder_memory: object | None = None

    @property
    def pending_type(self) -> int | None:
        """V_now: the next chain entry to process, or None when done with the chain."""
        if self.chain_index < len(self.request.chain):
            return self.request.chain[self.chain_index]
        return None

    def with_memory(self, memory: object | None) -> "EnvState":
        return replace(self, decoder_memory=memory)


def validate_request(t: Topology, req: SfcRequest, allow_empty_chain: bool = False) -> None:
    if not 0 <= req.source < t.num_nodes:
        raise ValueError(f"request source {req.source} is not a node of the topology")
    if not 0 <= req.destination < t.num_nodes:
        raise ValueError(f"request destination {req.destination} is not a node of the topology")
    if not req.chain and not allow_empty_chain:
        raise ValueError("request chain must have at least one entry")
    for k in req.chain:
        if not 0 <= k < t.vnf_type_count:
            raise ValueError(f"request chain entry {k} is not a VNF type (K={t.vnf_type_count})")


def default_max_steps(t: Topology, req: SfcRequest) -> int:
    """Step budget: a few graph traversals plus slack per chain entry."""
    return 3 * t.num_nodes + 2 * len(req.chain)


def reset(t: Topology, req: SfcRequest, max_steps: int | None = None) -> EnvState:
    validate_request(t, req)
    if max_steps is None:
        max_steps = default_max_steps(t, req)
    if max_steps < 1:
        raise ValueError(f"max_steps must be >= 1, got {max_steps}")
    return EnvState(
        request=req,
        current_node=req.source,
        chain_index=0,
        steps_taken=0,
        path_so_far=EMPTY_PATH,
        done=False,
        max_steps=max_steps,
    )


def valid_actions(s: EnvState, t: Topology) -> tuple[Action, ...]:
    """All legal actions: every neighbor move, plus process variants where
    the neighbor hosts an instance of the pending type."""
    if s.done:
        raise InvalidActionError("valid_actions called on a finished episode")
    want = s.pending_type
    actions: list[Action] = []
    for v in t.neighbors[s.current_node]:
        actions.append(Action(v, False))
        if want is not None and t.best_instance(v, want) is not None:
            actions.append(Action(v, True))
    return tuple(actions)


def step(
    s: EnvState,
    a: Action,
    t: Topology,
    cfg: RewardConfig,
    max_steps: int | None = None,
) -> tuple[EnvState, float, bool]:
    """Apply one action; returns (next state, reward, done).

    Success is checked after the move: at the destination with the chain
    fully processed.  Reward is success_base - lam * total_delay then, 0 on
    every other step including budget-exhaustion failure.
    """
    if s.done:
        raise InvalidActionError("step called on a finished episode")
    limit = s.max_steps if max_steps is None else max_steps
    if not t.has_edge(s.current_node, a.next_node):
        raise InvalidActionError(
            f"no edge from node {s.current_node} to node {a.next_node}"
        )
    delay = t.edge_delay(s.current_node, a.next_node)
    edge_uses = s.path_so_far.edge_uses + ((s.current_node, a.next_node),)
    instance_uses = s.path_so_far.instance_uses
    chain_index = s.chain_index
    if a.process:
        want = s.pending_type
        if want is None:
            raise InvalidActionError("process requested but the chain is fully processed")
        inst = t.best_instance(a.next_node, want)
        if inst is None:
            raise InvalidActionError(
                f"node {a.next_node} hosts no instance of type {want}"
            )
        delay += inst.proc_delay
        instance_uses = instance_uses + (inst,)
        chain_index += 1

    total = s.path_so_far.total_delay + delay
    steps_taken = s.steps_taken + 1
    success = a.next_node == s.request.destination and chain_index == len(s.request.chain)
    done = success or steps_taken >= limit
    path = PathResult(
        edge_uses=edge_uses,
        instance_uses=instance_uses,
        total_delay=total,
        success=success,
    )
    reward = cfg.success_base - cfg.lam * total if success else 0.0
    nxt = EnvState(
        request=s.request,
        current_node=a.next_node,
        chain_index=chain_index,
        steps_taken=steps_taken,
        path_so_far=path,
        done=done,
        max_steps=limit,
        decoder_memory=s.decoder_memory,
    )
    return nxt, reward, done


def total_delay(p: PathResult, t: Topology) -> int:
    """Recompute a walk's delay from its usage records (exact integers)."""
    acc = 0
    for u, v in p.edge_uses:
        acc += t.edge_delay(u, v)
    instances = set(t.instances)
    for inst in p.instance_uses:
        if inst not in instances:
            raise TopologyError(f"instance {inst} does not exist in the topology")
        acc += inst.proc_delay
    return acc


def generate_requests(
    t: Topology,
    count: int,
    chain_len_range: tuple[int, int] = DEFAULT_CHAIN_LEN_RANGE,
    rng: np.random.Generator | None = None,
) -> list[SfcRequest]:
    """Uniform random requests: distinct source/destination, chain lengths
    uniform in the inclusive range, chain entries uniform over the types
    actually deployed in the topology."""
    if rng is None:
        rng = np.random.default_rng()
    if count < 0:
        raise ValueError("count must be >= 0")
    if t.num_nodes < 2:
        raise ValueError("need at least 2 nodes for distinct source/destination")
    lo, hi = chain_len_range
    if lo < 1 or hi < lo:
        raise ValueError(f"invalid chain length range ({lo}, {hi})")
    types = t.deployed_types
    if not types:
        raise ValueError("topology has no deployed VNF instances to build chains from")
    requests = []
    for _ in range(count):
        src, dst = (int(x) for x in rng.choice(t.num_nodes, size=2, replace=False))
        length = int(rng.integers(lo, hi + 1))
        chain = tuple(types[int(rng.integers(len(types)))] for _ in range(length))
        requests.append(SfcRequest(source=src, destination=dst, chain=chain))
    return requests


# ---------------------------------------------------------------------------
# episode traces (recorded rollouts; consumed by training)

@dataclass(frozen=True)
class TraceStep:
    """One transition: where the agent stood, what it did, what it got."""

    node: int
    chain_index: int
    action: Action
    reward: float
    log_prob: float


@dataclass(frozen=True)
class EpisodeTrace:
    """A complete episode with enough context to replay it exactly."""

    topology: Topology
    request: SfcRequest
    steps: tuple[TraceStep, ...]
    path: PathResult
    max_steps: int

    @property
    def success(self) -> bool:
        return self.path.success

    @property
    def total_delay(self) -> int:
        return self.path.total_delay

    @property
    def rewards(self) -> tuple[float, ...]:
        return tuple(s.reward for s in self.steps)


def format_episode_log(trace: EpisodeTrace) -> str:
    """Line-per-transition debug view: step, node, action, reward, cumulative delay."""
    req = trace.request
    lines = [f"request {req.source}->{req.destination} chain {list(req.chain)}"]
    t = trace.topology
    node, k, delay = req.source, 0, 0
    for i, ts in enumerate(trace.steps):
        a = ts.action
        delay += t.edge_delay(node, a.next_node)
        if a.process:
            delay += t.best_instance(a.next_node, req.chain[k]).proc_delay
            k += 1
        mark = "+process" if a.process else ""
        lines.append(f"step {i}: {node} -> {a.next_node}{mark} reward {ts.reward:g} delay {delay}")
        node = a.next_node
    lines.append(f"{'success' if trace.success else 'failure'} total_delay {trace.total_delay}")
    return "\n".join(lines)
