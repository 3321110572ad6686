"""Exact delay-optimal SFC path solving over the layered product graph.

A layered state pairs a node with the number of chain entries already
processed.  Transitions mirror environment actions one-for-one: a plain
move keeps the layer, a move with processing climbs one layer and is
allowed only when the arrival node hosts the pending type.  Dijkstra over
this graph therefore returns the minimum delay reachable by any environment
walk, and the returned action sequence replays through the environment
verbatim with that exact delay.

Ties between equal-delay optima break toward fewer steps, then the
lexicographically smallest action sequence, so labels are deterministic.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .environment import (
    Action,
    PathResult,
    RewardConfig,
    SfcRequest,
    default_max_steps,
    reset,
    step,
    valid_actions,
    validate_request,
)
from .topology import Topology, TopologyPool

DEFAULT_WORK_CAP = 10_000_000


@dataclass(frozen=True)
class OracleResult:
    """Optimal walk for a request, or the infeasible marker (path=None)."""

    path: PathResult | None
    actions: tuple[Action, ...]

    @property
    def feasible(self) -> bool:
        return self.path is not None

    @property
    def optimal_delay(self) -> int:
        if self.path is None:
            raise ValueError("infeasible result has no optimal delay")
        return self.path.total_delay


INFEASIBLE = OracleResult(path=None, actions=())

# action sequences are compared as tuples of (node, process-as-int), which
# orders by node sequence first and prefers not-processing on ties
_ActionKey = tuple[tuple[int, int], ...]


def _result_from_actions(
    t: Topology, req: SfcRequest, actions: tuple[Action, ...], expected_delay: int
) -> OracleResult:
    """Build the PathResult by replaying the actions through the environment."""
    if not req.chain:
        # episodes require a chain, so assemble the usage records directly
        edge_uses: list[tuple[int, int]] = []
        delay = 0
        node = req.source
        for a in actions:
            delay += t.edge_delay(node, a.next_node)
            edge_uses.append((node, a.next_node))
            node = a.next_node
        if node != req.destination or delay != expected_delay:
            raise AssertionError("solver emitted an inconsistent chainless walk")
        return OracleResult(
            path=PathResult(tuple(edge_uses), (), delay, True), actions=actions
        )
    s = reset(t, req, max_steps=len(actions))
    cfg = RewardConfig()
    for a in actions:
        s, _, _ = step(s, a, t, cfg)
    p = s.path_so_far
    if not (p.success and p.total_delay == expected_delay):
        raise AssertionError("solver emitted a walk the environment cannot replay")
    return OracleResult(path=p, actions=actions)


def solve_optimal(t: Topology, req: SfcRequest) -> OracleResult:
    """Minimum-delay environment walk serving the request, or infeasible."""
    validate_request(t, req, allow_empty_chain=True)
    chain = req.chain
    length = len(chain)
    if length == 0 and req.source == req.destination:
        return OracleResult(path=PathResult((), (), 0, True), actions=())

    goal = (req.destination, length)
    settled: set[tuple[int, int]] = set()
    # heap entries: (delay, steps, action-key, node, layer)
    heap: list[tuple[int, int, _ActionKey, int, int]] = [(0, 0, (), req.source, 0)]
    while heap:
        delay, steps, acts, node, layer = heapq.heappop(heap)
        if (node, layer) in settled:
            continue
        settled.add((node, layer))
        if (node, layer) == goal:
            actions = tuple(Action(n, bool(p)) for n, p in acts)
            return _result_from_actions(t, req, actions, delay)
        want = chain[layer] if layer < length else None
        for v in t.neighbors[node]:
            d = delay + t.edge_delay(node, v)
            if (v, layer) not in settled:
                heapq.heappush(heap, (d, steps + 1, acts + ((v, 0),), v, layer))
            if want is not None:
                inst = t.best_instance(v, want)
                if inst is not None and (v, layer + 1) not in settled:
                    heapq.heappush(
                        heap,
                        (d + inst.proc_delay, steps + 1, acts + ((v, 1),), v, layer + 1),
                    )
    return INFEASIBLE


# ---------------------------------------------------------------------------
# independent check: exhaustive bounded-depth search driven by the environment

def brute_force_optimal(
    t: Topology,
    req: SfcRequest,
    walk_budget: int | None = None,
    work_cap: int = DEFAULT_WORK_CAP,
) -> OracleResult:
    """Enumerate environment action sequences up to walk_budget steps.

    Transitions come from literally driving valid_actions/step, so this is a
    solver-independent ground truth.  Prefixes landing on the same
    (node, chain-progress) at the same depth are pruned to the best
    (delay, action-sequence) pair, which cannot discard any optimum because
    completions are prefix-independent.  The default budget N*(chain+1) is
    sufficient: an optimal walk never revisits a layered state (positive
    delays), so longer sequences are never optimal.
    """
    validate_request(t, req, allow_empty_chain=True)
    length = len(req.chain)
    if length == 0:
        return _brute_force_no_chain(t, req, walk_budget)
    if walk_budget is None:
        walk_budget = t.num_nodes * (length + 1)
    if walk_budget < 1:
        raise ValueError("walk_budget must be >= 1")
    max_degree = max(len(nb) for nb in t.neighbors)
    work = walk_budget * t.num_nodes * (length + 1) * max_degree * 2
    if work > work_cap:
        raise ValueError(
            f"walk budget {walk_budget} needs ~{work} expansions, over the cap {work_cap}"
        )

    cfg = RewardConfig()
    start = reset(t, req, max_steps=walk_budget)
    # frontier at exactly s steps: (node, chain_index) -> (delay, action-key, state)
    frontier = {(start.current_node, start.chain_index): (0, (), start)}
    best: tuple[int, int, _ActionKey] | None = None
    for depth in range(1, walk_budget + 1):
        nxt: dict[tuple[int, int], tuple[int, _ActionKey, object]] = {}
        for delay, acts, state in frontier.values():
            for a in valid_actions(state, t):
                s2, _, _ = step(state, a, t, cfg)
                d2 = s2.path_so_far.total_delay
                acts2 = acts + ((a.next_node, int(a.process)),)
                if s2.path_so_far.success:
                    cand = (d2, depth, acts2)
                    if best is None or cand < best:
                        best = cand
                    continue
                key = (s2.current_node, s2.chain_index)
                old = nxt.get(key)
                if old is None or (d2, acts2) < (old[0], old[1]):
                    nxt[key] = (d2, acts2, s2)
        frontier = nxt
        if not frontier:
            break
    if best is None:
        return INFEASIBLE
    delay, _, acts = best
    actions = tuple(Action(n, bool(p)) for n, p in acts)
    return _result_from_actions(t, req, actions, delay)


def _brute_force_no_chain(
    t: Topology, req: SfcRequest, walk_budget: int | None
) -> OracleResult:
    if req.source == req.destination:
        return OracleResult(path=PathResult((), (), 0, True), actions=())
    budget = walk_budget if walk_budget is not None else t.num_nodes
    frontier: dict[int, tuple[int, _ActionKey]] = {req.source: (0, ())}
    best: tuple[int, int, _ActionKey] | None = None
    for depth in range(1, budget + 1):
        nxt: dict[int, tuple[int, _ActionKey]] = {}
        for node, (delay, acts) in frontier.items():
            for v in t.neighbors[node]:
                d2 = delay + t.edge_delay(node, v)
                acts2 = acts + ((v, 0),)
                if v == req.destination:
                    cand = (d2, depth, acts2)
                    if best is None or cand < best:
                        best = cand
                    continue
                old = nxt.get(v)
                if old is None or (d2, acts2) < old:
                    nxt[v] = (d2, acts2)
        frontier = nxt
        if not frontier:
            break
    if best is None:
        return INFEASIBLE
    delay, _, acts = best
    actions = tuple(Action(n, bool(p)) for n, p in acts)
    return _result_from_actions(t, req, actions, delay)


# ---------------------------------------------------------------------------
# labeled datasets

@dataclass(frozen=True)
class LabeledExample:
    topology_id: int
    request: SfcRequest
    actions: tuple[Action, ...]
    optimal_delay: int


@dataclass(frozen=True)
class LabeledDataset:
    examples: tuple[LabeledExample, ...]
    dropped_infeasible: int
    dropped_over_budget: int

    def __len__(self) -> int:
        return len(self.examples)


def _as_topology_list(topologies) -> list[Topology]:
    if isinstance(topologies, Topology):
        return [topologies]
    if isinstance(topologies, TopologyPool):
        return list(topologies.variants)
    return list(topologies)


def label_dataset(
    topologies: Topology | TopologyPool | Sequence[Topology],
    requests: Iterable[SfcRequest | tuple[int, SfcRequest]],
) -> LabeledDataset:
    """Solve each request exactly and keep the replayable labels.

    ``topologies`` may be a single topology (all ids 0), an explicit list,
    or a pool (ids index its variants).  Each request is an SfcRequest or a
    (topology_id, SfcRequest) pair.  Infeasible requests are dropped and
    counted, as are optima too long to replay inside the environment's
    default step budget.
    """
    topo_list = _as_topology_list(topologies)
    examples: list[LabeledExample] = []
    infeasible = 0
    over_budget = 0
    for entry in requests:
        tid, req = entry if isinstance(entry, tuple) else (0, entry)
        t = topo_list[tid]
        res = solve_optimal(t, req)
        if not res.feasible:
            infeasible += 1
            continue
        if len(res.actions) > default_max_steps(t, req):
            over_budget += 1
            continue
        examples.append(LabeledExample(tid, req, res.actions, res.optimal_delay))
    return LabeledDataset(tuple(examples), infeasible, over_budget)


def dataset_to_doc(ds: LabeledDataset) -> dict:
    return {
        "dropped_infeasible": ds.dropped_infeasible,
        "dropped_over_budget": ds.dropped_over_budget,
        "examples": [
            {
                "topology_id": ex.topology_id,
                "request": {
                    "source": ex.request.source,
                    "destination": ex.request.destination,
                    "chain": list(ex.request.chain),
                },
                "action_sequence": [[a.next_node, int(a.process)] for a in ex.actions],
                "optimal_delay": ex.optimal_delay,
            }
            for ex in ds.examples
        ],
    }


def dataset_from_doc(doc: dict) -> LabeledDataset:
    examples = tuple(
        LabeledExample(
            topology_id=int(rec["topology_id"]),
            request=SfcRequest(
                source=int(rec["request"]["source"]),
                destination=int(rec["request"]["destination"]),
                chain=tuple(int(k) for k in rec["request"]["chain"]),
            ),
            actions=tuple(Action(int(n), bool(p)) for n, p in rec["action_sequence"]),
            optimal_delay=int(rec["optimal_delay"]),
        )
        for rec in doc["examples"]
    )
    return LabeledDataset(
        examples=examples,
        dropped_infeasible=int(doc["dropped_infeasible"]),
        dropped_over_budget=int(doc["dropped_over_budget"]),
    )


def save_dataset(ds: LabeledDataset) -> str:
    return json.dumps(dataset_to_doc(ds), indent=2, sort_keys=True) + "\n"


def load_dataset(text: str) -> LabeledDataset:
    return dataset_from_doc(json.loads(text))


def save_dataset_file(ds: LabeledDataset, path: str | Path) -> None:
    Path(path).write_text(save_dataset(ds))


def load_dataset_file(path: str | Path) -> LabeledDataset:
    return load_dataset(Path(path).read_text())
