"""Graph model for VNF-bearing network topologies, plus random change strategies.

A topology is an undirected, connected, simple graph with positive integer
edge delays (milliseconds) and a set of VNF instances deployed on its nodes.
Two change strategies produce randomized variants of a base topology:

* CS1 adds random nodes (each wired with two edges) and random edges, then
  removes random edges, dismissing any removal that would disconnect the
  graph.  VNF instances stay where they are.
* CS2 applies CS1 and then relocates every VNF instance to a uniformly
  chosen node of the mutated graph.
"""

from __future__ import annotations

import hashlib
import json
from collections import deque
from dataclasses import dataclass, field, replace
from functools import cache, cached_property
from importlib import resources
from pathlib import Path

import numpy as np

# Delay range (inclusive, ms) used for the bundled fixture and for edges
# created during mutation.
EDGE_DELAY_RANGE = (1, 10)

DEFAULT_POOL_SIZE = 100
FIXTURE_SEED = 12


class TopologyError(ValueError):
    """Malformed topology document or violated structural invariant."""


@dataclass(frozen=True, order=True)
class VnfInstance:
    """One deployed VNF: a type hosted on a node with a processing delay."""

    node: int
    vnf_type: int
    proc_delay: int


@dataclass(frozen=True)
class MutationParams:
    """Trial counts and per-trial probabilities for topology changes."""

    node_add_prob: float = 0.1
    node_add_trials: int = 12
    edge_add_prob: float = 0.3
    edge_add_trials: int = 15
    edge_remove_prob: float = 0.3
    edge_remove_trials: int = 30

    def __post_init__(self) -> None:
        for name in ("node_add_prob", "edge_add_prob", "edge_remove_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {p}")
        for name in ("node_add_trials", "edge_add_trials", "edge_remove_trials"):
            n = getattr(self, name)
            if n < 0:
                raise ValueError(f"{name} must be >= 0, got {n}")


@dataclass
class MutationStats:
    """Per-mutation trial accounting (used by statistical tests)."""

    node_add_successes: int = 0
    edge_add_successes: int = 0  # coin successes, counted before adjacency dismissals
    edge_add_applied: int = 0
    edge_remove_successes: int = 0
    edge_remove_applied: int = 0


@dataclass(frozen=True)
class Topology:
    """Undirected connected simple graph with delays and VNF instances.

    Node ids are dense integers ``0..num_nodes-1``.  Edges are canonicalized
    to ``(u, v, delay)`` with ``u < v`` and sorted, instances are sorted, so
    equal topologies compare equal field-for-field.
    """

    num_nodes: int
    edges: tuple[tuple[int, int, int], ...]
    instances: tuple[VnfInstance, ...]
    vnf_type_count: int

    def __post_init__(self) -> None:
        canon = tuple(sorted((min(u, v), max(u, v), d) for u, v, d in self.edges))
        object.__setattr__(self, "edges", canon)
        object.__setattr__(self, "instances", tuple(sorted(self.instances)))
        self._validate()

    def _validate(self) -> None:
        if self.num_nodes < 1:
            raise TopologyError(f"node count must be >= 1, got {self.num_nodes}")
        if self.vnf_type_count < 0:
            raise TopologyError("vnf_type_count must be >= 0")
        seen: set[tuple[int, int]] = set()
        for u, v, d in self.edges:
            if u == v:
                raise TopologyError(f"edge ({u}, {v}): self-loop")
            if not (0 <= u < self.num_nodes and 0 <= v < self.num_nodes):
                raise TopologyError(f"edge ({u}, {v}): node out of range 0..{self.num_nodes - 1}")
            if (u, v) in seen:
                raise TopologyError(f"edge ({u}, {v}): duplicate")
            if d <= 0:
                raise TopologyError(f"edge ({u}, {v}): delay {d} is not positive")
            seen.add((u, v))
        for inst in self.instances:
            if not 0 <= inst.node < self.num_nodes:
                raise TopologyError(f"instance on node {inst.node}: node does not exist")
            if not 0 <= inst.vnf_type < self.vnf_type_count:
                raise TopologyError(
                    f"instance on node {inst.node}: type {inst.vnf_type} "
                    f"outside 0..{self.vnf_type_count - 1}"
                )
            if inst.proc_delay <= 0:
                raise TopologyError(
                    f"instance on node {inst.node}: processing delay "
                    f"{inst.proc_delay} is not positive"
                )
        unreachable = self._unreachable_nodes()
        if unreachable:
            raise TopologyError(f"graph is disconnected: node {min(unreachable)} unreachable from node 0")

    def _unreachable_nodes(self) -> set[int]:
        adj: dict[int, list[int]] = {u: [] for u in range(self.num_nodes)}
        for u, v, _ in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        seen = {0}
        queue = deque([0])
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    queue.append(v)
        return set(range(self.num_nodes)) - seen

    @cached_property
    def neighbors(self) -> tuple[tuple[int, ...], ...]:
        """Sorted neighbor ids per node."""
        adj: list[list[int]] = [[] for _ in range(self.num_nodes)]
        for u, v, _ in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        return tuple(tuple(sorted(a)) for a in adj)

    @cached_property
    def _edge_delay(self) -> dict[tuple[int, int], int]:
        table: dict[tuple[int, int], int] = {}
        for u, v, d in self.edges:
            table[(u, v)] = d
            table[(v, u)] = d
        return table

    def edge_delay(self, u: int, v: int) -> int:
        try:
            return self._edge_delay[(u, v)]
        except KeyError:
            raise TopologyError(f"edge ({u}, {v}) does not exist") from None

    def has_edge(self, u: int, v: int) -> bool:
        return (u, v) in self._edge_delay

    @cached_property
    def _instances_by_site(self) -> dict[tuple[int, int], VnfInstance]:
        # minimum-proc-delay instance per (node, type); sorted order makes
        # the first instance seen the minimum
        table: dict[tuple[int, int], VnfInstance] = {}
        for inst in self.instances:
            table.setdefault((inst.node, inst.vnf_type), inst)
        return table

    def best_instance(self, node: int, vnf_type: int) -> VnfInstance | None:
        """Lowest-processing-delay instance of ``vnf_type`` on ``node``, if any."""
        return self._instances_by_site.get((node, vnf_type))

    def types_at(self, node: int) -> frozenset[int]:
        return frozenset(i.vnf_type for i in self.instances if i.node == node)

    @cached_property
    def deployed_types(self) -> tuple[int, ...]:
        """Sorted VNF types that have at least one instance."""
        return tuple(sorted({i.vnf_type for i in self.instances}))


def adjacency_matrix(t: Topology) -> np.ndarray:
    """Symmetric binary N x N matrix with zero diagonal."""
    a = np.zeros((t.num_nodes, t.num_nodes))
    for u, v, _ in t.edges:
        a[u, v] = 1.0
        a[v, u] = 1.0
    return a


# ---------------------------------------------------------------------------
# serialization

def topology_to_doc(t: Topology) -> dict:
    return {
        "nodes": t.num_nodes,
        "vnf_type_count": t.vnf_type_count,
        "edges": [[u, v, d] for u, v, d in t.edges],
        "instances": [[i.node, i.vnf_type, i.proc_delay] for i in t.instances],
    }


def topology_from_doc(doc: dict) -> Topology:
    try:
        num_nodes = int(doc["nodes"])
        vnf_type_count = int(doc["vnf_type_count"])
        edges = tuple((int(u), int(v), int(d)) for u, v, d in doc["edges"])
        instances = tuple(
            VnfInstance(int(n), int(k), int(d)) for n, k, d in doc["instances"]
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise TopologyError(f"malformed topology document: {exc}") from exc
    return Topology(num_nodes, edges, instances, vnf_type_count)


def save_topology(t: Topology) -> str:
    """Serialize to a JSON document; round-trips through load_topology."""
    return json.dumps(topology_to_doc(t), indent=2, sort_keys=True) + "\n"


def load_topology(text: str) -> Topology:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TopologyError(f"malformed topology document: {exc}") from exc
    if not isinstance(doc, dict):
        raise TopologyError("malformed topology document: expected a JSON object")
    return topology_from_doc(doc)


def load_topology_file(path: str | Path) -> Topology:
    return load_topology(Path(path).read_text())


def save_topology_file(t: Topology, path: str | Path) -> None:
    Path(path).write_text(save_topology(t))


# ---------------------------------------------------------------------------
# fixture

def _random_connected_graph(
    num_nodes: int, num_edges: int, rng: np.random.Generator
) -> Topology:
    lo, hi = EDGE_DELAY_RANGE
    edges: dict[tuple[int, int], int] = {}
    for v in range(1, num_nodes):
        u = int(rng.integers(0, v))
        edges[(u, v)] = int(rng.integers(lo, hi + 1))
    while len(edges) < num_edges:
        u, v = (int(x) for x in rng.choice(num_nodes, size=2, replace=False))
        key = (min(u, v), max(u, v))
        if key not in edges:
            edges[key] = int(rng.integers(lo, hi + 1))
    return Topology(
        num_nodes=num_nodes,
        edges=tuple((u, v, d) for (u, v), d in edges.items()),
        instances=(),
        vnf_type_count=0,
    )


def generate_fixture_topology(seed: int = FIXTURE_SEED) -> Topology:
    """Regenerate the bundled 12-node fixture (the frozen data file's source).

    12 nodes, 15 edges with delays 1..10, five VNF types with two instances
    each on distinct nodes.
    """
    rng = np.random.default_rng(seed)
    graph = _random_connected_graph(12, 15, rng)
    graph = replace(graph, vnf_type_count=5)
    return deploy_vnfs(graph, per_type_count=2, proc_delay_range=(1, 10), rng=rng)


@cache
def internet2_fixture() -> Topology:
    """The bundled internet2-like 12-node fixture, loaded from package data."""
    text = resources.files("ggsfc.data").joinpath("internet2.json").read_text()
    return load_topology(text)


def deploy_vnfs(
    t: Topology,
    per_type_count: int,
    proc_delay_range: tuple[int, int],
    rng: np.random.Generator,
    vnf_type_count: int | None = None,
) -> Topology:
    """Place ``per_type_count`` instances of each VNF type on distinct nodes.

    ``t`` must not already carry instances.  Node choices are uniform and
    independent per type; processing delays are uniform in the given
    inclusive range.
    """
    if t.instances:
        raise TopologyError("topology already has VNF instances deployed")
    k = t.vnf_type_count if vnf_type_count is None else vnf_type_count
    lo, hi = proc_delay_range
    if lo < 1 or hi < lo:
        raise ValueError(f"invalid processing delay range ({lo}, {hi})")
    if per_type_count > t.num_nodes:
        raise ValueError(
            f"cannot place {per_type_count} instances of one type on "
            f"{t.num_nodes} distinct nodes"
        )
    instances = []
    for vnf_type in range(k):
        nodes = rng.choice(t.num_nodes, size=per_type_count, replace=False)
        for node in nodes:
            instances.append(
                VnfInstance(int(node), vnf_type, int(rng.integers(lo, hi + 1)))
            )
    return replace(t, instances=tuple(instances), vnf_type_count=k)


# ---------------------------------------------------------------------------
# change strategies

def _connected_without(
    adj: dict[int, set[int]], u: int, v: int
) -> bool:
    """True if u still reaches v after dropping edge (u, v)."""
    seen = {u}
    queue = deque([u])
    while queue:
        x = queue.popleft()
        for y in adj[x]:
            if x == u and y == v:
                continue
            if y == v:
                return True
            if y not in seen:
                seen.add(y)
                queue.append(y)
    return False


def mutate_cs1_stats(
    t: Topology, rng: np.random.Generator, params: MutationParams | None = None
) -> tuple[Topology, MutationStats]:
    """CS1 mutation with trial accounting; see :func:`mutate_cs1`."""
    params = params or MutationParams()
    stats = MutationStats()
    lo, hi = EDGE_DELAY_RANGE

    edges: dict[tuple[int, int], int] = {(u, v): d for u, v, d in t.edges}
    adj: dict[int, set[int]] = {u: set() for u in range(t.num_nodes)}
    for u, v in edges:
        adj[u].add(v)
        adj[v].add(u)
    n = t.num_nodes

    def add_edge(u: int, v: int) -> None:
        edges[(min(u, v), max(u, v))] = int(rng.integers(lo, hi + 1))
        adj[u].add(v)
        adj[v].add(u)

    # node additions: each new node is wired to two distinct existing nodes
    for _ in range(params.node_add_trials):
        if rng.random() < params.node_add_prob:
            stats.node_add_successes += 1
            if n < 2:
                continue
            a, b = (int(x) for x in rng.choice(n, size=2, replace=False))
            new = n
            n += 1
            adj[new] = set()
            add_edge(new, a)
            add_edge(new, b)

    # edge additions between non-adjacent distinct pairs; an adjacent pair
    # dismisses the trial
    for _ in range(params.edge_add_trials):
        if rng.random() < params.edge_add_prob:
            stats.edge_add_successes += 1
            u, v = (int(x) for x in rng.choice(n, size=2, replace=False))
            if v not in adj[u]:
                add_edge(u, v)
                stats.edge_add_applied += 1

    # edge removals, dismissed whenever the removal would disconnect
    for _ in range(params.edge_remove_trials):
        if rng.random() < params.edge_remove_prob:
            stats.edge_remove_successes += 1
            if not edges:
                continue
            ordered = sorted(edges)
            u, v = ordered[int(rng.integers(len(ordered)))]
            if _connected_without(adj, u, v):
                del edges[(u, v)]
                adj[u].discard(v)
                adj[v].discard(u)
                stats.edge_remove_applied += 1

    mutated = Topology(
        num_nodes=n,
        edges=tuple((u, v, d) for (u, v), d in edges.items()),
        instances=t.instances,
        vnf_type_count=t.vnf_type_count,
    )
    return mutated, stats


def mutate_cs1(
    t: Topology, rng: np.random.Generator, params: MutationParams | None = None
) -> Topology:
    """Change strategy 1: random node/edge additions then guarded edge removals.

    VNF instances are untouched.  The result is always connected and simple.
    """
    mutated, _ = mutate_cs1_stats(t, rng, params)
    return mutated


def relocate_instances(t: Topology, rng: np.random.Generator) -> Topology:
    """Move every VNF instance to a uniformly chosen node, keeping type/delay."""
    moved = tuple(
        replace(inst, node=int(rng.integers(0, t.num_nodes))) for inst in t.instances
    )
    return replace(t, instances=moved)


def mutate_cs2(
    t: Topology, rng: np.random.Generator, params: MutationParams | None = None
) -> Topology:
    """Change strategy 2: CS1 followed by random relocation of all instances."""
    return relocate_instances(mutate_cs1(t, rng, params), rng)


# ---------------------------------------------------------------------------
# pools

_STRATEGIES = {
    "cs1": mutate_cs1,
    "cs2": mutate_cs2,
}


@dataclass(frozen=True)
class TopologyPool:
    """A base topology and a batch of independently mutated variants."""

    base: Topology
    variants: tuple[Topology, ...]
    strategy: str
    seed: int


def generate_pool(
    base: Topology,
    strategy: str,
    pool_size: int = DEFAULT_POOL_SIZE,
    seed: int = 0,
    params: MutationParams | None = None,
) -> TopologyPool:
    """Mutate ``base`` ``pool_size`` times; deterministic for a given seed."""
    if strategy not in _STRATEGIES:
        raise ValueError(f"unknown change strategy {strategy!r}; expected cs1 or cs2")
    if pool_size < 1:
        raise ValueError("pool_size must be >= 1")
    mutate = _STRATEGIES[strategy]
    rng = np.random.default_rng(seed)
    variants = tuple(mutate(base, rng, params) for _ in range(pool_size))
    return TopologyPool(base=base, variants=variants, strategy=strategy, seed=seed)


def topology_sha256(t: Topology) -> str:
    return hashlib.sha256(save_topology(t).encode()).hexdigest()


def save_pool(pool: TopologyPool, dirpath: str | Path) -> None:
    """Write a pool directory: base, numbered variants, and a manifest."""
    d = Path(dirpath)
    d.mkdir(parents=True, exist_ok=True)
    save_topology_file(pool.base, d / "base.json")
    variant_files = []
    for i, variant in enumerate(pool.variants):
        name = f"variant_{i:03d}.json"
        save_topology_file(variant, d / name)
        variant_files.append(name)
    manifest = {
        "strategy": pool.strategy,
        "seed": pool.seed,
        "pool_size": len(pool.variants),
        "base_file": "base.json",
        "base_sha256": topology_sha256(pool.base),
        "variant_files": variant_files,
    }
    (d / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def load_pool(dirpath: str | Path) -> TopologyPool:
    d = Path(dirpath)
    try:
        manifest = json.loads((d / "manifest.json").read_text())
    except FileNotFoundError:
        raise TopologyError(f"{d} is not a pool directory (missing manifest.json)") from None
    base = load_topology_file(d / manifest["base_file"])
    if topology_sha256(base) != manifest["base_sha256"]:
        raise TopologyError(f"{d}: base topology does not match manifest hash")
    variants = tuple(load_topology_file(d / name) for name in manifest["variant_files"])
    return TopologyPool(
        base=base,
        variants=variants,
        strategy=manifest["strategy"],
        seed=int(manifest["seed"]),
    )
