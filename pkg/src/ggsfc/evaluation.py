"""Metrics and the three-test evaluation protocol.

Failure Ratio: failed requests over all requests.
Delay Ratio: total generated delay over total optimal delay, summed across
successful requests (sum over sum, not mean of ratios).
Deterioration Rate: a checkpoint's failure ratio on a mutated-topology test
divided by its failure ratio on the original topology, printed to one
decimal; undefined when the original failure ratio is zero.

The experiment harness runs each checkpoint through three tests: the
original topology, a pool of structurally mutated topologies, and a pool
mutated with relocated VNF instances.  Requests are generated once per test
from the experiment seed, so every checkpoint answers the same questions
and reruns are byte-identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .environment import DEFAULT_CHAIN_LEN_RANGE, SfcRequest, generate_requests
from .nn import ParamSet
from .oracle import solve_optimal
from .policy import PolicyConfig, rollout
from .topology import Topology, TopologyPool

TEST_ORIGINAL = "original"
TEST_RANDOM = "random"
TEST_RANDOM_VNFS = "random_vnfs"

# an actor answers one request: (success, generated delay)
Actor = Callable[[Topology, SfcRequest], tuple[bool, int]]


@dataclass(frozen=True)
class RequestOutcome:
    success: bool
    generated_delay: int | None
    oracle_delay: int | None


@dataclass(frozen=True)
class TestOutcome:
    """All per-request outcomes of one test, plus the excluded-request count."""

    outcomes: tuple[RequestOutcome, ...]
    infeasible: int


def failure_ratio(outcomes: Sequence[RequestOutcome]) -> float:
    if not outcomes:
        raise ValueError("failure_ratio of an empty outcome list")
    failures = sum(1 for o in outcomes if not o.success)
    return failures / len(outcomes)


def delay_ratio(outcomes: Sequence[RequestOutcome]) -> float:
    """Sum of generated delays over sum of oracle delays, successes only."""
    generated = 0
    optimal = 0
    for o in outcomes:
        if o.success and o.oracle_delay is not None:
            generated += o.generated_delay
            optimal += o.oracle_delay
    if optimal == 0:
        raise ValueError("delay_ratio has no successful outcomes with oracle labels")
    return generated / optimal


def deterioration_rate(fr_random: float, fr_original: float) -> float:
    """fr_random / fr_original; nan marks the undefined zero-original case."""
    if fr_original < 0 or fr_random < 0:
        raise ValueError("failure ratios must be >= 0")
    if fr_original == 0:
        return float("nan")
    return fr_random / fr_original


# ---------------------------------------------------------------------------
# actors

def greedy_actor(params: ParamSet, cfg: PolicyConfig) -> Actor:
    def act(t: Topology, req: SfcRequest) -> tuple[bool, int]:
        trace = rollout(params, cfg, t, req, mode="greedy")
        return trace.success, trace.total_delay

    return act


def oracle_actor() -> Actor:
    """The exact solver posing as a policy (failure ratio 0, delay ratio 1)."""

    def act(t: Topology, req: SfcRequest) -> tuple[bool, int]:
        res = solve_optimal(t, req)
        if not res.feasible:
            return False, 0
        return True, res.optimal_delay

    return act


def evaluate_requests(
    actor: Actor, pairs: Sequence[tuple[Topology, SfcRequest]]
) -> TestOutcome:
    """Run the actor on each (topology, request) pair.

    Requests the exact solver cannot serve are excluded from the metrics and
    counted, so the numbers measure policy quality, not topology pathology.
    Oracle delays are recorded for every retained request.
    """
    outcomes = []
    infeasible = 0
    for t, req in pairs:
        res = solve_optimal(t, req)
        if not res.feasible:
            infeasible += 1
            continue
        success, delay = actor(t, req)
        outcomes.append(
            RequestOutcome(
                success=success,
                generated_delay=delay if success else None,
                oracle_delay=res.optimal_delay,
            )
        )
    return TestOutcome(outcomes=tuple(outcomes), infeasible=infeasible)


# ---------------------------------------------------------------------------
# the three-test experiment

@dataclass(frozen=True)
class TestMetrics:
    failure_ratio: float
    delay_ratio: float
    infeasible: int


@dataclass(frozen=True)
class ReportRow:
    approach: str
    original: TestMetrics
    random: TestMetrics
    random_vnfs: TestMetrics

    def deterioration(self, test: str) -> float:
        metrics = {TEST_RANDOM: self.random, TEST_RANDOM_VNFS: self.random_vnfs}[test]
        return deterioration_rate(metrics.failure_ratio, self.original.failure_ratio)


@dataclass(frozen=True)
class MetricsReport:
    rows: tuple[ReportRow, ...]
    request_count: int
    seed: int


def _pool_pairs(
    pool: TopologyPool,
    count: int,
    chain_len_range: tuple[int, int],
    rng: np.random.Generator,
) -> list[tuple[Topology, SfcRequest]]:
    pairs = []
    for _ in range(count):
        t = pool.variants[int(rng.integers(len(pool.variants)))]
        pairs.append((t, generate_requests(t, 1, chain_len_range, rng)[0]))
    return pairs


def run_experiment(
    checkpoints: Sequence[tuple[str, ParamSet, PolicyConfig]],
    fixture: Topology,
    pools: dict[str, TopologyPool],
    request_count: int = 1000,
    seed: int = 0,
    chain_len_range: tuple[int, int] = DEFAULT_CHAIN_LEN_RANGE,
    actors: Sequence[tuple[str, Actor]] = (),
) -> MetricsReport:
    """Evaluate checkpoints on the original topology and both mutation pools.

    pools maps 'cs1' to the structural-mutation pool (Random Topo. test) and
    'cs2' to the relocation pool (Random Topo.+VNFs test).  Extra non-model
    actors (like oracle_actor) may ride along for reference rows.
    """
    for key in ("cs1", "cs2"):
        if key not in pools:
            raise ValueError(f"missing pool {key!r}")
    rng = np.random.default_rng(seed)
    pairs1 = [(fixture, r) for r in generate_requests(fixture, request_count, chain_len_range, rng)]
    pairs2 = _pool_pairs(pools["cs1"], request_count, chain_len_range, rng)
    pairs3 = _pool_pairs(pools["cs2"], request_count, chain_len_range, rng)

    all_actors: list[tuple[str, Actor]] = [
        (label, greedy_actor(params, cfg)) for label, params, cfg in checkpoints
    ]
    all_actors.extend(actors)

    rows = []
    for label, actor in all_actors:
        metrics = []
        for pairs in (pairs1, pairs2, pairs3):
            outcome = evaluate_requests(actor, pairs)
            try:
                dr = delay_ratio(outcome.outcomes)
            except ValueError:
                dr = float("nan")
            metrics.append(
                TestMetrics(
                    failure_ratio=failure_ratio(outcome.outcomes),
                    delay_ratio=dr,
                    infeasible=outcome.infeasible,
                )
            )
        rows.append(ReportRow(label, metrics[0], metrics[1], metrics[2]))
    return MetricsReport(rows=tuple(rows), request_count=request_count, seed=seed)


# ---------------------------------------------------------------------------
# report emission

def _fmt_ratio(x: float) -> str:
    return "-" if math.isnan(x) else f"{x:.4f}"


def _fmt_det(x: float) -> str:
    return "undef" if math.isnan(x) else f"{x:.1f}"


def report_to_csv(report: MetricsReport) -> str:
    """One row per approach; delay ratios on the random tests come from our
    solver and are extension columns, not part of the reference table shape."""
    header = (
        "approach,original_failure_ratio,original_delay_ratio,"
        "random_failure_ratio,random_deterioration,random_delay_ratio_ext,"
        "random_vnfs_failure_ratio,random_vnfs_deterioration,random_vnfs_delay_ratio_ext,"
        "infeasible_original,infeasible_random,infeasible_random_vnfs"
    )
    lines = [header]
    for r in report.rows:
        lines.append(
            ",".join(
                [
                    r.approach,
                    _fmt_ratio(r.original.failure_ratio),
                    _fmt_ratio(r.original.delay_ratio),
                    _fmt_ratio(r.random.failure_ratio),
                    _fmt_det(r.deterioration(TEST_RANDOM)),
                    _fmt_ratio(r.random.delay_ratio),
                    _fmt_ratio(r.random_vnfs.failure_ratio),
                    _fmt_det(r.deterioration(TEST_RANDOM_VNFS)),
                    _fmt_ratio(r.random_vnfs.delay_ratio),
                    str(r.original.infeasible),
                    str(r.random.infeasible),
                    str(r.random_vnfs.infeasible),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def format_report(report: MetricsReport) -> str:
    """Human-readable table: failure ratio, delay ratio, and the two
    mutated-topology failure ratios with deterioration rates in parens."""
    name_w = max([len("approach")] + [len(r.approach) for r in report.rows])
    header = (
        f"{'approach':<{name_w}}  {'Original Topo.':>22}  "
        f"{'Random Topo.':>18}  {'Random Topo.+VNFs':>18}"
    )
    sub = (
        f"{'':<{name_w}}  {'FR':>10} {'DR':>11}  {'FR (Det.)':>18}  {'FR (Det.)':>18}"
    )
    lines = [header, sub, "-" * len(sub)]
    for r in report.rows:
        fr2 = f"{_fmt_ratio(r.random.failure_ratio)} ({_fmt_det(r.deterioration(TEST_RANDOM))})"
        fr3 = f"{_fmt_ratio(r.random_vnfs.failure_ratio)} ({_fmt_det(r.deterioration(TEST_RANDOM_VNFS))})"
        lines.append(
            f"{r.approach:<{name_w}}  {_fmt_ratio(r.original.failure_ratio):>10} "
            f"{_fmt_ratio(r.original.delay_ratio):>11}  {fr2:>18}  {fr3:>18}"
        )
    lines.append(
        f"(requests per test: {report.request_count}, seed {report.seed}; "
        f"delay ratios on the random tests use our exact solver)"
    )
    return "\n".join(lines) + "\n"


def save_report(report: MetricsReport, directory: str | Path) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    (d / "report.csv").write_text(report_to_csv(report))
    (d / "report.txt").write_text(format_report(report))
