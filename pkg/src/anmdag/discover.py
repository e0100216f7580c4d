"""Enumerate every DAG whose fitted noise values are independent.

The search peels off admissible sink nodes: a node is an admissible sink of
the remaining set when the residual of regressing it on the others is
independent of them. Whenever several sinks are admissible, the search
continues with the highest p-value and stores one new branch per alternative,
so every consistent causal order is eventually visited. Completed orders are
pruned to parent sets, deduplicated, and re-checked as whole models.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .datagen import Dataset
from .graph import Dag, minimal_edge_dags
from .indep import TestConfig, joint_residual_independence, test_independence
from .regress import GpConfig, RegressorKind, fitted_noise_values


class Verdict(enum.Enum):
    UNIQUE = "Unique"
    NO_MODEL = "NoModel"
    MULTIPLE = "Multiple"


@dataclass(frozen=True)
class DiscoveryConfig:
    regressor: RegressorKind = RegressorKind.LINEAR
    test: TestConfig = field(default_factory=TestConfig)
    faithful_mode: bool = False
    max_branches: int = 256
    gp: GpConfig = field(default_factory=GpConfig)
    # Pruning tests the residual against the current parent set by default;
    # set this to test against all predecessors in the order instead.
    prune_test_all_predecessors: bool = False

    def __post_init__(self):
        if self.max_branches < 1:
            raise ValueError("max_branches must be at least 1")


@dataclass(frozen=True)
class BranchState:
    """One pending continuation of the sink search.

    `partial_order` holds the sinks chosen so far, first-removed first; the
    full causal order is its reverse once `remaining` is empty.
    """

    remaining: frozenset[int]
    resume_position: int
    partial_order: tuple[int, ...]

    def __post_init__(self):
        if len(self.remaining) != self.resume_position:
            raise ValueError("resume position must equal the remaining-set size")
        if set(self.partial_order) & self.remaining:
            raise ValueError("partial order overlaps the remaining set")


@dataclass(frozen=True)
class OrderSearch:
    orders: tuple[tuple[int, ...], ...]
    truncated: bool
    total_branches: int


@dataclass(frozen=True)
class DiscoveryResult:
    dags: tuple[Dag, ...]
    verdict: Verdict
    traces: tuple[dict[int, float], ...]
    orders_explored: int
    truncated: bool = False
    minimal_edge_dags: tuple[Dag, ...] | None = None

    def __post_init__(self):
        expected = (
            Verdict.NO_MODEL
            if not self.dags
            else (Verdict.UNIQUE if len(self.dags) == 1 else Verdict.MULTIPLE)
        )
        if self.verdict is not expected:
            raise ValueError(f"verdict {self.verdict} inconsistent with {len(self.dags)} DAGs")


class FitCache:
    """Memoizes regressions and independence tests for one dataset + config.

    Both the sink search and the pruning loop revisit the same (columns,
    response) pairs many times; results depend only on those keys, so sharing
    a cache across stages changes nothing but the run time.
    """

    def __init__(self, data: Dataset, config: DiscoveryConfig):
        self.data = data
        self.config = config
        self._fits: dict[tuple[frozenset[int], int], np.ndarray] = {}
        self._tests: dict[tuple[frozenset[int], frozenset[int], int], float] = {}

    def residuals(self, cols: frozenset[int], i: int) -> np.ndarray:
        key = (cols, i)
        if key not in self._fits:
            fit = fitted_noise_values(self.data, cols, i, self.config.regressor, self.config.gp)
            self._fits[key] = fit.residuals
        return self._fits[key]

    def test_pvalue(self, fit_cols: frozenset[int], test_cols: frozenset[int], i: int) -> float:
        key = (fit_cols, test_cols, i)
        if key not in self._tests:
            residuals = self.residuals(fit_cols, i)
            result = test_independence(self.data, test_cols, residuals, self.config.test)
            self._tests[key] = result.p_value
        return self._tests[key]

    def sink_pvalue(self, remaining: frozenset[int], i: int) -> float:
        rest = remaining - {i}
        return self.test_pvalue(rest, rest, i)


def find_causal_orders(
    data: Dataset, config: DiscoveryConfig, cache: FitCache | None = None
) -> OrderSearch:
    """All causal orders consistent with independent residuals.

    Branches are processed FIFO; branches arriving at the same remaining set
    are merged (the continuation depends only on that set) and completed
    orders are emitted once per stored partial order. A branch whose
    remaining nodes admit no sink dies without emitting anything. New
    branches stop being stored once `max_branches` states have been created;
    the result is then flagged truncated.
    """
    if data.num_columns < 1:
        raise ValueError("need at least one column")
    cache = cache or FitCache(data, config)
    alpha = config.test.alpha
    d = data.num_columns

    everything = frozenset(range(d))
    queue: deque[frozenset[int]] = deque([everything])
    pending: dict[frozenset[int], list[BranchState]] = {
        everything: [BranchState(everything, d, ())]
    }
    total_branches = 1
    truncated = False
    orders: list[tuple[int, ...]] = []

    while queue:
        remaining = queue.popleft()
        states = pending.pop(remaining)
        while remaining:
            pvals = {i: cache.sink_pvalue(remaining, i) for i in sorted(remaining)}
            admissible = [i for i in sorted(remaining) if pvals[i] >= alpha]
            if not admissible:
                states = []
                break
            best = max(admissible, key=lambda i: (pvals[i], -i))
            for alt in admissible:
                if alt == best:
                    continue
                if total_branches + len(states) > config.max_branches:
                    truncated = True
                    continue
                total_branches += len(states)
                alt_remaining = remaining - {alt}
                alt_states = [
                    BranchState(alt_remaining, len(alt_remaining), st.partial_order + (alt,))
                    for st in states
                ]
                if alt_remaining in pending:
                    pending[alt_remaining].extend(alt_states)
                else:
                    pending[alt_remaining] = alt_states
                    queue.append(alt_remaining)
            remaining = remaining - {best}
            states = [
                BranchState(remaining, len(remaining), st.partial_order + (best,))
                for st in states
            ]
        orders += [tuple(reversed(st.partial_order)) for st in states]
    return OrderSearch(tuple(orders), truncated, total_branches)


def prune_parents(
    data: Dataset,
    order: Sequence[int],
    config: DiscoveryConfig,
    cache: FitCache | None = None,
) -> Dag:
    """Reduce full predecessor sets along a causal order to actual parents.

    For each node, every predecessor is considered once, in order: refit the
    node without it and drop it if the residual is independent of the test
    set (by default the current parent set, removal candidate included).
    """
    order = tuple(int(i) for i in order)
    if sorted(order) != list(range(data.num_columns)):
        raise ValueError("order must be a permutation of all column indices")
    cache = cache or FitCache(data, config)
    alpha = config.test.alpha
    edges = []
    for j, node in enumerate(order):
        predecessors = order[:j]
        current = set(predecessors)
        for candidate in predecessors:
            fit_cols = frozenset(current - {candidate})
            test_cols = frozenset(predecessors) if config.prune_test_all_predecessors else frozenset(current)
            if cache.test_pvalue(fit_cols, test_cols, node) >= alpha:
                current.remove(candidate)
        edges += [(parent, node) for parent in current]
    return Dag(data.num_columns, edges)


def _edge_key(dag: Dag) -> tuple:
    return tuple(sorted(dag.edges))


def discover(data: Dataset, config: DiscoveryConfig = DiscoveryConfig()) -> DiscoveryResult:
    """Run the full pipeline: order search, pruning, and the final model check.

    Every distinct pruned DAG is refit node-by-node on its final parents; it
    survives only if each node's residual is independent of its parents at
    level alpha and the residual columns pass the joint pairwise test. The
    verdict is Unique / NoModel / Multiple by the number of survivors. With
    `faithful_mode` and a Multiple verdict the minimal-edge DAGs are reported
    additionally as the Markov-equivalence-class estimate.
    """
    cache = FitCache(data, config)
    search = find_causal_orders(data, config, cache)

    unique_dags: list[Dag] = []
    seen = set()
    for order in search.orders:
        dag = prune_parents(data, order, config, cache)
        key = _edge_key(dag)
        if key not in seen:
            seen.add(key)
            unique_dags.append(dag)

    kept: list[tuple[Dag, dict[int, float]]] = []
    for dag in unique_dags:
        residual_matrix = np.empty((data.n, data.num_columns))
        node_pvalues = {}
        all_pass = True
        for i in range(data.num_columns):
            pa = frozenset(dag.parents(i))
            residual_matrix[:, i] = cache.residuals(pa, i)
            p = cache.test_pvalue(pa, pa, i)
            node_pvalues[i] = p
            if p < config.test.alpha:
                all_pass = False
        if not all_pass:
            continue
        if data.num_columns >= 2 and not joint_residual_independence(residual_matrix, config.test):
            continue
        kept.append((dag, node_pvalues))

    kept.sort(key=lambda pair: _edge_key(pair[0]))
    dags = tuple(dag for dag, _ in kept)
    traces = tuple(trace for _, trace in kept)
    verdict = (
        Verdict.NO_MODEL if not dags else (Verdict.UNIQUE if len(dags) == 1 else Verdict.MULTIPLE)
    )
    minimal = None
    if config.faithful_mode and verdict is Verdict.MULTIPLE:
        minimal = tuple(minimal_edge_dags(list(dags)))
    return DiscoveryResult(
        dags=dags,
        verdict=verdict,
        traces=traces,
        orders_explored=len(search.orders),
        truncated=search.truncated,
        minimal_edge_dags=minimal,
    )
