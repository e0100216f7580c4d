"""DAGs, d-separation, and Markov-equivalence utilities.

Nodes are integers 0..num_nodes-1; an edge (i, j) points from parent i to
child j. All objects are immutable values, so they are safe to share.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

ENUMERATION_MAX_NODES = 6


def _is_acyclic(num_nodes: int, edges: Iterable[tuple[int, int]]) -> bool:
    children: dict[int, list[int]] = {i: [] for i in range(num_nodes)}
    indeg = [0] * num_nodes
    for i, j in edges:
        children[i].append(j)
        indeg[j] += 1
    queue = deque(i for i in range(num_nodes) if indeg[i] == 0)
    seen = 0
    while queue:
        u = queue.popleft()
        seen += 1
        for v in children[u]:
            indeg[v] -= 1
            if indeg[v] == 0:
                queue.append(v)
    return seen == num_nodes


@dataclass(frozen=True)
class Dag:
    """Directed acyclic graph on nodes 0..num_nodes-1."""

    num_nodes: int
    edges: frozenset[tuple[int, int]]

    def __init__(self, num_nodes: int, edges: Iterable[tuple[int, int]] = ()):
        if num_nodes < 1:
            raise ValueError("num_nodes must be positive")
        edge_set = frozenset((int(i), int(j)) for i, j in edges)
        for i, j in edge_set:
            if i == j:
                raise ValueError(f"self-loop at node {i}")
            if not (0 <= i < num_nodes and 0 <= j < num_nodes):
                raise ValueError(f"edge ({i}, {j}) out of range for {num_nodes} nodes")
        if not _is_acyclic(num_nodes, edge_set):
            raise ValueError("edge set contains a cycle")
        object.__setattr__(self, "num_nodes", num_nodes)
        object.__setattr__(self, "edges", edge_set)

    def _check_node(self, i: int) -> None:
        if not (0 <= i < self.num_nodes):
            raise ValueError(f"node {i} out of range for {self.num_nodes} nodes")

    def parents(self, i: int) -> frozenset[int]:
        self._check_node(i)
        return frozenset(a for a, b in self.edges if b == i)

    def children(self, i: int) -> frozenset[int]:
        self._check_node(i)
        return frozenset(b for a, b in self.edges if a == i)

    def topological_order(self) -> tuple[int, ...]:
        indeg = {i: 0 for i in range(self.num_nodes)}
        for _, j in self.edges:
            indeg[j] += 1
        queue = deque(sorted(i for i in indeg if indeg[i] == 0))
        order = []
        while queue:
            u = queue.popleft()
            order.append(u)
            for v in sorted(self.children(u)):
                indeg[v] -= 1
                if indeg[v] == 0:
                    queue.append(v)
        return tuple(order)

    def ancestors(self, nodes: Iterable[int]) -> frozenset[int]:
        """Nodes with a directed path into `nodes`, including `nodes` themselves."""
        result = set(nodes)
        frontier = deque(result)
        while frontier:
            u = frontier.popleft()
            for p in self.parents(u):
                if p not in result:
                    result.add(p)
                    frontier.append(p)
        return frozenset(result)


def parents(dag: Dag, i: int) -> frozenset[int]:
    return dag.parents(i)


def d_separated(dag: Dag, a: Iterable[int], b: Iterable[int], s: Iterable[int]) -> bool:
    """True iff every path between `a` and `b` is blocked by `s`.

    Uses reachability on the moralized ancestral graph: restrict to ancestors
    of a|b|s, marry co-parents, drop directions, delete s, and check whether
    a can still reach b.
    """
    a, b, s = frozenset(a), frozenset(b), frozenset(s)
    if not a or not b:
        raise ValueError("a and b must be nonempty")
    if a & b or a & s or b & s:
        raise ValueError("a, b, s must be pairwise disjoint")
    for i in a | b | s:
        dag._check_node(i)

    keep = dag.ancestors(a | b | s)
    adj: dict[int, set[int]] = {i: set() for i in keep}
    for i, j in dag.edges:
        if i in keep and j in keep:
            adj[i].add(j)
            adj[j].add(i)
    for j in keep:
        pa = [p for p in dag.parents(j) if p in keep]
        for p, q in itertools.combinations(pa, 2):
            adj[p].add(q)
            adj[q].add(p)

    frontier = deque(a)
    visited = set(a)
    while frontier:
        u = frontier.popleft()
        if u in b:
            return False
        for v in adj[u]:
            if v not in visited and v not in s:
                visited.add(v)
                frontier.append(v)
    return True


def skeleton(dag: Dag) -> frozenset[frozenset[int]]:
    return frozenset(frozenset(e) for e in dag.edges)


def immoralities(dag: Dag) -> frozenset[tuple[int, int, int]]:
    """Triples (a, c, child) with a -> child <- c, a < c, and a, c non-adjacent."""
    skel = skeleton(dag)
    found = set()
    for child in range(dag.num_nodes):
        pa = sorted(dag.parents(child))
        for a, c in itertools.combinations(pa, 2):
            if frozenset((a, c)) not in skel:
                found.add((a, c, child))
    return frozenset(found)


def markov_equivalent(g1: Dag, g2: Dag) -> bool:
    """Verma-Pearl criterion: identical skeletons and identical immoralities."""
    if g1.num_nodes != g2.num_nodes:
        raise ValueError("node counts differ")
    return skeleton(g1) == skeleton(g2) and immoralities(g1) == immoralities(g2)


def markov_equivalence_class(dag: Dag) -> list[Dag]:
    """All DAGs Markov equivalent to `dag`, the input included.

    Enumerates the 2^m orientations of the skeleton and keeps the acyclic
    ones with the same immorality set; equivalent graphs share the skeleton,
    so nothing outside it needs to be visited.
    """
    if dag.num_nodes > ENUMERATION_MAX_NODES:
        raise ValueError(f"enumeration supported up to {ENUMERATION_MAX_NODES} nodes")
    undirected = sorted(tuple(sorted(e)) for e in skeleton(dag))
    target = immoralities(dag)
    out = []
    for orient in itertools.product((0, 1), repeat=len(undirected)):
        edges = [(i, j) if flip == 0 else (j, i) for (i, j), flip in zip(undirected, orient)]
        if not _is_acyclic(dag.num_nodes, edges):
            continue
        candidate = Dag(dag.num_nodes, edges)
        if immoralities(candidate) == target:
            out.append(candidate)
    return out


def minimal_edge_dags(dags: Sequence[Dag]) -> list[Dag]:
    """Sublist attaining the minimum edge count, in the original order."""
    if not dags:
        raise ValueError("empty DAG list")
    fewest = min(len(d.edges) for d in dags)
    return [d for d in dags if len(d.edges) == fewest]


def all_dags(num_nodes: int) -> list[Dag]:
    """Every DAG on the given nodes. Exponential; intended for num_nodes <= 5."""
    if num_nodes > ENUMERATION_MAX_NODES:
        raise ValueError(f"enumeration supported up to {ENUMERATION_MAX_NODES} nodes")
    pairs = [(i, j) for i in range(num_nodes) for j in range(num_nodes) if i != j]
    out = []
    for mask in range(1 << len(pairs)):
        edges = [p for bit, p in enumerate(pairs) if mask >> bit & 1]
        if _is_acyclic(num_nodes, edges):
            out.append(Dag(num_nodes, edges))
    return out


def _sorted_edges(dag: Dag) -> list[tuple[int, int]]:
    return sorted(dag.edges)


def dag_to_text(dag: Dag, names: Sequence[str]) -> str:
    """One edge per line, "parent -> child", using the given column names."""
    if len(names) != dag.num_nodes:
        raise ValueError("name count must equal num_nodes")
    return "".join(f"{names[i]} -> {names[j]}\n" for i, j in _sorted_edges(dag))


def dag_from_text(text: str, names: Sequence[str]) -> Dag:
    index = {name: k for k, name in enumerate(names)}
    edges = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        left, arrow, right = line.partition("->")
        if not arrow:
            raise ValueError(f"malformed edge line: {line!r}")
        edges.append((index[left.strip()], index[right.strip()]))
    return Dag(len(names), edges)


def dag_to_dot(dag: Dag, names: Sequence[str]) -> str:
    if len(names) != dag.num_nodes:
        raise ValueError("name count must equal num_nodes")
    lines = ["digraph {"]
    lines += [f'  "{name}";' for name in names]
    lines += [f'  "{names[i]}" -> "{names[j]}";' for i, j in _sorted_edges(dag)]
    lines.append("}")
    return "\n".join(lines) + "\n"
