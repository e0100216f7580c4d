"""Shared test utilities: independent oracles and exhaustive enumerations.

The d-separation oracle here enumerates simple paths and applies the two
blocking rules directly; it deliberately shares no code with the package's
moralization-based implementation.
"""

from __future__ import annotations

import itertools
from collections import defaultdict

import numpy as np

from anmdag.graph import Dag


def descendants(dag: Dag, node: int) -> set[int]:
    out: set[int] = set()
    stack = [node]
    while stack:
        u = stack.pop()
        for v in dag.children(u):
            if v not in out:
                out.add(v)
                stack.append(v)
    return out


def _simple_paths(dag: Dag, a: int, b: int):
    adj = defaultdict(set)
    for i, j in dag.edges:
        adj[i].add(j)
        adj[j].add(i)
    path = [a]
    on_path = {a}

    def walk():
        u = path[-1]
        if u == b:
            yield list(path)
            return
        for v in sorted(adj[u]):
            if v not in on_path:
                path.append(v)
                on_path.add(v)
                yield from walk()
                path.pop()
                on_path.remove(v)

    yield from walk()


def _path_blocked(dag: Dag, path: list[int], s: frozenset[int]) -> bool:
    for k in range(1, len(path) - 1):
        prev, node, nxt = path[k - 1], path[k], path[k + 1]
        collider = (prev, node) in dag.edges and (nxt, node) in dag.edges
        if collider:
            if node not in s and not (descendants(dag, node) & s):
                return True
        elif node in s:
            return True
    return False


def d_separated_oracle(dag: Dag, a, b, s) -> bool:
    """Brute force: every simple path between a and b must be blocked by s."""
    a, b, s = frozenset(a), frozenset(b), frozenset(s)
    for start in sorted(a):
        for end in sorted(b):
            for path in _simple_paths(dag, start, end):
                if not _path_blocked(dag, path, s):
                    return False
    return True


def disjoint_triples(num_nodes: int):
    """All (A, B, S) with A, B nonempty and A, B, S pairwise disjoint."""
    for assignment in itertools.product(range(4), repeat=num_nodes):
        a = frozenset(i for i, tag in enumerate(assignment) if tag == 0)
        b = frozenset(i for i, tag in enumerate(assignment) if tag == 1)
        s = frozenset(i for i, tag in enumerate(assignment) if tag == 2)
        if a and b:
            yield a, b, s


def dsep_signature(dag: Dag) -> frozenset:
    """All d-separation statements of a DAG, for signature comparison."""
    from anmdag.graph import d_separated

    return frozenset(
        (a, b, s) for a, b, s in disjoint_triples(dag.num_nodes) if d_separated(dag, a, b, s)
    )


def philox(*entropy: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(list(entropy))))
