import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anmdag.graph import (
    Dag,
    all_dags,
    d_separated,
    dag_from_text,
    dag_to_dot,
    dag_to_text,
    immoralities,
    markov_equivalence_class,
    markov_equivalent,
    minimal_edge_dags,
    skeleton,
)
from helpers import d_separated_oracle, disjoint_triples, dsep_signature

CHAIN = Dag(3, [(0, 1), (1, 2)])
COLLIDER = Dag(3, [(0, 1), (2, 1)])
DIAMOND = Dag(4, [(0, 1), (0, 2), (1, 3), (2, 3)])


def random_dag(num_nodes: int, edge_bits: int, perm_index: int) -> Dag:
    perms = list(itertools.permutations(range(num_nodes)))
    order = perms[perm_index % len(perms)]
    pairs = [
        (order[i], order[j]) for i in range(num_nodes) for j in range(i + 1, num_nodes)
    ]
    return Dag(num_nodes, [p for k, p in enumerate(pairs) if edge_bits >> k & 1])


class TestDagConstruction:
    def test_rejects_self_loop(self):
        with pytest.raises(ValueError, match="self-loop"):
            Dag(2, [(0, 0)])

    def test_rejects_cycle(self):
        with pytest.raises(ValueError, match="cycle"):
            Dag(3, [(0, 1), (1, 2), (2, 0)])

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError, match="out of range"):
            Dag(2, [(0, 5)])

    def test_parents_of_chain(self):
        assert CHAIN.parents(1) == {0}
        assert CHAIN.parents(0) == frozenset()

    def test_parents_of_diamond_sink(self):
        assert DIAMOND.parents(3) == {1, 2}

    def test_parents_invalid_node(self):
        with pytest.raises(ValueError):
            CHAIN.parents(7)

    def test_topological_order_respects_edges(self):
        order = DIAMOND.topological_order()
        pos = {node: k for k, node in enumerate(order)}
        assert all(pos[i] < pos[j] for i, j in DIAMOND.edges)


class TestDSeparation:
    def test_chain_blocked_by_middle(self):
        assert d_separated(CHAIN, {0}, {2}, {1})

    def test_collider_opened_by_conditioning(self):
        assert not d_separated(COLLIDER, {0}, {2}, {1})
        assert d_separated(COLLIDER, {0}, {2}, set())

    def test_diamond_root_blocks(self):
        # both paths 1<-0->2 and 1->3<-2 are blocked given {0}
        assert d_separated(DIAMOND, {1}, {2}, {0})
        assert d_separated_oracle(DIAMOND, {1}, {2}, {0})

    def test_overlapping_sets_error(self):
        with pytest.raises(ValueError, match="disjoint"):
            d_separated(CHAIN, {0}, {2}, {0})

    def test_empty_side_error(self):
        with pytest.raises(ValueError, match="nonempty"):
            d_separated(CHAIN, set(), {2}, {1})

    def test_exhaustive_three_nodes_matches_oracle_and_symmetry(self):
        for dag in all_dags(3):
            for a, b, s in disjoint_triples(3):
                got = d_separated(dag, a, b, s)
                assert got == d_separated_oracle(dag, a, b, s)
                assert got == d_separated(dag, b, a, s)

    @settings(max_examples=120, deadline=None)
    @given(
        edge_bits=st.integers(0, 2**10 - 1),
        perm_index=st.integers(0, 119),
        assignment=st.lists(st.integers(0, 3), min_size=5, max_size=5),
    )
    def test_five_node_samples_match_oracle(self, edge_bits, perm_index, assignment):
        dag = random_dag(5, edge_bits, perm_index)
        a = frozenset(i for i, t in enumerate(assignment) if t == 0)
        b = frozenset(i for i, t in enumerate(assignment) if t == 1)
        s = frozenset(i for i, t in enumerate(assignment) if t == 2)
        if not a or not b:
            return
        assert d_separated(dag, a, b, s) == d_separated_oracle(dag, a, b, s)

    def test_edge_removal_never_destroys_dseparation_three_nodes(self):
        signatures = {dag.edges: dsep_signature(dag) for dag in all_dags(3)}
        for edges, sig in signatures.items():
            for edge in edges:
                assert sig <= signatures[edges - {edge}]


class TestMarkovEquivalence:
    def test_single_edge_reversal_equivalent(self):
        assert markov_equivalent(Dag(2, [(0, 1)]), Dag(2, [(1, 0)]))

    def test_chain_vs_collider_not_equivalent(self):
        assert not markov_equivalent(CHAIN, Dag(3, [(0, 1), (2, 1)]))

    def test_reflexive(self):
        assert markov_equivalent(DIAMOND, DIAMOND)

    def test_node_count_mismatch(self):
        with pytest.raises(ValueError):
            markov_equivalent(CHAIN, Dag(2, [(0, 1)]))

    def test_equivalence_relation_and_signature_match_on_three_nodes(self):
        dags = all_dags(3)
        sigs = [dsep_signature(d) for d in dags]
        for (g1, s1), (g2, s2) in itertools.combinations(zip(dags, sigs), 2):
            assert markov_equivalent(g1, g2) == (s1 == s2)

    def test_immoralities_of_collider(self):
        assert immoralities(COLLIDER) == {(0, 2, 1)}
        assert immoralities(CHAIN) == frozenset()

    def test_skeleton_ignores_direction(self):
        assert skeleton(Dag(2, [(0, 1)])) == skeleton(Dag(2, [(1, 0)]))


class TestEquivalenceClass:
    def test_single_edge_class(self):
        got = markov_equivalence_class(Dag(2, [(0, 1)]))
        assert {d.edges for d in got} == {frozenset({(0, 1)}), frozenset({(1, 0)})}

    def test_collider_class_is_singleton(self):
        assert markov_equivalence_class(COLLIDER) == [COLLIDER]

    def test_chain_class_has_three_members(self):
        got = markov_equivalence_class(CHAIN)
        brute = [d for d in all_dags(3) if markov_equivalent(d, CHAIN)]
        assert sorted(d.edges for d in got) == sorted(d.edges for d in brute)
        assert len(got) == 3

    def test_always_contains_input(self):
        for dag in all_dags(3):
            assert dag in markov_equivalence_class(dag)

    def test_enumeration_bound(self):
        with pytest.raises(ValueError, match="up to 6"):
            markov_equivalence_class(Dag(7))


class TestMinimalEdges:
    def test_prefers_fewest_edges(self):
        single = Dag(2, [(0, 1)])
        empty = Dag(2)
        assert minimal_edge_dags([single, empty]) == [empty]

    def test_ties_kept_in_order(self):
        forward = Dag(2, [(0, 1)])
        backward = Dag(2, [(1, 0)])
        assert minimal_edge_dags([forward, backward]) == [forward, backward]

    def test_empty_list_error(self):
        with pytest.raises(ValueError):
            minimal_edge_dags([])


class TestEnumeration:
    @pytest.mark.parametrize("n,count", [(1, 1), (2, 3), (3, 25), (4, 543)])
    def test_dag_counts(self, n, count):
        assert len(all_dags(n)) == count


class TestTextFormats:
    def test_text_round_trip(self):
        names = ("X1", "X2", "X3", "X4")
        text = dag_to_text(DIAMOND, names)
        assert "X1 -> X2" in text
        assert dag_from_text(text, names) == DIAMOND

    def test_dot_contains_all_nodes_and_edges(self):
        dot = dag_to_dot(CHAIN, ("A", "B", "C"))
        assert dot.startswith("digraph {")
        assert '"A" -> "B";' in dot and '"B" -> "C";' in dot
        assert '"C";' in dot

    def test_malformed_text(self):
        with pytest.raises(ValueError):
            dag_from_text("X1 X2", ("X1", "X2"))
