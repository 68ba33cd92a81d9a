import itertools

import pytest

from ginlab.graphs import (
    CategoricalFeatures,
    CounterexamplePair,
    Graph,
    GraphStructureError,
    Multiset,
    OracleSizeError,
    brute_force_isomorphic,
    complete_graph,
    counterexample_pairs,
    cycle_graph,
    dedup_by_isomorphism,
    disjoint_union,
    enumerate_connected_graphs,
    path_graph,
    permute_graph,
    random_graph,
    star_graph,
    uniform_categorical,
)


def test_from_edges_deduplicates_and_symmetrizes():
    g = Graph.from_edges(3, [(0, 1), (1, 0), (1, 2), (1, 2)])
    assert g.adjacency == ((1,), (0, 2), (1,))
    assert g.num_edges == 2


def test_asymmetric_adjacency_rejected():
    with pytest.raises(GraphStructureError, match="asymmetric"):
        Graph(2, ((1,), ()), uniform_categorical(2))


def test_neighbor_out_of_range_rejected():
    with pytest.raises(GraphStructureError):
        Graph.from_edges(2, [(0, 5)])


def test_self_loop_rejected_unless_flagged():
    with pytest.raises(GraphStructureError, match="self-loop"):
        Graph.from_edges(2, [(0, 0)])
    g = Graph.from_edges(2, [(0, 0), (0, 1)], allow_self_loops=True)
    assert g.adjacency[0] == (0, 1)


def test_duplicate_edge_in_adjacency_rejected():
    with pytest.raises(GraphStructureError, match="duplicate"):
        Graph(2, ((1, 1), (0, 0)), uniform_categorical(2))


def test_feature_coverage_checked():
    with pytest.raises(GraphStructureError, match="features cover"):
        Graph(3, ((), (), ()), uniform_categorical(2))


def test_categorical_label_bounds():
    with pytest.raises(GraphStructureError):
        CategoricalFeatures(labels=(0, 3), vocab_size=3)
    with pytest.raises(GraphStructureError):
        CategoricalFeatures(labels=(0, 5), vocab_size=3)


# --- multiset


def test_multiset_order_free_equality_and_size():
    a = Multiset.from_iterable(["r", "g", "r"])
    b = Multiset.from_iterable(["g", "r", "r"])
    assert a == b
    assert hash(a) == hash(b)
    assert a.size == 3
    assert len(a) == 3
    assert a.underlying_set == frozenset({"g", "r"})
    assert sorted(a.elements()) == ["g", "r", "r"]


def test_multiset_size_is_multiplicity_sum():
    m = Multiset({"x": 2, "y": 5})
    assert m.size == sum(mult for _, mult in m.items())


def test_multiset_rejects_nonpositive_multiplicity():
    with pytest.raises(ValueError):
        Multiset({"x": 0})
    with pytest.raises(ValueError):
        Multiset({"x": -2})


def test_multiset_scaled_shares_underlying_set():
    m = Multiset({"x": 1, "y": 2})
    s = m.scaled(3)
    assert s.underlying_set == m.underlying_set
    assert s.multiplicity("y") == 6
    with pytest.raises(ValueError):
        m.scaled(0)


# --- constructions


def test_random_graph_p_zero_gives_isolated_nodes():
    g = random_graph(5, 0.0, seed=7)
    assert g.num_edges == 0
    assert g.num_nodes == 5


def test_random_graph_p_one_gives_complete_graph():
    g = random_graph(4, 1.0, seed=0)
    assert g.num_edges == 6
    assert g == complete_graph(4)


def test_random_graph_deterministic_per_seed():
    assert random_graph(8, 0.3, seed=42) == random_graph(8, 0.3, seed=42)
    assert random_graph(8, 0.3, seed=42) != random_graph(8, 0.3, seed=43)


def test_random_graph_rejects_bad_probability():
    with pytest.raises(ValueError):
        random_graph(4, 1.5, seed=0)


def test_disjoint_union_counts():
    g = disjoint_union(cycle_graph(3), cycle_graph(3))
    assert g.num_nodes == 6
    assert g.num_edges == 6
    assert g.degrees() == (2,) * 6


def test_permute_graph_preserves_structure():
    g = star_graph(3)
    pg = permute_graph(g, [3, 0, 1, 2])
    assert sorted(pg.degrees()) == sorted(g.degrees())
    assert pg.degree(3) == 3  # old center moved to index 3
    with pytest.raises(GraphStructureError):
        permute_graph(g, [0, 0, 1, 2])


# --- enumeration, with an independent in-test oracle


def _oracle_connected_edge_sets(n):
    """Brute force straight from the definition: all edge subsets, keep the
    connected ones (path search over plain sets)."""
    pairs = list(itertools.combinations(range(n), 2))
    keep = []
    for r in range(len(pairs) + 1):
        for subset in itertools.combinations(pairs, r):
            adj = {v: set() for v in range(n)}
            for u, v in subset:
                adj[u].add(v)
                adj[v].add(u)
            seen = {0}
            stack = [0]
            while stack:
                for w in adj[stack.pop()]:
                    if w not in seen:
                        seen.add(w)
                        stack.append(w)
            if len(seen) == n:
                keep.append(frozenset(subset))
    return set(keep)


@pytest.mark.parametrize("n,count", [(1, 1), (2, 1), (3, 4), (4, 38)])
def test_enumerate_connected_graphs_matches_definition(n, count):
    got = enumerate_connected_graphs(n)
    got_sets = {frozenset(g.edges()) for g in got}
    assert len(got) == len(got_sets) == count
    assert got_sets == _oracle_connected_edge_sets(n)


def test_enumeration_bound_enforced():
    with pytest.raises(OracleSizeError):
        enumerate_connected_graphs(8)


# --- isomorphism oracle


def test_oracle_c6_vs_two_triangles():
    c6 = cycle_graph(6)
    cc = disjoint_union(cycle_graph(3), cycle_graph(3))
    assert not brute_force_isomorphic(c6, cc)


def test_oracle_relabeled_triangle():
    t = cycle_graph(3)
    assert brute_force_isomorphic(t, permute_graph(t, [2, 0, 1]))


def test_oracle_same_seed_random_graphs():
    assert brute_force_isomorphic(random_graph(7, 0.4, 5), random_graph(7, 0.4, 5))


def test_oracle_respects_node_features():
    f1 = CategoricalFeatures(labels=(0, 1), vocab_size=2)
    f2 = CategoricalFeatures(labels=(1, 0), vocab_size=2)
    g1 = Graph.from_edges(2, [(0, 1)], f1)
    g2 = Graph.from_edges(2, [(0, 1)], f2)
    assert brute_force_isomorphic(g1, g2)  # swap map exists
    f3 = CategoricalFeatures(labels=(1, 1), vocab_size=2)
    assert not brute_force_isomorphic(g1, Graph.from_edges(2, [(0, 1)], f3))


def test_oracle_size_refusal():
    g = random_graph(11, 0.2, 0)
    with pytest.raises(OracleSizeError):
        brute_force_isomorphic(g, g)


def test_oracle_is_equivalence_relation_on_small_graphs():
    graphs = enumerate_connected_graphs(4)
    # reflexive on all of them
    for g in graphs[:20]:
        assert brute_force_isomorphic(g, g)
    # symmetric + transitivity spot checks over a fixed triple family
    reps = dedup_by_isomorphism(graphs)
    assert len(reps) == 6  # connected graphs on 4 vertices up to isomorphism
    for g1 in graphs[:12]:
        for g2 in graphs[12:24]:
            assert brute_force_isomorphic(g1, g2) == brute_force_isomorphic(g2, g1)
    perms = list(itertools.permutations(range(4)))
    a = graphs[7]
    b = permute_graph(a, list(perms[5]))
    c = permute_graph(a, list(perms[11]))
    assert brute_force_isomorphic(a, b)
    assert brute_force_isomorphic(b, c)
    assert brute_force_isomorphic(a, c)


def test_dedup_counts_up_to_isomorphism():
    n_to_classes = {1: 1, 2: 1, 3: 2, 4: 6, 5: 21}
    for n, expect in n_to_classes.items():
        reps = dedup_by_isomorphism(enumerate_connected_graphs(n))
        assert len(reps) == expect


# --- counterexample pairs


def test_counterexample_pairs_fig3a():
    pairs = {p.name: p for p in counterexample_pairs()}
    p = pairs["fig3a"]
    assert isinstance(p, CounterexamplePair)
    f1, f2 = p.g1.features, p.g2.features
    assert f1.vocab_size == 1 and f2.vocab_size == 1  # same feature everywhere
    assert p.g1.degree(p.v1) == 2
    assert p.g2.degree(p.v2) == 3


def test_counterexample_pairs_fig3b_multisets():
    p = {q.name: q for q in counterexample_pairs()}["fig3b"]
    nb1 = Multiset.from_iterable(p.g1.features.labels[u] for u in p.g1.adjacency[p.v1])
    nb2 = Multiset.from_iterable(p.g2.features.labels[u] for u in p.g2.adjacency[p.v2])
    assert nb1 == Multiset({1: 1, 2: 1})
    assert nb2 == Multiset({1: 1, 2: 2})


def test_counterexample_pairs_fig3c_doubled_multiset():
    p = {q.name: q for q in counterexample_pairs()}["fig3c"]
    nb1 = Multiset.from_iterable(p.g1.features.labels[u] for u in p.g1.adjacency[p.v1])
    nb2 = Multiset.from_iterable(p.g2.features.labels[u] for u in p.g2.adjacency[p.v2])
    assert nb2 == nb1.scaled(2)
    # the whole second graph doubles every node type
    from collections import Counter

    c1 = Counter(p.g1.features.labels)
    c2 = Counter(p.g2.features.labels)
    assert c2 == {k: 2 * v for k, v in c1.items()}


def test_counterexample_pairs_c6_vs_2c3_regularity():
    p = {q.name: q for q in counterexample_pairs()}["c6_vs_2c3"]
    assert p.g1.num_nodes == p.g2.num_nodes == 6
    assert p.g1.degrees() == (2,) * 6
    assert p.g2.degrees() == (2,) * 6
    assert not brute_force_isomorphic(p.g1, p.g2)


def test_path_and_star_shapes():
    assert path_graph(4).degrees() == (1, 2, 2, 1)
    assert star_graph(3).degrees() == (3, 1, 1, 1)
