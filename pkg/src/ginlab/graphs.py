"""Graph and multiset data model, synthetic constructions, and a brute-force
isomorphism oracle for desk-scale ground truth."""

from __future__ import annotations

import itertools
import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

MAX_ORACLE_NODES = 10
MAX_ENUMERATION_NODES = 7


class GraphStructureError(ValueError):
    """A graph violates a structural invariant (symmetry, bounds, self-loops)."""


class OracleSizeError(ValueError):
    """Exhaustive search refused because the graph exceeds the size bound."""


@dataclass(frozen=True)
class CategoricalFeatures:
    """One integer label per node, drawn from a fixed vocabulary."""

    labels: tuple[int, ...]
    vocab_size: int

    def __post_init__(self):
        if self.vocab_size < 1:
            raise GraphStructureError("vocabulary size must be >= 1")
        for i, lab in enumerate(self.labels):
            if not 0 <= lab < self.vocab_size:
                raise GraphStructureError(
                    f"node {i} has label {lab} outside vocabulary of size {self.vocab_size}"
                )

    def node_key(self, v: int):
        return ("cat", self.labels[v])


@dataclass(frozen=True)
class DenseFeatures:
    """One real-valued vector per node; all vectors share a dimension."""

    vectors: tuple[tuple[float, ...], ...]
    dim: int

    def __post_init__(self):
        for i, vec in enumerate(self.vectors):
            if len(vec) != self.dim:
                raise GraphStructureError(
                    f"node {i} has a {len(vec)}-dim vector, expected {self.dim}"
                )

    def node_key(self, v: int):
        return ("dense", self.vectors[v])


NodeFeatures = CategoricalFeatures | DenseFeatures


def uniform_categorical(num_nodes: int) -> CategoricalFeatures:
    """All nodes share label 0 from a one-symbol vocabulary."""
    return CategoricalFeatures(labels=(0,) * num_nodes, vocab_size=1)


@dataclass(frozen=True)
class Graph:
    """Immutable undirected graph with per-node features and an optional class id.

    Adjacency is a per-node sorted tuple of neighbor indices; symmetry, index
    bounds, duplicate edges, and self-loops are checked on construction.
    """

    num_nodes: int
    adjacency: tuple[tuple[int, ...], ...]
    features: NodeFeatures
    label: int | None = None
    allow_self_loops: bool = field(default=False, compare=False)

    def __post_init__(self):
        if self.num_nodes < 0:
            raise GraphStructureError("node count must be >= 0")
        if len(self.adjacency) != self.num_nodes:
            raise GraphStructureError(
                f"adjacency has {len(self.adjacency)} rows for {self.num_nodes} nodes"
            )
        n_feat = len(
            self.features.labels
            if isinstance(self.features, CategoricalFeatures)
            else self.features.vectors
        )
        if n_feat != self.num_nodes:
            raise GraphStructureError(
                f"features cover {n_feat} nodes, graph has {self.num_nodes}"
            )
        for v, nbrs in enumerate(self.adjacency):
            if list(nbrs) != sorted(nbrs):
                raise GraphStructureError(f"neighbor list of node {v} is not sorted")
            for i in range(1, len(nbrs)):
                if nbrs[i] == nbrs[i - 1]:
                    raise GraphStructureError(f"duplicate edge at node {v}")
            for u in nbrs:
                if not 0 <= u < self.num_nodes:
                    raise GraphStructureError(
                        f"node {v} lists neighbor {u} outside [0, {self.num_nodes})"
                    )
                if u == v and not self.allow_self_loops:
                    raise GraphStructureError(f"self-loop at node {v} (not permitted)")
                if u != v and v not in self.adjacency[u]:
                    raise GraphStructureError(
                        f"asymmetric adjacency: {v}->{u} present, {u}->{v} missing"
                    )

    @staticmethod
    def from_edges(
        num_nodes: int,
        edges: Iterable[tuple[int, int]],
        features: NodeFeatures | None = None,
        label: int | None = None,
        allow_self_loops: bool = False,
    ) -> "Graph":
        """Build a graph from an edge list; edges are deduplicated and symmetrized."""
        nbrs: list[set[int]] = [set() for _ in range(num_nodes)]
        for u, v in edges:
            if not (0 <= u < num_nodes and 0 <= v < num_nodes):
                raise GraphStructureError(f"edge ({u}, {v}) outside [0, {num_nodes})")
            if u == v:
                if not allow_self_loops:
                    raise GraphStructureError(f"self-loop at node {u} (not permitted)")
                nbrs[u].add(u)
            else:
                nbrs[u].add(v)
                nbrs[v].add(u)
        if features is None:
            features = uniform_categorical(num_nodes)
        return Graph(
            num_nodes=num_nodes,
            adjacency=tuple(tuple(sorted(s)) for s in nbrs),
            features=features,
            label=label,
            allow_self_loops=allow_self_loops,
        )

    @property
    def num_edges(self) -> int:
        loops = sum(1 for v, nbrs in enumerate(self.adjacency) if v in nbrs)
        return (sum(len(nbrs) for nbrs in self.adjacency) + loops) // 2

    def edges(self) -> list[tuple[int, int]]:
        return [(v, u) for v in range(self.num_nodes) for u in self.adjacency[v] if u >= v]

    def degree(self, v: int) -> int:
        return len(self.adjacency[v])

    def degrees(self) -> tuple[int, ...]:
        return tuple(len(nbrs) for nbrs in self.adjacency)

    def with_features(self, features: NodeFeatures) -> "Graph":
        return Graph(self.num_nodes, self.adjacency, features, self.label, self.allow_self_loops)

    def with_label(self, label: int | None) -> "Graph":
        return Graph(self.num_nodes, self.adjacency, self.features, label, self.allow_self_loops)


@dataclass(frozen=True)
class Dataset:
    """A nonempty collection of labeled graphs with a contiguous class space."""

    graphs: tuple[Graph, ...]
    num_classes: int
    name: str

    def __post_init__(self):
        if not self.graphs:
            raise GraphStructureError(f"dataset {self.name!r} is empty")
        for i, g in enumerate(self.graphs):
            if g.label is None or not 0 <= g.label < self.num_classes:
                raise GraphStructureError(
                    f"graph {i} in {self.name!r} has label {g.label}, "
                    f"expected 0..{self.num_classes - 1}"
                )

    def __len__(self) -> int:
        return len(self.graphs)

    def labels(self) -> tuple[int, ...]:
        return tuple(g.label for g in self.graphs)  # type: ignore[misc]

    def avg_nodes(self) -> float:
        return sum(g.num_nodes for g in self.graphs) / len(self.graphs)


class Multiset:
    """Order-free element->multiplicity map over a canonically orderable element type."""

    __slots__ = ("_entries",)

    def __init__(self, entries: dict | None = None):
        ent = dict(entries or {})
        for key, mult in ent.items():
            if not isinstance(mult, int) or mult < 1:
                raise ValueError(f"multiplicity of {key!r} must be a positive integer, got {mult!r}")
        self._entries = ent

    @staticmethod
    def from_iterable(items: Iterable) -> "Multiset":
        return Multiset(dict(Counter(items)))

    @property
    def entries(self) -> dict:
        return dict(self._entries)

    @property
    def size(self) -> int:
        return sum(self._entries.values())

    @property
    def underlying_set(self) -> frozenset:
        return frozenset(self._entries)

    def multiplicity(self, key) -> int:
        return self._entries.get(key, 0)

    def items(self):
        return self._entries.items()

    def elements(self) -> Iterator:
        for key, mult in self._entries.items():
            for _ in range(mult):
                yield key

    def scaled(self, k: int) -> "Multiset":
        """Same underlying set with every multiplicity multiplied by k >= 1."""
        if k < 1:
            raise ValueError("scale factor must be >= 1")
        return Multiset({key: mult * k for key, mult in self._entries.items()})

    def __eq__(self, other) -> bool:
        return isinstance(other, Multiset) and self._entries == other._entries

    def __hash__(self) -> int:
        return hash(tuple(sorted(self._entries.items())))

    def __len__(self) -> int:
        return self.size

    def __repr__(self) -> str:
        inner = ", ".join(f"{k!r}: {m}" for k, m in sorted(self._entries.items(), key=repr))
        return f"Multiset({{{inner}}})"


# ---------------------------------------------------------------------------
# constructions


def cycle_graph(n: int, features: NodeFeatures | None = None) -> Graph:
    edges = [(i, (i + 1) % n) for i in range(n)] if n >= 3 else []
    return Graph.from_edges(n, edges, features)


def path_graph(n: int, features: NodeFeatures | None = None) -> Graph:
    return Graph.from_edges(n, [(i, i + 1) for i in range(n - 1)], features)


def star_graph(num_leaves: int, features: NodeFeatures | None = None) -> Graph:
    """Center is node 0; leaves are 1..num_leaves."""
    return Graph.from_edges(num_leaves + 1, [(0, i) for i in range(1, num_leaves + 1)], features)


def complete_graph(n: int, features: NodeFeatures | None = None) -> Graph:
    return Graph.from_edges(n, itertools.combinations(range(n), 2), features)


def disjoint_union(g1: Graph, g2: Graph) -> Graph:
    """Union of two graphs with categorical features over a shared vocabulary."""
    f1, f2 = g1.features, g2.features
    if not (isinstance(f1, CategoricalFeatures) and isinstance(f2, CategoricalFeatures)):
        raise GraphStructureError("disjoint_union requires categorical features")
    vocab = max(f1.vocab_size, f2.vocab_size)
    n = g1.num_nodes + g2.num_nodes
    edges = [(u, v) for u, v in g1.edges()] + [
        (u + g1.num_nodes, v + g1.num_nodes) for u, v in g2.edges()
    ]
    feats = CategoricalFeatures(labels=f1.labels + f2.labels, vocab_size=vocab)
    return Graph.from_edges(n, edges, feats)


def permute_graph(g: Graph, perm: Sequence[int]) -> Graph:
    """Relabel nodes: node v becomes perm[v]."""
    if sorted(perm) != list(range(g.num_nodes)):
        raise GraphStructureError("perm is not a permutation of the node set")
    edges = [(perm[u], perm[v]) for u, v in g.edges()]
    inv = [0] * g.num_nodes
    for old, new in enumerate(perm):
        inv[new] = old
    if isinstance(g.features, CategoricalFeatures):
        feats: NodeFeatures = CategoricalFeatures(
            labels=tuple(g.features.labels[inv[v]] for v in range(g.num_nodes)),
            vocab_size=g.features.vocab_size,
        )
    else:
        feats = DenseFeatures(
            vectors=tuple(g.features.vectors[inv[v]] for v in range(g.num_nodes)),
            dim=g.features.dim,
        )
    return Graph.from_edges(
        g.num_nodes, edges, feats, g.label, allow_self_loops=g.allow_self_loops
    )


def random_graph(n: int, edge_prob: float, seed: int) -> Graph:
    """Erdos-Renyi graph, deterministic for a fixed seed, uniform features."""
    if not 0.0 <= edge_prob <= 1.0:
        raise ValueError(f"edge probability {edge_prob} outside [0, 1]")
    rng = random.Random(seed)
    edges = [
        (u, v)
        for u in range(n)
        for v in range(u + 1, n)
        if rng.random() < edge_prob
    ]
    return Graph.from_edges(n, edges)


@dataclass(frozen=True)
class CounterexamplePair:
    """Named pair of graphs with focal nodes whose neighborhoods differ as multisets."""

    name: str
    g1: Graph
    g2: Graph
    v1: int
    v2: int


def counterexample_pairs() -> list[CounterexamplePair]:
    """Hard pairs for mean/max aggregation and for color refinement itself.

    fig3a: uniform-feature stars whose centers see 2 vs 3 identical neighbors.
    fig3b: focal node sees {g, r} vs {g, r, r}.
    fig3c: focal node sees {g, r} vs {g, g, r, r}; the second graph doubles
           every node type so per-type proportions match the first exactly.
    c6_vs_2c3: 6-cycle vs two triangles, both 2-regular on 6 uniform nodes.
    """
    uniform = None  # from_edges default
    fig3a = CounterexamplePair(
        "fig3a", star_graph(2, uniform), star_graph(3, uniform), 0, 0
    )

    # vocabulary: 0 = blue focal, 1 = green, 2 = red
    def colored(n, edges, labels):
        return Graph.from_edges(
            n, edges, CategoricalFeatures(labels=tuple(labels), vocab_size=3)
        )

    b_left = colored(3, [(0, 1), (0, 2)], [0, 1, 2])
    b_right = colored(4, [(0, 1), (0, 2), (0, 3)], [0, 1, 2, 2])
    fig3b = CounterexamplePair("fig3b", b_left, b_right, 0, 0)

    c_left = colored(3, [(0, 1), (0, 2)], [0, 1, 2])
    # two focal nodes each adjacent to two greens and two reds
    c_right = colored(
        6,
        [(0, 2), (0, 3), (0, 4), (0, 5), (1, 2), (1, 3), (1, 4), (1, 5)],
        [0, 0, 1, 1, 2, 2],
    )
    fig3c = CounterexamplePair("fig3c", c_left, c_right, 0, 0)

    c6 = cycle_graph(6)
    two_c3 = disjoint_union(cycle_graph(3), cycle_graph(3))
    return [fig3a, fig3b, fig3c, CounterexamplePair("c6_vs_2c3", c6, two_c3, 0, 0)]


# ---------------------------------------------------------------------------
# exhaustive machinery


def enumerate_connected_graphs(n: int) -> list[Graph]:
    """Every connected labeled graph on n vertices, uniform features.

    No isomorphism dedup here; callers dedup with the oracle.
    """
    if n > MAX_ENUMERATION_NODES:
        raise OracleSizeError(
            f"refusing to enumerate graphs on {n} > {MAX_ENUMERATION_NODES} nodes"
        )
    if n == 0:
        return []
    pair_list = list(itertools.combinations(range(n), 2))
    full_mask = (1 << n) - 1
    out: list[Graph] = []
    for bits in range(1 << len(pair_list)):
        nbr_mask = [0] * n
        for i, (u, v) in enumerate(pair_list):
            if bits >> i & 1:
                nbr_mask[u] |= 1 << v
                nbr_mask[v] |= 1 << u
        # BFS over bitmasks
        seen = 1
        frontier = 1
        while frontier:
            nxt = 0
            v = 0
            f = frontier
            while f:
                if f & 1:
                    nxt |= nbr_mask[v]
                f >>= 1
                v += 1
            frontier = nxt & ~seen
            seen |= nxt
        if seen == full_mask:
            edges = [
                pair_list[i] for i in range(len(pair_list)) if bits >> i & 1
            ]
            out.append(Graph.from_edges(n, edges))
    return out


def _quick_invariants(g: Graph):
    feats = [g.features.node_key(v) for v in range(g.num_nodes)]
    return (
        g.num_nodes,
        g.num_edges,
        sorted(g.degrees()),
        sorted(Counter(feats).items(), key=repr),
        sorted(Counter((g.degree(v), feats[v]) for v in range(g.num_nodes)).items(), key=repr),
    )


def brute_force_isomorphic(g1: Graph, g2: Graph) -> bool:
    """Exhaustive search for a node bijection preserving edges and feature labels.

    Refuses graphs above MAX_ORACLE_NODES; backtracking with degree/feature
    pruning keeps the search exact while skipping dead branches.
    """
    for g in (g1, g2):
        if g.num_nodes > MAX_ORACLE_NODES:
            raise OracleSizeError(
                f"isomorphism oracle limited to {MAX_ORACLE_NODES} nodes, got {g.num_nodes}"
            )
    if _quick_invariants(g1) != _quick_invariants(g2):
        return False
    n = g1.num_nodes
    if n == 0:
        return True
    adj1 = [set(nbrs) for nbrs in g1.adjacency]
    adj2 = [set(nbrs) for nbrs in g2.adjacency]
    key1 = [(g1.degree(v), g1.features.node_key(v)) for v in range(n)]
    key2 = [(g2.degree(v), g2.features.node_key(v)) for v in range(n)]
    # map the rarest-key nodes first to fail fast
    rarity = Counter(key1)
    order = sorted(range(n), key=lambda v: (rarity[key1[v]], -g1.degree(v)))
    mapping = [-1] * n
    used = [False] * n

    def extend(pos: int) -> bool:
        if pos == n:
            return True
        v = order[pos]
        for w in range(n):
            if used[w] or key1[v] != key2[w]:
                continue
            ok = True
            for u in order[:pos]:
                if (u in adj1[v]) != (mapping[u] in adj2[w]):
                    ok = False
                    break
            if (v in adj1[v]) != (w in adj2[w]):
                ok = False
            if ok:
                mapping[v] = w
                used[w] = True
                if extend(pos + 1):
                    return True
                mapping[v] = -1
                used[w] = False
        return False

    return extend(0)


def dedup_by_isomorphism(graphs: Iterable[Graph]) -> list[Graph]:
    """One representative per isomorphism class, grounded in the oracle.

    Buckets on elementary invariants (node count, edge count, degree sequence,
    feature histogram) and confirms matches inside a bucket with
    brute_force_isomorphic, so the result never relies on color refinement.
    """
    buckets: dict[tuple, list[Graph]] = {}
    out: list[Graph] = []
    for g in graphs:
        inv = g.num_nodes, g.num_edges, tuple(sorted(g.degrees()))
        reps = buckets.setdefault(inv, [])
        if not any(brute_force_isomorphic(g, r) for r in reps):
            reps.append(g)
            out.append(g)
    return out
