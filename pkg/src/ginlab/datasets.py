"""Dataset ingestion (TU text format, JSON fixtures), feature transforms, and
synthetic benchmark builders."""

from __future__ import annotations

import json
import random
from pathlib import Path

from .graphs import (
    CategoricalFeatures,
    Dataset,
    Graph,
    cycle_graph,
    random_graph,
    star_graph,
    uniform_categorical,
)

DEFAULT_DEGREE_CAP = 64


class DatasetLoadError(RuntimeError):
    """A required dataset file is missing or unreadable."""


class DatasetFormatError(ValueError):
    """Dataset file content violates the format; carries file and line context."""


def _read_lines(path: Path) -> list[str]:
    if not path.is_file():
        raise DatasetLoadError(f"missing dataset file: {path}")
    return path.read_text().splitlines()


def _parse_int(token: str, path: Path, line_no: int) -> int:
    try:
        return int(token.strip())
    except ValueError:
        raise DatasetFormatError(
            f"{path}:{line_no}: expected an integer, got {token.strip()!r}"
        ) from None


def load_tud_dataset(directory: str | Path, prefix: str) -> Dataset:
    """Load a TU-format dataset directory into 0-indexed graphs.

    Expects `<prefix>_A.txt` (1-indexed "i, j" edge lines),
    `<prefix>_graph_indicator.txt` (graph id per node line),
    `<prefix>_graph_labels.txt` (label per graph line), and optionally
    `<prefix>_node_labels.txt`. Edges are deduplicated and symmetrized,
    graph labels remapped to contiguous 0-based classes.
    """
    directory = Path(directory)
    ind_path = directory / f"{prefix}_graph_indicator.txt"
    indicator = [
        _parse_int(line, ind_path, i + 1)
        for i, line in enumerate(_read_lines(ind_path))
        if line.strip()
    ]
    num_graphs = max(indicator) if indicator else 0

    # nodes are 1-indexed globally; graph ids are 1-indexed and contiguous
    node_graph = {node + 1: gid for node, gid in enumerate(indicator)}
    nodes_of: list[list[int]] = [[] for _ in range(num_graphs)]
    for node, gid in node_graph.items():
        if not 1 <= gid <= num_graphs:
            raise DatasetFormatError(f"{ind_path}:{node}: graph id {gid} out of range")
        nodes_of[gid - 1].append(node)
    local_index = {}
    for gid0, nodes in enumerate(nodes_of):
        for i, node in enumerate(sorted(nodes)):
            local_index[node] = (gid0, i)

    lab_path = directory / f"{prefix}_graph_labels.txt"
    raw_labels = [
        _parse_int(line, lab_path, i + 1)
        for i, line in enumerate(_read_lines(lab_path))
        if line.strip()
    ]
    if len(raw_labels) != num_graphs:
        raise DatasetFormatError(
            f"{lab_path}: {len(raw_labels)} labels for {num_graphs} graphs"
        )
    classes = {lab: i for i, lab in enumerate(sorted(set(raw_labels)))}

    edge_path = directory / f"{prefix}_A.txt"
    edges_of: list[set[tuple[int, int]]] = [set() for _ in range(num_graphs)]
    for line_no, line in enumerate(_read_lines(edge_path), start=1):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise DatasetFormatError(
                f"{edge_path}:{line_no}: expected 'i, j', got {line.strip()!r}"
            )
        u = _parse_int(parts[0], edge_path, line_no)
        v = _parse_int(parts[1], edge_path, line_no)
        if u not in node_graph or v not in node_graph:
            raise DatasetFormatError(
                f"{edge_path}:{line_no}: edge ({u}, {v}) references an unknown node"
            )
        gu, lu = local_index[u]
        gv, lv = local_index[v]
        if gu != gv:
            raise DatasetFormatError(
                f"{edge_path}:{line_no}: edge ({u}, {v}) crosses graphs {gu + 1} and {gv + 1}"
            )
        if lu == lv:
            raise DatasetFormatError(f"{edge_path}:{line_no}: self-loop at node {u}")
        edges_of[gu].add((min(lu, lv), max(lu, lv)))

    nl_path = directory / f"{prefix}_node_labels.txt"
    node_labels: dict[int, int] | None = None
    vocab: dict[int, int] = {}
    if nl_path.is_file():
        raw = [
            _parse_int(line, nl_path, i + 1)
            for i, line in enumerate(_read_lines(nl_path))
            if line.strip()
        ]
        if len(raw) != len(indicator):
            raise DatasetFormatError(
                f"{nl_path}: {len(raw)} node labels for {len(indicator)} nodes"
            )
        vocab = {lab: i for i, lab in enumerate(sorted(set(raw)))}
        node_labels = {node + 1: vocab[lab] for node, lab in enumerate(raw)}

    graphs = []
    for gid0 in range(num_graphs):
        n = len(nodes_of[gid0])
        if node_labels is None:
            feats = uniform_categorical(n)
        else:
            labels = [0] * n
            for node in nodes_of[gid0]:
                _, local = local_index[node]
                labels[local] = node_labels[node]
            feats = CategoricalFeatures(labels=tuple(labels), vocab_size=len(vocab))
        graphs.append(
            Graph.from_edges(n, edges_of[gid0], feats, label=classes[raw_labels[gid0]])
        )
    return Dataset(graphs=tuple(graphs), num_classes=len(classes), name=prefix)


def load_json_dataset(path: str | Path, name: str | None = None) -> Dataset:
    """Load `{"graphs": [{"n", "edges", "node_labels", "label"}], "num_classes"}`."""
    path = Path(path)
    if not path.is_file():
        raise DatasetLoadError(f"missing dataset file: {path}")
    try:
        payload = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(f"{path}: invalid JSON ({exc})") from None
    graphs = []
    all_labels = [
        lab
        for item in payload["graphs"]
        if item.get("node_labels") is not None
        for lab in item["node_labels"]
    ]
    vocab = max(all_labels) + 1 if all_labels else 1
    for i, item in enumerate(payload["graphs"]):
        n = item["n"]
        node_labels = item.get("node_labels")
        if node_labels is None:
            feats = uniform_categorical(n)
        else:
            feats = CategoricalFeatures(labels=tuple(node_labels), vocab_size=vocab)
        graphs.append(
            Graph.from_edges(n, [tuple(e) for e in item["edges"]], feats, item["label"])
        )
    return Dataset(
        graphs=tuple(graphs),
        num_classes=payload["num_classes"],
        name=name or path.stem,
    )


def save_json_dataset(dataset: Dataset, path: str | Path) -> None:
    items = []
    for g in dataset.graphs:
        feats = g.features
        node_labels = (
            list(feats.labels)
            if isinstance(feats, CategoricalFeatures) and feats.vocab_size > 1
            else None
        )
        items.append(
            {"n": g.num_nodes, "edges": [list(e) for e in g.edges()],
             "node_labels": node_labels, "label": g.label}
        )
    Path(path).write_text(
        json.dumps({"graphs": items, "num_classes": dataset.num_classes}, indent=1)
        + "\n"
    )


def single_graph_dataset(graph: Graph, num_classes: int = 1, name: str = "single") -> Dataset:
    if graph.label is None:
        graph = graph.with_label(0)
    return Dataset(graphs=(graph,), num_classes=num_classes, name=name)


# ---------------------------------------------------------------------------
# feature transforms


def degree_onehot_features(dataset: Dataset, cap: int = DEFAULT_DEGREE_CAP) -> Dataset:
    """Replace features with the capped node degree; vocabulary size cap + 1."""
    if cap < 1:
        raise ValueError(f"degree cap must be >= 1, got {cap}")
    graphs = tuple(
        g.with_features(
            CategoricalFeatures(
                labels=tuple(min(g.degree(v), cap) for v in range(g.num_nodes)),
                vocab_size=cap + 1,
            )
        )
        for g in dataset.graphs
    )
    return Dataset(graphs=graphs, num_classes=dataset.num_classes, name=dataset.name)


def uniform_features(dataset: Dataset) -> Dataset:
    """Erase features: every node gets label 0 from a one-symbol vocabulary."""
    graphs = tuple(
        g.with_features(uniform_categorical(g.num_nodes)) for g in dataset.graphs
    )
    return Dataset(graphs=graphs, num_classes=dataset.num_classes, name=dataset.name)


# ---------------------------------------------------------------------------
# synthetic benchmarks


def cycles_vs_stars(
    num_per_class: int = 50, min_nodes: int = 4, max_nodes: int = 12, seed: int = 0
) -> Dataset:
    """Cycles (class 0) against stars (class 1), sizes drawn per graph."""
    rng = random.Random(seed)
    graphs = []
    for _ in range(num_per_class):
        n = rng.randint(max(min_nodes, 3), max_nodes)
        graphs.append(cycle_graph(n).with_label(0))
    for _ in range(num_per_class):
        n = rng.randint(max(min_nodes, 3), max_nodes)
        graphs.append(star_graph(n - 1).with_label(1))
    return Dataset(graphs=tuple(graphs), num_classes=2, name="cycles-vs-stars")


def density_surrogate(
    num_per_class: int = 100,
    nodes_per_graph: int = 16,
    edge_probs: tuple[float, float] = (0.15, 0.35),
    seed: int = 0,
) -> Dataset:
    """Two structural classes of equal node counts: sparse vs dense random graphs.

    All features are uniform, so only aggregators that see neighborhood sizes
    can separate the classes. Every node is given at least one edge: an
    isolated node would make its (empty) neighborhood visible even to mean
    aggregation and contaminate the chance-level claim.
    """
    graphs = []
    for cls, p in enumerate(edge_probs):
        for i in range(num_per_class):
            rng = random.Random(seed * 100003 + cls * 1009 + i)
            n = nodes_per_graph
            edges = {
                (u, v)
                for u in range(n)
                for v in range(u + 1, n)
                if rng.random() < p
            }
            touched = {w for e in edges for w in e}
            for v in range(n):
                if v not in touched:
                    u = rng.randrange(n - 1)
                    u = u if u < v else u + 1
                    edges.add((min(u, v), max(u, v)))
                    touched.update((u, v))
            graphs.append(Graph.from_edges(n, edges, label=cls))
    return Dataset(graphs=tuple(graphs), num_classes=2, name="density-surrogate")


def dataset_stats(dataset: Dataset) -> dict:
    """Header-row statistics: graph count, class count, average node count."""
    return {
        "num_graphs": len(dataset),
        "num_classes": dataset.num_classes,
        "avg_nodes": round(dataset.avg_nodes(), 1),
    }
