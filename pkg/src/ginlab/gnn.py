"""Configurable message-passing models: sum/mean/max aggregation, MLP or
1-layer combines, GIN-style self-weighting, concatenated graph readout, and an
exact dictionary-compression reference mode."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import asdict, dataclass, replace

import numpy as np

from . import nn
from .graphs import CategoricalFeatures, DenseFeatures, Graph
from .tensor import (
    Tape,
    Tensor,
    add,
    concat,
    relu,
    scale_combine,
    segment_reduce,
)
from .wl import LabelDictionary, wl_refine

# Shared float threshold separating numerical noise from structural distinction.
COLLISION_TOL = 1e-7

AGGREGATORS = ("sum", "mean", "max")
COMBINES = ("mlp2", "1layer")
SELF_INCLUSIONS = ("gin", "gcn", "sage")
READOUTS = ("sum", "mean")


@dataclass(frozen=True)
class GnnConfig:
    """Architecture choice. num_layers counts the input layer, so there are
    num_layers - 1 rounds of neighborhood aggregation."""

    num_layers: int = 5
    hidden_dim: int = 64
    aggregator: str = "sum"
    combine: str = "mlp2"
    epsilon_mode: str = "fixed"  # "fixed" | "learnable"
    epsilon_init: float = 0.0
    self_inclusion: str = "gin"  # "gin" | "gcn" | "sage"
    readout: str = "sum"  # per-layer sum or mean over nodes, concatenated
    dropout_p: float = 0.0
    use_batchnorm: bool = True

    def __post_init__(self):
        if self.num_layers < 1:
            raise ValueError("num_layers must be >= 1")
        if self.hidden_dim < 1:
            raise ValueError("hidden_dim must be >= 1")
        if self.aggregator not in AGGREGATORS:
            raise ValueError(f"aggregator must be one of {AGGREGATORS}")
        if self.combine not in COMBINES:
            raise ValueError(f"combine must be one of {COMBINES}")
        if self.epsilon_mode not in ("fixed", "learnable"):
            raise ValueError("epsilon_mode must be 'fixed' or 'learnable'")
        if self.self_inclusion not in SELF_INCLUSIONS:
            raise ValueError(f"self_inclusion must be one of {SELF_INCLUSIONS}")
        if self.readout not in READOUTS:
            raise ValueError(f"readout must be one of {READOUTS}")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ValueError("dropout_p must be in [0, 1)")

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @staticmethod
    def from_json(payload: str) -> "GnnConfig":
        return GnnConfig(**json.loads(payload))


_PRESETS: dict[str, dict] = {
    "gin-0": dict(aggregator="sum", combine="mlp2", self_inclusion="gin",
                  epsilon_mode="fixed"),
    "gin-eps": dict(aggregator="sum", combine="mlp2", self_inclusion="gin",
                    epsilon_mode="learnable"),
    "sum-1layer": dict(aggregator="sum", combine="1layer", self_inclusion="gin",
                       epsilon_mode="fixed"),
    "mean-mlp": dict(aggregator="mean", combine="mlp2", self_inclusion="gin",
                     epsilon_mode="fixed"),
    "gcn": dict(aggregator="mean", combine="1layer", self_inclusion="gcn",
                epsilon_mode="fixed"),
    "max-mlp": dict(aggregator="max", combine="mlp2", self_inclusion="gin",
                    epsilon_mode="fixed"),
    "graphsage": dict(aggregator="max", combine="1layer", self_inclusion="sage",
                      epsilon_mode="fixed"),
}

_PRESET_ALIASES = {
    "gin-epsilon": "gin-eps",
    "gin-e": "gin-eps",
    "sum-mlp": "gin-0",
    "mean-1layer": "gcn",
    "max-1layer": "graphsage",
}

PRESET_NAMES = tuple(_PRESETS)


class UnknownPresetError(KeyError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(
            f"unknown preset {name!r}; valid presets: {', '.join(PRESET_NAMES)}"
        )


def preset_config(name: str, **overrides) -> GnnConfig:
    """Resolve a named architecture preset, optionally overriding fields."""
    key = name.strip().lower()
    key = _PRESET_ALIASES.get(key, key)
    if key not in _PRESETS:
        raise UnknownPresetError(name)
    return replace(GnnConfig(**_PRESETS[key]), **overrides)


# ---------------------------------------------------------------------------
# batching


@dataclass
class GraphBatch:
    """Index-flattened view of one or more graphs for segment reductions."""

    features: np.ndarray  # total_nodes x input_dim, float64
    nbr_gather: np.ndarray  # flattened neighbor lists, absolute row indices
    nbr_offsets: np.ndarray  # per-node segment offsets into nbr_gather
    self_gather: np.ndarray  # as above, with each node prepended to its own list
    self_offsets: np.ndarray
    graph_gather: np.ndarray  # arange(total_nodes); nodes of a graph contiguous
    graph_offsets: np.ndarray  # per-graph segment offsets
    labels: np.ndarray | None
    num_graphs: int


def one_hot_features(graph: Graph) -> np.ndarray:
    feats = graph.features
    if isinstance(feats, CategoricalFeatures):
        out = np.zeros((graph.num_nodes, feats.vocab_size))
        out[np.arange(graph.num_nodes), feats.labels] = 1.0
        return out
    assert isinstance(feats, DenseFeatures)
    return np.array(feats.vectors, dtype=np.float64).reshape(graph.num_nodes, feats.dim)


def build_batch(graphs: list[Graph] | tuple[Graph, ...]) -> GraphBatch:
    feats = []
    nbr_gather: list[int] = []
    nbr_offsets = [0]
    self_gather: list[int] = []
    self_offsets = [0]
    graph_offsets = [0]
    labels = []
    base = 0
    for g in graphs:
        feats.append(one_hot_features(g))
        for v in range(g.num_nodes):
            nbrs = [base + u for u in g.adjacency[v]]
            nbr_gather.extend(nbrs)
            nbr_offsets.append(len(nbr_gather))
            self_gather.append(base + v)
            self_gather.extend(nbrs)
            self_offsets.append(len(self_gather))
        base += g.num_nodes
        graph_offsets.append(base)
        labels.append(g.label)
    feature_mat = np.concatenate(feats, axis=0) if feats else np.zeros((0, 1))
    have_labels = all(lab is not None for lab in labels)
    return GraphBatch(
        features=feature_mat,
        nbr_gather=np.array(nbr_gather, dtype=np.intp),
        nbr_offsets=np.array(nbr_offsets, dtype=np.intp),
        self_gather=np.array(self_gather, dtype=np.intp),
        self_offsets=np.array(self_offsets, dtype=np.intp),
        graph_gather=np.arange(base, dtype=np.intp),
        graph_offsets=np.array(graph_offsets, dtype=np.intp),
        labels=np.array(labels, dtype=np.intp) if have_labels else None,
        num_graphs=len(graphs),
    )


def neighbor_aggregate(
    h: Tensor,
    batch: GraphBatch,
    op: str,
    include_self: bool = False,
    tape: Tape | None = None,
    canonical: bool = False,
) -> Tensor:
    gather = batch.self_gather if include_self else batch.nbr_gather
    offsets = batch.self_offsets if include_self else batch.nbr_offsets
    return segment_reduce(h, gather, offsets, op, tape, canonical)


# ---------------------------------------------------------------------------
# model


class _CombineBlock:
    """Linear(+BN)+ReLU stack applied after aggregation."""

    def __init__(self, dims: list[int], use_bn: bool, rng: np.random.Generator):
        self.linears = [
            nn.Linear(dims[i], dims[i + 1], rng) for i in range(len(dims) - 1)
        ]
        self.bns = [nn.BatchNorm1d(d) if use_bn else None for d in dims[1:]]

    def __call__(self, x, mode, tape, exact):
        for lin, bn in zip(self.linears, self.bns):
            x = lin(x, tape, exact)
            if bn is not None:
                x = bn(x, mode, tape)
            x = relu(x, tape)
        return x

    def parameters(self):
        out = []
        for lin in self.linears:
            out.extend(lin.parameters())
        for bn in self.bns:
            if bn is not None:
                out.extend(bn.parameters())
        return out


class _SageBlock:
    """Neighbor transform before max pooling, then concat-with-self combine."""

    def __init__(self, in_dim: int, out_dim: int, use_bn: bool, rng: np.random.Generator):
        self.pool = nn.Linear(in_dim, out_dim, rng)
        self.comb = _CombineBlock([in_dim + out_dim, out_dim], use_bn, rng)

    def parameters(self):
        return self.pool.parameters() + self.comb.parameters()


class GnnModel:
    """Parameters for one architecture; shapes follow config and input width."""

    def __init__(self, config: GnnConfig, input_dim: int, num_classes: int, seed: int):
        self.config = config
        self.input_dim = input_dim
        self.num_classes = num_classes
        rng = np.random.default_rng(seed)
        self.layers: list = []
        self.eps: list[Tensor | float] = []
        dims = [input_dim] + [config.hidden_dim] * (config.num_layers - 1)
        for li in range(config.num_layers - 1):
            d_in, d_out = dims[li], dims[li + 1]
            if config.self_inclusion == "sage":
                self.layers.append(_SageBlock(d_in, d_out, config.use_batchnorm, rng))
            elif config.combine == "mlp2":
                self.layers.append(
                    _CombineBlock([d_in, config.hidden_dim, d_out], config.use_batchnorm, rng)
                )
            else:
                self.layers.append(_CombineBlock([d_in, d_out], config.use_batchnorm, rng))
            if config.epsilon_mode == "learnable":
                self.eps.append(Tensor(np.array([config.epsilon_init])))
            else:
                self.eps.append(config.epsilon_init)
        self.heads = [nn.Linear(d, num_classes, rng) for d in dims]

    def parameters(self) -> list[Tensor]:
        out = []
        for layer in self.layers:
            out.extend(layer.parameters())
        for eps in self.eps:
            if isinstance(eps, Tensor):
                out.append(eps)
        for head in self.heads:
            out.extend(head.parameters())
        return out

    def named_parameters(self) -> dict[str, Tensor]:
        named = {}
        for li, layer in enumerate(self.layers):
            for pi, p in enumerate(layer.parameters()):
                named[f"layer{li}.p{pi}"] = p
        for li, eps in enumerate(self.eps):
            if isinstance(eps, Tensor):
                named[f"eps{li}"] = eps
        for hi, head in enumerate(self.heads):
            named[f"head{hi}.weight"] = head.weight
            named[f"head{hi}.bias"] = head.bias
        return named


def gin_layer(
    h: Tensor,
    batch: GraphBatch,
    block: _CombineBlock,
    eps: Tensor | float,
    aggregator: str = "sum",
    mode: str = "eval",
    tape: Tape | None = None,
    canonical: bool = False,
) -> Tensor:
    """(1 + eps) * h_v + AGG{h_u : u in N(v)}, then the combine stack.

    An empty neighborhood contributes the zero vector under every aggregator.
    """
    agg = neighbor_aggregate(h, batch, aggregator, False, tape, canonical)
    combined = scale_combine(h, agg, eps, tape)
    return block(combined, mode, tape, canonical)


def gcn_layer(
    h: Tensor,
    batch: GraphBatch,
    block: _CombineBlock,
    mode: str = "eval",
    tape: Tape | None = None,
    canonical: bool = False,
) -> Tensor:
    """Linear+ReLU over the mean of each node's neighborhood including itself."""
    agg = neighbor_aggregate(h, batch, "mean", True, tape, canonical)
    return block(agg, mode, tape, canonical)


def sage_layer(
    h: Tensor,
    batch: GraphBatch,
    block: _SageBlock,
    mode: str = "eval",
    tape: Tape | None = None,
    canonical: bool = False,
) -> Tensor:
    """Element-wise max over ReLU-transformed neighbors, concat with self,
    then a linear map. The max over an empty neighborhood is the zero vector
    (the identity here, since transformed entries are nonnegative)."""
    transformed = relu(block.pool(h, tape, canonical), tape)
    agg = neighbor_aggregate(transformed, batch, "max", False, tape, canonical)
    joined = concat([h, agg], axis=1, tape=tape)
    return block.comb(joined, mode, tape, canonical)


def node_embeddings(
    model: GnnModel,
    batch: GraphBatch,
    mode: str = "eval",
    tape: Tape | None = None,
    canonical: bool = False,
) -> list[Tensor]:
    """Per-layer node matrices h^(0)..h^(K); h^(0) is the raw input features."""
    h = Tensor(batch.features)
    hs = [h]
    cfg = model.config
    for block, eps in zip(model.layers, model.eps):
        if cfg.self_inclusion == "gcn":
            h = gcn_layer(h, batch, block, mode, tape, canonical)
        elif cfg.self_inclusion == "sage":
            h = sage_layer(h, batch, block, mode, tape, canonical)
        else:
            h = gin_layer(h, batch, block, eps, cfg.aggregator, mode, tape, canonical)
        hs.append(h)
    return hs


def readout(
    embeddings: list[Tensor],
    batch: GraphBatch,
    mode_readout: str,
    tape: Tape | None = None,
    canonical: bool = False,
) -> list[Tensor]:
    """Per-layer graph pooling (sum or mean over each graph's nodes)."""
    return [
        segment_reduce(hk, batch.graph_gather, batch.graph_offsets, mode_readout,
                       tape, canonical)
        for hk in embeddings
    ]


def model_forward(
    model: GnnModel,
    graph_or_batch: Graph | GraphBatch,
    mode: str = "eval",
    tape: Tape | None = None,
    canonical: bool | None = None,
    dropout_rng: np.random.Generator | None = None,
):
    """Run the full model; returns (graph vectors B x D, class logits B x C).

    The graph vector concatenates per-layer pooled embeddings; logits are the
    sum of per-layer linear heads (equivalent to one linear head on the
    concatenation). canonical defaults to True in eval mode, making the result
    bitwise invariant under node permutations.
    """
    batch = (
        build_batch([graph_or_batch])
        if isinstance(graph_or_batch, Graph)
        else graph_or_batch
    )
    if canonical is None:
        canonical = mode == "eval"
    hs = node_embeddings(model, batch, mode, tape, canonical)
    pooled = readout(hs, batch, model.config.readout, tape, canonical)
    graph_vec = concat(pooled, axis=1, tape=tape)
    logits: Tensor | None = None
    p = model.config.dropout_p
    for head, pk in zip(model.heads, pooled):
        term = head(pk, tape, canonical)
        if mode == "train" and p > 0.0:
            term = nn.dropout(
                term, p, mode,
                dropout_rng if dropout_rng is not None else np.random.default_rng(0),
                tape,
            )
        logits = term if logits is None else add(logits, term, tape)
    return graph_vec, logits


def embedding_distance(a: Tensor | np.ndarray, b: Tensor | np.ndarray) -> float:
    """Max-abs distance between two graph vectors."""
    av = a.values if isinstance(a, Tensor) else np.asarray(a)
    bv = b.values if isinstance(b, Tensor) else np.asarray(b)
    if av.shape != bv.shape:
        raise ValueError(f"embedding shapes differ: {av.shape} vs {bv.shape}")
    if av.size == 0:
        return 0.0
    return float(np.max(np.abs(av - bv)))


def graphs_distinguished(
    model: GnnModel, g1: Graph, g2: Graph, tol: float = COLLISION_TOL
) -> tuple[bool, float]:
    """Eval-mode verdict: do the two graph vectors differ beyond tolerance?"""
    v1, _ = model_forward(model, g1)
    v2, _ = model_forward(model, g2)
    dist = embedding_distance(v1, v2)
    return dist > tol, dist


# ---------------------------------------------------------------------------
# exact reference mode


def ideal_gin_embed(
    graph: Graph, K: int, dictionary: LabelDictionary | None = None
) -> tuple:
    """Discrete graph signature under exact injective compression.

    Layer k's node signatures are the refinement labels at iteration k; the
    graph signature is the multiset of node signatures per layer, concatenated
    over k = 0..K. Signatures of two graphs are comparable only when computed
    through one shared dictionary.
    """
    colors = wl_refine(graph, K, dictionary)
    return tuple(
        tuple(sorted(Counter(level).items())) for level in colors.labels
    )


def ideal_gin_distinguished(g1: Graph, g2: Graph, K: int | None = None) -> bool:
    if K is None:
        K = max(g1.num_nodes, g2.num_nodes)
    shared = LabelDictionary()
    return ideal_gin_embed(g1, K, shared) != ideal_gin_embed(g2, K, shared)
