"""ginlab: a desk-scale laboratory for graph neural network expressiveness."""

from .datasets import (
    Dataset,
    degree_onehot_features,
    load_json_dataset,
    load_tud_dataset,
    uniform_features,
)
from .gnn import GnnConfig, GnnModel, ideal_gin_embed, model_forward, preset_config
from .graphs import (
    Graph,
    Multiset,
    brute_force_isomorphic,
    counterexample_pairs,
    enumerate_connected_graphs,
    random_graph,
)
from .tensor import Tape, Tensor
from .wl import wl_kernel_matrix, wl_refine, wl_subtree_features, wl_test

__all__ = [
    "Dataset",
    "Graph",
    "GnnConfig",
    "GnnModel",
    "Multiset",
    "Tape",
    "Tensor",
    "brute_force_isomorphic",
    "counterexample_pairs",
    "degree_onehot_features",
    "enumerate_connected_graphs",
    "ideal_gin_embed",
    "load_json_dataset",
    "load_tud_dataset",
    "model_forward",
    "preset_config",
    "random_graph",
    "uniform_features",
    "wl_kernel_matrix",
    "wl_refine",
    "wl_subtree_features",
    "wl_test",
]

__version__ = "0.1.0"
