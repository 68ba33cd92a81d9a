import numpy as np
import pytest

from ginlab.gnn import (
    COLLISION_TOL,
    GnnConfig,
    GnnModel,
    PRESET_NAMES,
    UnknownPresetError,
    build_batch,
    embedding_distance,
    gcn_layer,
    gin_layer,
    graphs_distinguished,
    ideal_gin_distinguished,
    ideal_gin_embed,
    model_forward,
    neighbor_aggregate,
    preset_config,
    readout,
    sage_layer,
)
from ginlab.graphs import (
    CategoricalFeatures,
    Graph,
    complete_graph,
    counterexample_pairs,
    cycle_graph,
    disjoint_union,
    enumerate_connected_graphs,
    dedup_by_isomorphism,
    path_graph,
    permute_graph,
    random_graph,
    star_graph,
)
from ginlab.nn import Adam
from ginlab.tensor import Tape, Tensor, scale_combine, sum_all
from ginlab.wl import LabelDictionary, wl_subtree_features, wl_test

PAIRS = {p.name: p for p in counterexample_pairs()}


def test_presets_exist_and_match_table_rows():
    assert set(PRESET_NAMES) == {
        "gin-0", "gin-eps", "sum-1layer", "mean-mlp", "gcn", "max-mlp", "graphsage",
    }
    assert preset_config("GIN-0").aggregator == "sum"
    assert preset_config("gin-eps").epsilon_mode == "learnable"
    assert preset_config("mean-1layer") == preset_config("gcn")
    assert preset_config("max-1layer") == preset_config("graphsage")
    assert preset_config("sum-mlp") == preset_config("gin-0")
    assert preset_config("gcn").self_inclusion == "gcn"
    assert preset_config("graphsage").self_inclusion == "sage"


def test_unknown_preset_lists_valid_names():
    with pytest.raises(UnknownPresetError, match="gin-0"):
        preset_config("resnet")


def test_config_json_roundtrip():
    cfg = preset_config("gin-eps", hidden_dim=16, readout="mean")
    assert GnnConfig.from_json(cfg.to_json()) == cfg


def test_config_validation():
    with pytest.raises(ValueError):
        GnnConfig(num_layers=0)
    with pytest.raises(ValueError):
        GnnConfig(aggregator="median")
    with pytest.raises(ValueError):
        GnnConfig(dropout_p=1.0)


def _model(preset, input_dim=1, hidden=8, seed=0, **over):
    cfg = preset_config(preset, hidden_dim=hidden, **over)
    return GnnModel(cfg, input_dim, 2, seed)


# --- layer semantics


def test_gin_layer_isolated_node_empty_sum():
    g = Graph.from_edges(1, [])
    batch = build_batch([g])
    model = _model("gin-0")
    h = Tensor(batch.features)
    agg = neighbor_aggregate(h, batch, "sum")
    assert np.array_equal(agg.values, np.zeros((1, 1)))
    out = gin_layer(h, batch, model.layers[0], 0.0, "sum")
    manual = model.layers[0](scale_combine(h, agg, 0.0), "eval", None, False)
    assert np.array_equal(out.values, manual.values)


def test_fig3a_sum_messages_differ_mean_max_collapse():
    p = PAIRS["fig3a"]
    b1, b2 = build_batch([p.g1]), build_batch([p.g2])
    h1, h2 = Tensor(b1.features), Tensor(b2.features)
    # pre-combine messages under each aggregator at the focal nodes
    for eps in (0.0, 0.3):
        s1 = scale_combine(h1, neighbor_aggregate(h1, b1, "sum"), eps)
        s2 = scale_combine(h2, neighbor_aggregate(h2, b2, "sum"), eps)
        assert s1.values[p.v1, 0] == (1 + eps) + 2.0
        assert s2.values[p.v2, 0] == (1 + eps) + 3.0
    for op in ("mean", "max"):
        m1 = neighbor_aggregate(h1, b1, op).values[p.v1]
        m2 = neighbor_aggregate(h2, b2, op).values[p.v2]
        assert np.array_equal(m1, m2)


def test_learnable_epsilon_receives_gradient_and_moves():
    g = star_graph(3)
    model = _model("gin-eps")
    eps = model.eps[0]
    assert isinstance(eps, Tensor) and eps.values[0] == 0.0
    batch = build_batch([g])
    # eval mode keeps batch statistics out of the picture so the epsilon
    # shift is visible (train-mode batchnorm absorbs a uniform shift)
    tape = Tape()
    _, logits = model_forward(model, batch, mode="eval", tape=tape, canonical=False)
    loss = sum_all(logits, tape)
    tape.backward(loss)
    assert eps.grad is not None and abs(eps.grad[0]) > 0
    analytic = float(eps.grad[0])
    # finite-difference cross-check of the epsilon derivative
    h = 1e-6
    def loss_at(val):
        eps.values = np.array([val])
        _, lg = model_forward(model, batch, mode="eval", canonical=False)
        return float(lg.values.sum())
    numeric = (loss_at(h) - loss_at(-h)) / (2 * h)
    eps.values = np.array([0.0])
    assert abs(numeric - analytic) / max(abs(numeric), 1e-9) < 1e-4
    opt = Adam([eps])
    eps.grad = np.array([1.0])
    opt.step(0)
    assert eps.values[0] != 0.0


def test_gcn_layer_isolated_node_is_self_mean():
    g = Graph.from_edges(1, [])
    batch = build_batch([g])
    h = Tensor(batch.features)
    agg = neighbor_aggregate(h, batch, "mean", include_self=True)
    assert np.array_equal(agg.values, h.values)


def test_gcn_layer_fig3a_focal_nodes_identical():
    p = PAIRS["fig3a"]
    model = _model("gcn")
    b1, b2 = build_batch([p.g1]), build_batch([p.g2])
    o1 = gcn_layer(Tensor(b1.features), b1, model.layers[0])
    o2 = gcn_layer(Tensor(b2.features), b2, model.layers[0])
    assert np.array_equal(o1.values[p.v1], o2.values[p.v2])


def test_gcn_layer_equal_rows_stay_equal():
    g = cycle_graph(5)
    batch = build_batch([g])
    model = _model("gcn")
    out = gcn_layer(Tensor(batch.features), batch, model.layers[0])
    assert np.ptp(out.values, axis=0).max() == 0.0


def test_sage_layer_fig3b_max_collapse():
    p = PAIRS["fig3b"]
    model = _model("graphsage", input_dim=3)
    b1, b2 = build_batch([p.g1]), build_batch([p.g2])
    o1 = sage_layer(Tensor(b1.features), b1, model.layers[0])
    o2 = sage_layer(Tensor(b2.features), b2, model.layers[0])
    assert np.array_equal(o1.values[p.v1], o2.values[p.v2])


def test_sage_layer_single_neighbor_is_that_vector():
    g = path_graph(2)
    batch = build_batch([g])
    model = _model("graphsage")
    from ginlab.tensor import relu

    h = Tensor(batch.features)
    transformed = relu(model.layers[0].pool(h))
    agg = neighbor_aggregate(transformed, batch, "max")
    assert np.array_equal(agg.values[0], transformed.values[1])


def test_sage_layer_duplicate_neighbors_no_effect():
    # v sees one green leaf vs three green leaves: same underlying set
    feats1 = CategoricalFeatures(labels=(0, 1), vocab_size=2)
    feats3 = CategoricalFeatures(labels=(0, 1, 1, 1), vocab_size=2)
    g1 = Graph.from_edges(2, [(0, 1)], feats1)
    g3 = Graph.from_edges(4, [(0, 1), (0, 2), (0, 3)], feats3)
    model = _model("graphsage", input_dim=2)
    b1, b3 = build_batch([g1]), build_batch([g3])
    o1 = sage_layer(Tensor(b1.features), b1, model.layers[0])
    o3 = sage_layer(Tensor(b3.features), b3, model.layers[0])
    assert np.array_equal(o1.values[0], o3.values[0])


def test_mean_equals_scaled_sum_on_regular_graphs():
    for g, d in ((cycle_graph(6), 2), (complete_graph(4), 3)):
        batch = build_batch([g])
        rng = np.random.default_rng(0)
        h = Tensor(rng.standard_normal((g.num_nodes, 5)))
        mean_agg = neighbor_aggregate(h, batch, "mean")
        sum_agg = neighbor_aggregate(h, batch, "sum")
        assert np.array_equal(mean_agg.values, sum_agg.values / d)
        # whole layer: identical once the aggregate is rescaled
        model = GnnModel(GnnConfig(num_layers=2, hidden_dim=4, aggregator="mean"), 5, 2, 0)
        block = model.layers[0]
        via_mean = gin_layer(h, batch, block, 0.0, "mean")
        manual = block(scale_combine(h, Tensor(sum_agg.values / d), 0.0), "eval", None, False)
        assert np.array_equal(via_mean.values, manual.values)


# --- readout and full forward


def test_readout_single_node_concatenates_layer_vectors():
    g = Graph.from_edges(1, [])
    model = _model("gin-0")
    vec, _ = model_forward(model, g)
    batch = build_batch([g])
    from ginlab.gnn import node_embeddings

    hs = node_embeddings(model, batch, canonical=True)
    manual = np.concatenate([h.values[0] for h in hs])
    assert np.array_equal(vec.values[0], manual)
    assert vec.values.shape[1] == 1 + 8 * (model.config.num_layers - 1)


def test_sum_readout_is_additive_over_disjoint_copies():
    g = random_graph(5, 0.6, 1)
    double = disjoint_union(g, g)
    model = _model("gin-0")
    v1, _ = model_forward(model, g)
    v2, _ = model_forward(model, double)
    assert np.array_equal(v2.values, 2.0 * v1.values)


def test_mean_readout_collapses_c6_vs_triangles():
    c6 = cycle_graph(6)
    cc = disjoint_union(cycle_graph(3), cycle_graph(3))
    for preset in PRESET_NAMES:
        model = _model(preset, readout="mean", seed=3)
        v1, _ = model_forward(model, c6)
        v2, _ = model_forward(model, cc)
        assert embedding_distance(v1, v2) == 0.0, preset


def test_model_forward_permutation_invariance_exact():
    rng = np.random.default_rng(9)
    for preset in PRESET_NAMES:
        model = _model(preset, seed=11)
        for _ in range(3):
            n = int(rng.integers(2, 8))
            g = random_graph(n, 0.5, int(rng.integers(1 << 30)))
            pg = permute_graph(g, [int(v) for v in rng.permutation(n)])
            v1, l1 = model_forward(model, g)
            v2, l2 = model_forward(model, pg)
            assert np.array_equal(v1.values, v2.values), preset
            assert np.array_equal(l1.values, l2.values), preset


def test_batched_forward_matches_single_graph_forward():
    graphs = [random_graph(n, 0.5, n) for n in (3, 5, 7)]
    model = _model("gin-0", seed=2)
    batch = build_batch(graphs)
    vb, lb = model_forward(model, batch)
    for i, g in enumerate(graphs):
        v, l = model_forward(model, g)
        assert np.array_equal(vb.values[i], v.values[0])
        assert np.array_equal(lb.values[i], l.values[0])


def test_fig3c_mean_mlp_identical_graph_vectors():
    p = PAIRS["fig3c"]
    for seed in range(3):
        model = GnnModel(
            preset_config("mean-mlp", hidden_dim=8, readout="mean"), 3, 2, seed
        )
        v1, _ = model_forward(model, p.g1)
        v2, _ = model_forward(model, p.g2)
        assert embedding_distance(v1, v2) < COLLISION_TOL


def test_fig3c_gin_distinguishes_across_seeds():
    p = PAIRS["fig3c"]
    for seed in range(5):
        model = GnnModel(preset_config("gin-0", hidden_dim=8), 3, 2, seed)
        v1, _ = model_forward(model, p.g1)
        v2, _ = model_forward(model, p.g2)
        assert np.linalg.norm(v1.values - v2.values) > 1e-6


def test_isomorphic_graphs_identical_logits():
    g = random_graph(6, 0.5, 4)
    pg = permute_graph(g, [3, 5, 0, 1, 4, 2])
    model = _model("max-mlp", seed=8)
    _, l1 = model_forward(model, g)
    _, l2 = model_forward(model, pg)
    assert np.array_equal(l1.values, l2.values)


def test_graphs_distinguished_star_vs_path():
    model = _model("gin-0", seed=0)
    distinct, dist = graphs_distinguished(model, star_graph(3), path_graph(4))
    assert distinct and dist > COLLISION_TOL


def test_dimension_mismatch_raises():
    from ginlab.tensor import ShapeError

    model = _model("gin-0", input_dim=3)
    with pytest.raises(ShapeError):
        model_forward(model, cycle_graph(4))  # vocab-1 features into 3-wide model


# --- ideal mode


def test_ideal_isomorphic_graphs_equal():
    g = random_graph(7, 0.4, 6)
    pg = permute_graph(g, [6, 5, 4, 3, 2, 1, 0])
    shared = LabelDictionary()
    assert ideal_gin_embed(g, 7, shared) == ideal_gin_embed(pg, 7, shared)


def test_ideal_star_vs_path_unequal():
    assert ideal_gin_distinguished(star_graph(3), path_graph(4))


def test_ideal_c6_vs_triangles_equal():
    c6 = cycle_graph(6)
    cc = disjoint_union(cycle_graph(3), cycle_graph(3))
    assert not ideal_gin_distinguished(c6, cc)


def test_ideal_matches_refinement_verdict_exhaustively():
    reps = dedup_by_isomorphism(enumerate_connected_graphs(4))
    reps += dedup_by_isomorphism(enumerate_connected_graphs(5))[:8]
    for i, g1 in enumerate(reps):
        for g2 in reps[i + 1 :]:
            k = max(g1.num_nodes, g2.num_nodes)
            assert ideal_gin_distinguished(g1, g2, k) == wl_test(g1, g2, k).non_isomorphic


def test_ideal_signature_counts_mirror_subtree_features():
    g = random_graph(7, 0.5, 13)
    K = 3
    shared = LabelDictionary()
    sig = ideal_gin_embed(g, K, shared)
    fv = wl_subtree_features(g, K, LabelDictionary()).as_dict()
    for k, level in enumerate(sig):
        sig_counts = sorted(c for _, c in level)
        fv_counts = sorted(c for (it, _), c in fv.items() if it == k)
        assert sig_counts == fv_counts


def test_model_parameters_and_checkpoint_shapes():
    model = _model("gin-eps", hidden=4)
    named = model.named_parameters()
    assert any(name.startswith("eps") for name in named)
    params = model.parameters()
    assert len(params) == len(named)
    total = sum(p.values.size for p in params)
    assert total > 0
