import math
from fractions import Fraction

import numpy as np
import pytest

from ginlab.expressiveness import (
    AggregatorVerdicts,
    ContainmentViolation,
    EncoderBoundError,
    EpsilonNumber,
    IDEAL_CONFIG_NAME,
    InjectiveEncoder,
    aggregator_semantics_check,
    certify_gin_injectivity,
    certify_mean_max_semantics,
    certify_sum_injectivity,
    distinguishability_atlas,
    enumerate_multisets,
    fig3_multiset_pairs,
    gin_encoding,
    max_set_equal,
    mean_distribution_equal,
    mean_encoding,
    one_layer_collision,
    random_multiset_pair,
    sum_encoding,
)
from ginlab.graphs import Multiset, counterexample_pairs, path_graph, star_graph

ENC5 = InjectiveEncoder(tuple(range(5)), base=5)


def ms(*items):
    return Multiset.from_iterable(items)


# --- encodings


def test_sum_encoding_empty_is_zero():
    assert sum_encoding(ms(), ENC5) == 0


def test_sum_encoding_doubled_first_symbol():
    assert sum_encoding(ms(0, 0), ENC5) == 2  # N**-0 twice


def test_sum_encoding_exact_fractions():
    assert sum_encoding(ms(1, 2), ENC5) == Fraction(1, 5) + Fraction(1, 25)


def test_enumerate_multisets_matches_stars_and_bars():
    universe = enumerate_multisets(tuple(range(5)), 4)
    expected = sum(math.comb(5 + k - 1, k) for k in range(5))
    assert expected == 126
    assert len(universe) == 126
    assert len(set(universe)) == 126


def test_sum_encoding_injective_over_certified_universe():
    assert certify_sum_injectivity() == 126


def test_gin_encoding_base_cases():
    assert gin_encoding(0, ms(), ENC5) == EpsilonNumber(Fraction(1), Fraction(1))


def test_gin_encoding_center_vs_neighbor_swap():
    left = gin_encoding(0, ms(1), ENC5)
    right = gin_encoding(1, ms(0), ENC5)
    assert left.a == right.a == 1 + Fraction(1, 5)
    assert left.b == 1 and right.b == Fraction(1, 5)
    assert left != right


def test_gin_encoding_injective_over_certified_universe():
    # 4 centers x (1 + 4 + 10 + 20) multisets
    assert certify_gin_injectivity() == 140


def test_epsilon_number_arithmetic():
    x = EpsilonNumber(Fraction(1, 2), Fraction(3))
    y = EpsilonNumber(Fraction(1, 2), Fraction(-3))
    assert x + y == EpsilonNumber(Fraction(1), Fraction(0))
    assert x.scaled(2) == EpsilonNumber(Fraction(1), Fraction(6))
    assert x != y


def test_encoder_bounds():
    with pytest.raises(EncoderBoundError):
        sum_encoding(ms(*([0] * 5)), ENC5)  # size 5 not below base 5
    with pytest.raises(EncoderBoundError):
        sum_encoding(ms(9), ENC5)
    with pytest.raises(EncoderBoundError):
        InjectiveEncoder((0, 0, 1), base=5)


def test_mean_encoding_collision_examples():
    enc2 = InjectiveEncoder(tuple(range(5)), base=5, power=2)
    assert mean_encoding(ms(1, 2), enc2) == mean_encoding(ms(1, 1, 2, 2), enc2)
    assert mean_encoding(ms(1, 2), enc2) != mean_encoding(ms(1, 2, 2), enc2)


# --- distribution / set equality


def test_distribution_and_set_equality_examples():
    g, r = "g", "r"
    assert mean_distribution_equal(ms(g, r), ms(g, g, r, r))
    assert max_set_equal(ms(g, r), ms(g, g, r, r))
    assert not mean_distribution_equal(ms(g, r), ms(g, r, r))
    assert max_set_equal(ms(g, r), ms(g, r, r))
    assert mean_distribution_equal(ms(), ms())
    assert max_set_equal(ms(), ms())
    assert not mean_distribution_equal(ms(), ms(g))
    assert not max_set_equal(ms(g), ms(r))


def test_distribution_equality_is_scaling():
    base = Multiset({"x": 2, "y": 3})
    assert mean_distribution_equal(base, base.scaled(4))
    assert mean_distribution_equal(base.scaled(4), base)
    assert not mean_distribution_equal(base, Multiset({"x": 3, "y": 2}))


def test_mean_max_semantics_certified_exhaustively():
    assert certify_mean_max_semantics() > 2000


# --- one-layer collision


def test_one_layer_collision_appendix_pair():
    x1, x2 = ms(1, 1, 1, 1, 1), ms(2, 3)
    for dim in range(1, 9):
        report = one_layer_collision(x1, x2, trials=100, dim=dim, seed=dim)
        assert report.sums_equal
        assert report.max_abs_diff < 1e-9 * max(report.scale, 1e-30)


def test_one_layer_collision_identical_singletons_exact_zero():
    report = one_layer_collision(ms(1), ms(1), trials=20, dim=4, seed=0)
    assert report.max_abs_diff == 0.0


def test_one_layer_collision_detects_different_sums():
    report = one_layer_collision(ms(1, 1), ms(3), trials=20, dim=4, seed=0)
    assert not report.sums_equal
    assert report.max_abs_diff > 1e-6


def test_one_layer_collision_rejects_nonpositive_elements():
    with pytest.raises(ValueError, match="positive"):
        one_layer_collision(ms(0), ms(1), trials=1, dim=1, seed=0)
    with pytest.raises(ValueError, match="positive"):
        one_layer_collision(ms(Fraction(-1, 2)), ms(1), trials=1, dim=1, seed=0)


def test_one_layer_collision_with_bias_is_exploratory():
    report = one_layer_collision(ms(1, 1, 1, 1, 1), ms(2, 3), trials=50, dim=6,
                                 seed=1, with_bias=True)
    assert report.num_maps == 52  # no asserted outcome, just a measurement


def test_one_layer_collision_rational_elements():
    x1 = ms(Fraction(1, 2), Fraction(1, 2))
    x2 = ms(1)
    report = one_layer_collision(x1, x2, trials=30, dim=3, seed=2)
    assert report.sums_equal
    assert report.max_abs_diff < 1e-9 * max(report.scale, 1e-30)


# --- per-aggregator verdicts


def test_fig3_verdicts_match_captions():
    for name, x1, x2, expected in fig3_multiset_pairs():
        symbols = sorted({*x1.elements(), *x2.elements()})
        enc = InjectiveEncoder(symbols, base=max(x1.size, x2.size) + 1)
        got = aggregator_semantics_check(x1, x2, enc)
        assert got == expected, name


def test_uniform_multiset_counting_only_sum_sees_it():
    enc = InjectiveEncoder(("a",), base=4)
    got = aggregator_semantics_check(ms("a", "a"), ms("a", "a", "a"), enc)
    assert got == AggregatorVerdicts(True, False, False)


def test_identical_multisets_all_collide():
    enc = InjectiveEncoder(("a", "b"), base=5)
    got = aggregator_semantics_check(ms("a", "b"), ms("b", "a"), enc)
    assert got == AggregatorVerdicts(False, False, False)


def test_ranking_containment_on_random_pairs():
    rng = np.random.default_rng(0)
    symbols = tuple(range(4))
    enc = InjectiveEncoder(symbols, base=7)
    for _ in range(1500):
        x1, x2 = random_multiset_pair(rng, symbols, max_size=6)
        verdicts = aggregator_semantics_check(x1, x2, enc, trials=2, seed=1)
        # the check itself raises on a ranking violation; assert shape anyway
        if verdicts.max_distinguishes:
            assert verdicts.mean_distinguishes
        if verdicts.mean_distinguishes:
            assert verdicts.sum_distinguishes


# --- atlas


def _small_pairs():
    named = {p.name: p for p in counterexample_pairs()}
    c6 = named["c6_vs_2c3"]
    return [
        ("s3_vs_p4", star_graph(3), path_graph(4)),
        ("c6_vs_2c3", c6.g1, c6.g2),
        ("identical", star_graph(2), star_graph(2)),
    ]


def test_atlas_small_run_containment_and_rows():
    result = distinguishability_atlas(
        _small_pairs(),
        [("gin-0-small", __import__("ginlab.gnn", fromlist=["preset_config"]).preset_config("gin-0", hidden_dim=8)),
         IDEAL_CONFIG_NAME],
        seeds=[0, 1],
    )
    rows = {(r.pair_name, r.config_name, r.seed): r for r in result.rows}
    assert len(rows) == 3 * 2 * 2

    r = rows[("c6_vs_2c3", "gin-0-small", 0)]
    assert not r.gnn_distinct and not r.wl_distinct and r.oracle_distinct

    r = rows[("s3_vs_p4", "gin-0-small", 0)]
    assert r.gnn_distinct and r.wl_distinct and r.oracle_distinct

    for seed in (0, 1):
        r = rows[("identical", "gin-0-small", seed)]
        assert not r.gnn_distinct and not r.wl_distinct and not r.oracle_distinct
        r = rows[("identical", IDEAL_CONFIG_NAME, seed)]
        assert not r.gnn_distinct


def test_atlas_csv_layout_and_determinism():
    from ginlab.gnn import preset_config

    configs = [("gin-0", preset_config("gin-0", hidden_dim=8))]
    a = distinguishability_atlas(_small_pairs(), configs, seeds=[0]).to_csv()
    b = distinguishability_atlas(_small_pairs(), configs, seeds=[0]).to_csv()
    assert a == b
    header = a.splitlines()[0]
    assert header == ("pair_name,config_name,seed,gnn_distinct,wl_distinct,"
                      "oracle_distinct,embedding_distance")
    assert len(a.splitlines()) == 1 + 3


def test_atlas_oracle_override_is_used():
    pairs = [("identical", star_graph(2), star_graph(2))]
    result = distinguishability_atlas(pairs, [IDEAL_CONFIG_NAME], seeds=[0],
                                      oracle_verdicts={"identical": False})
    assert not result.rows[0].oracle_distinct


def test_atlas_rejects_violating_verdict_sources():
    # a pair that refinement separates but with a forced "isomorphic" oracle
    pairs = [("s3_vs_p4", star_graph(3), path_graph(4))]
    with pytest.raises(ContainmentViolation):
        distinguishability_atlas(pairs, [IDEAL_CONFIG_NAME], seeds=[0],
                                 oracle_verdicts={"s3_vs_p4": False})
