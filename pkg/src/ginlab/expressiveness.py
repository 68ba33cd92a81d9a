"""Exact-arithmetic checks of what sum, mean, and max aggregation can and
cannot tell apart, plus the three-way harness comparing float models against
color refinement and the brute-force oracle."""

from __future__ import annotations

import io
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .gnn import (
    COLLISION_TOL,
    GnnConfig,
    GnnModel,
    embedding_distance,
    ideal_gin_embed,
    model_forward,
    preset_config,
)
from .graphs import Graph, Multiset, brute_force_isomorphic
from .wl import LabelDictionary, wl_test

IDEAL_CONFIG_NAME = "ideal-gin"


class EncoderBoundError(ValueError):
    """Multiset size or element falls outside the encoder's certified range."""


@dataclass(frozen=True)
class EpsilonNumber:
    """a + b*eps for a fixed symbolic irrational eps, with exact rational parts.

    Componentwise equality is exactly real-number equality: a + b*eps and
    a' + b'*eps coincide for an irrational eps only when a = a' and b = b',
    since otherwise eps = (a - a') / (b' - b) would be rational.
    """

    a: Fraction
    b: Fraction

    def __add__(self, other: "EpsilonNumber") -> "EpsilonNumber":
        return EpsilonNumber(self.a + other.a, self.b + other.b)

    def scaled(self, r: Fraction | int) -> "EpsilonNumber":
        r = Fraction(r)
        return EpsilonNumber(self.a * r, self.b * r)


class InjectiveEncoder:
    """Element encoding f(x) = N ** (-power * Z(x)) over a finite alphabet.

    Z indexes the alphabet 0..m-1; N must exceed every multiset size fed in.
    power=1 certifies sum injectivity, power=2 is the variant whose mean
    separates distinct distributions.
    """

    def __init__(self, symbols: Sequence, base: int, power: int = 1):
        if base < 2:
            raise EncoderBoundError(f"base must be >= 2, got {base}")
        if power < 1:
            raise EncoderBoundError(f"power must be >= 1, got {power}")
        if len(set(symbols)) != len(symbols):
            raise EncoderBoundError("alphabet symbols must be distinct")
        self.symbols = tuple(symbols)
        self.index = {s: i for i, s in enumerate(self.symbols)}
        self.base = base
        self.power = power

    def encode(self, x) -> Fraction:
        if x not in self.index:
            raise EncoderBoundError(f"element {x!r} not in the encoder alphabet")
        return Fraction(1, self.base ** (self.power * self.index[x]))

    def check_size(self, ms: Multiset) -> None:
        if ms.size >= self.base:
            raise EncoderBoundError(
                f"multiset size {ms.size} not below encoder base {self.base}"
            )


def sum_encoding(ms: Multiset, enc: InjectiveEncoder) -> Fraction:
    """Sum of element encodings; injective over multisets smaller than the base."""
    enc.check_size(ms)
    total = Fraction(0)
    for x, mult in ms.items():
        total += enc.encode(x) * mult
    return total


def mean_encoding(ms: Multiset, enc: InjectiveEncoder) -> Fraction:
    """Exact mean of element encodings; the empty multiset maps to 0."""
    enc.check_size(ms)
    if ms.size == 0:
        return Fraction(0)
    return sum_encoding(ms, enc) / ms.size


def max_encoding(ms: Multiset, enc: InjectiveEncoder) -> frozenset:
    """Support of the one-hot max: exactly the underlying set's indices."""
    for x in ms.underlying_set:
        if x not in enc.index:
            raise EncoderBoundError(f"element {x!r} not in the encoder alphabet")
    return frozenset(enc.index[x] for x in ms.underlying_set)


def gin_encoding(c, ms: Multiset, enc: InjectiveEncoder) -> EpsilonNumber:
    """(1 + eps) * f(c) + sum of f over the multiset, eps kept symbolic.

    Returned as (f(c) + sum, f(c)); distinct (center, multiset) pairs give
    distinct pairs whenever sum_encoding is injective on the multisets.
    """
    fc = enc.encode(c)
    return EpsilonNumber(fc + sum_encoding(ms, enc), fc)


def mean_distribution_equal(x1: Multiset, x2: Multiset) -> bool:
    """Same underlying set with proportional multiplicities."""
    if x1.underlying_set != x2.underlying_set:
        return False
    if x1.size == 0:
        return True
    return all(
        Fraction(x1.multiplicity(k), x1.size) == Fraction(x2.multiplicity(k), x2.size)
        for k in x1.underlying_set
    )


def max_set_equal(x1: Multiset, x2: Multiset) -> bool:
    return x1.underlying_set == x2.underlying_set


# ---------------------------------------------------------------------------
# 1-layer perceptron collision


@dataclass(frozen=True)
class CollisionReport:
    max_abs_diff: float
    scale: float
    num_maps: int
    dim: int
    sums_equal: bool

    @property
    def relative_diff(self) -> float:
        return self.max_abs_diff / self.scale if self.scale > 0 else self.max_abs_diff


def one_layer_collision(
    x1: Multiset,
    x2: Multiset,
    trials: int,
    dim: int,
    seed: int,
    with_bias: bool = False,
) -> CollisionReport:
    """Compare sum-of-ReLU(Wx) between two multisets of positive numbers.

    Draws `trials` random maps W with entries uniform on [-1, 1] plus the two
    all-positive / all-negative adversarial maps (covering both ReLU regimes).
    Elements must be positive; that is what makes ReLU act linearly per
    coordinate. with_bias adds a random bias inside the ReLU (exploratory; no
    identity is claimed for it).
    """
    elems1 = [Fraction(e) for e in x1.elements()]
    elems2 = [Fraction(e) for e in x2.elements()]
    for e in elems1 + elems2:
        if e <= 0:
            raise ValueError(f"elements must be positive, got {e}")
    v1 = np.array([float(e) for e in elems1])
    v2 = np.array([float(e) for e in elems2])
    rng = np.random.default_rng(seed)
    maps = [rng.uniform(-1.0, 1.0, size=dim) for _ in range(trials)]
    maps.append(np.full(dim, 1.0))
    maps.append(np.full(dim, -1.0))
    max_diff = 0.0
    scale = 0.0
    for w in maps:
        bias = rng.uniform(-1.0, 1.0, size=dim) if with_bias else 0.0
        s1 = np.maximum(np.outer(v1, w) + bias, 0.0).sum(axis=0) if v1.size else np.zeros(dim)
        s2 = np.maximum(np.outer(v2, w) + bias, 0.0).sum(axis=0) if v2.size else np.zeros(dim)
        max_diff = max(max_diff, float(np.max(np.abs(s1 - s2))))
        scale = max(scale, float(np.max(np.abs(s1))), float(np.max(np.abs(s2))))
    return CollisionReport(
        max_abs_diff=max_diff,
        scale=scale,
        num_maps=len(maps),
        dim=dim,
        sums_equal=sum(elems1) == sum(elems2),
    )


# ---------------------------------------------------------------------------
# per-aggregator verdicts


@dataclass(frozen=True)
class AggregatorVerdicts:
    sum_distinguishes: bool
    mean_distinguishes: bool
    max_distinguishes: bool

    def as_dict(self) -> dict[str, bool]:
        return {
            "sum": self.sum_distinguishes,
            "mean": self.mean_distinguishes,
            "max": self.max_distinguishes,
        }


class RankingViolation(AssertionError):
    """The sum >= mean >= max distinguishing order failed on a pair."""


def aggregator_semantics_check(
    x1: Multiset,
    x2: Multiset,
    enc: InjectiveEncoder,
    trials: int = 8,
    seed: int = 0,
) -> AggregatorVerdicts:
    """Exact verdicts for sum, mean, and max on one multiset pair.

    Sum compares exact sum encodings; mean compares exact means under the
    squared-exponent encoding (collides exactly on distribution-equal pairs);
    max compares one-hot supports (collides exactly on set-equal pairs).
    `trials` random float encodings cross-check every collision verdict, and
    the strict ranking sum >= mean >= max is asserted.
    """
    sum_dist = sum_encoding(x1, enc) != sum_encoding(x2, enc)
    enc2 = InjectiveEncoder(enc.symbols, enc.base, power=2 * enc.power)
    mean_dist = mean_encoding(x1, enc2) != mean_encoding(x2, enc2)
    max_dist = max_encoding(x1, enc) != max_encoding(x2, enc)

    if mean_dist == mean_distribution_equal(x1, x2):
        raise RankingViolation("mean verdict disagrees with distribution equality")
    if max_dist == max_set_equal(x1, x2):
        raise RankingViolation("max verdict disagrees with set equality")

    # collisions must survive arbitrary encodings; spot-check with random floats
    rng = np.random.default_rng(seed)
    for _ in range(trials):
        f = rng.uniform(0.1, 1.0, size=len(enc.symbols))
        a1 = np.array([f[enc.index[x]] for x in x1.elements()])
        a2 = np.array([f[enc.index[x]] for x in x2.elements()])
        if not mean_dist and x1.size and x2.size:
            if abs(a1.mean() - a2.mean()) > 1e-12:
                raise RankingViolation("mean collision failed under a random encoding")
        if not max_dist and x1.size and x2.size:
            if abs(a1.max() - a2.max()) > 1e-12:
                raise RankingViolation("max collision failed under a random encoding")

    if mean_dist and not sum_dist:
        raise RankingViolation(f"mean distinguishes but sum does not: {x1} vs {x2}")
    if max_dist and not mean_dist:
        raise RankingViolation(f"max distinguishes but mean does not: {x1} vs {x2}")
    return AggregatorVerdicts(sum_dist, mean_dist, max_dist)


# ---------------------------------------------------------------------------
# exhaustive certification suites


def enumerate_multisets(symbols: Sequence, max_size: int) -> list[Multiset]:
    """Every multiset of size 0..max_size over the alphabet (stars and bars)."""
    import itertools

    out = []
    for size in range(max_size + 1):
        for combo in itertools.combinations_with_replacement(symbols, size):
            out.append(Multiset.from_iterable(combo))
    return out


def certify_sum_injectivity(num_symbols: int = 5, base: int = 5, max_size: int = 4) -> int:
    """Assert pairwise-distinct sum encodings over the full universe; returns
    how many multisets were enumerated."""
    symbols = tuple(range(num_symbols))
    enc = InjectiveEncoder(symbols, base)
    universe = enumerate_multisets(symbols, max_size)
    seen: dict[Fraction, Multiset] = {}
    for ms in universe:
        code = sum_encoding(ms, enc)
        if code in seen:
            raise AssertionError(f"sum encoding collision: {seen[code]} vs {ms}")
        seen[code] = ms
    return len(universe)


def certify_gin_injectivity(num_symbols: int = 4, base: int = 5, max_size: int = 3) -> int:
    """Assert pairwise-distinct (center, multiset) encodings; returns pair count."""
    symbols = tuple(range(num_symbols))
    enc = InjectiveEncoder(symbols, base)
    universe = enumerate_multisets(symbols, max_size)
    seen: dict[EpsilonNumber, tuple] = {}
    count = 0
    for c in symbols:
        for ms in universe:
            code = gin_encoding(c, ms, enc)
            if code in seen:
                raise AssertionError(
                    f"pair encoding collision: {seen[code]} vs {(c, ms)}"
                )
            seen[code] = (c, ms)
            count += 1
    return count


def certify_mean_max_semantics(
    num_symbols: int = 4, base: int = 6, max_size: int = 4
) -> int:
    """Exhaustively confirm: mean collides exactly on distribution-equal pairs,
    max exactly on set-equal pairs; returns the number of pairs checked."""
    symbols = tuple(range(num_symbols))
    enc2 = InjectiveEncoder(symbols, base, power=2)
    universe = enumerate_multisets(symbols, max_size)
    checked = 0
    means = [mean_encoding(ms, enc2) for ms in universe]
    sets_ = [max_encoding(ms, enc2) for ms in universe]
    for i, x1 in enumerate(universe):
        for j in range(i + 1, len(universe)):
            x2 = universe[j]
            if (means[i] == means[j]) != mean_distribution_equal(x1, x2):
                raise AssertionError(f"mean semantics mismatch on {x1} vs {x2}")
            if (sets_[i] == sets_[j]) != max_set_equal(x1, x2):
                raise AssertionError(f"max semantics mismatch on {x1} vs {x2}")
            checked += 1
    return checked


def fig3_multiset_pairs() -> list[tuple[str, Multiset, Multiset, AggregatorVerdicts]]:
    """The three neighborhood pairs from the counterexample figures with their
    expected verdicts: 3a sum only; 3b sum and mean; 3c sum only."""
    a = Multiset.from_iterable
    return [
        ("fig3a", a(["a", "a"]), a(["a", "a", "a"]),
         AggregatorVerdicts(True, False, False)),
        ("fig3b", a(["g", "r"]), a(["g", "r", "r"]),
         AggregatorVerdicts(True, True, False)),
        ("fig3c", a(["g", "r"]), a(["g", "g", "r", "r"]),
         AggregatorVerdicts(True, False, False)),
    ]


def random_multiset_pair(
    rng: np.random.Generator, symbols: Sequence, max_size: int
) -> tuple[Multiset, Multiset]:
    def draw():
        size = int(rng.integers(0, max_size + 1))
        return Multiset.from_iterable(
            symbols[int(i)] for i in rng.integers(0, len(symbols), size=size)
        )

    return draw(), draw()


# ---------------------------------------------------------------------------
# distinguishability atlas


@dataclass(frozen=True)
class AtlasRow:
    pair_name: str
    config_name: str
    seed: int
    gnn_distinct: bool
    wl_distinct: bool
    oracle_distinct: bool
    embedding_distance: float


class ContainmentViolation(AssertionError):
    """A row broke GNN-distinguished <= WL-distinguished <= non-isomorphic."""


@dataclass
class AtlasResult:
    rows: list[AtlasRow]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(
            "pair_name,config_name,seed,gnn_distinct,wl_distinct,"
            "oracle_distinct,embedding_distance\n"
        )
        for r in self.rows:
            buf.write(
                f"{r.pair_name},{r.config_name},{r.seed},{int(r.gnn_distinct)},"
                f"{int(r.wl_distinct)},{int(r.oracle_distinct)},"
                f"{r.embedding_distance!r}\n"
            )
        return buf.getvalue()


def _resolve_configs(
    configs: Sequence[str | tuple[str, GnnConfig]],
) -> list[tuple[str, GnnConfig | None]]:
    out: list[tuple[str, GnnConfig | None]] = []
    for item in configs:
        if isinstance(item, tuple):
            out.append(item)
        elif item == IDEAL_CONFIG_NAME:
            out.append((IDEAL_CONFIG_NAME, None))
        else:
            out.append((item, preset_config(item)))
    return out


def distinguishability_atlas(
    pairs: Sequence[tuple[str, Graph, Graph]],
    configs: Sequence[str | tuple[str, GnnConfig]],
    seeds: Sequence[int],
    oracle_verdicts: dict[str, bool] | None = None,
) -> AtlasResult:
    """Cross every pair with every config and seed; assert the containment chain.

    Float configs are judged at COLLISION_TOL on eval-mode graph vectors; the
    ideal config compares exact signatures and must match the refinement test
    verdict exactly. oracle_verdicts, when given, supplies precomputed
    brute-force answers keyed by pair name (the dedup pipeline already knows
    them); missing entries fall back to running the oracle.
    """
    resolved = _resolve_configs(configs)
    rows: list[AtlasRow] = []
    models: dict[tuple[str, int, int], GnnModel] = {}
    embeddings: dict[tuple[int, str, int], np.ndarray] = {}

    def embed(g: Graph, cfg_name: str, cfg: GnnConfig, seed: int) -> np.ndarray:
        key = (id(g), cfg_name, seed)
        if key not in embeddings:
            feats = g.features
            dim = feats.vocab_size if hasattr(feats, "vocab_size") else feats.dim
            mkey = (cfg_name, seed, dim)
            if mkey not in models:
                models[mkey] = GnnModel(cfg, dim, 2, seed)
            vec, _ = model_forward(models[mkey], g)
            embeddings[key] = vec.values[0]
        return embeddings[key]

    for pair_name, g1, g2 in pairs:
        max_iter = max(g1.num_nodes, g2.num_nodes)
        wl_distinct = wl_test(g1, g2, max_iter).non_isomorphic
        if oracle_verdicts is not None and pair_name in oracle_verdicts:
            oracle_distinct = oracle_verdicts[pair_name]
        else:
            oracle_distinct = not brute_force_isomorphic(g1, g2)
        if wl_distinct and not oracle_distinct:
            raise ContainmentViolation(
                f"{pair_name}: refinement separated graphs the oracle calls isomorphic"
            )
        for cfg_name, cfg in resolved:
            for seed in seeds:
                if cfg is None:
                    shared = LabelDictionary()
                    gnn_distinct = ideal_gin_embed(g1, max_iter, shared) != ideal_gin_embed(
                        g2, max_iter, shared
                    )
                    dist = 1.0 if gnn_distinct else 0.0
                    if gnn_distinct != wl_distinct:
                        raise ContainmentViolation(
                            f"{pair_name}: ideal mode and refinement disagree"
                        )
                else:
                    e1 = embed(g1, cfg_name, cfg, seed)
                    e2 = embed(g2, cfg_name, cfg, seed)
                    dist = embedding_distance(e1, e2)
                    gnn_distinct = dist > COLLISION_TOL
                    if gnn_distinct and not wl_distinct:
                        raise ContainmentViolation(
                            f"{pair_name}/{cfg_name}/seed={seed}: float model separated "
                            f"a refinement-equivalent pair (distance {dist})"
                        )
                rows.append(
                    AtlasRow(
                        pair_name=pair_name,
                        config_name=cfg_name,
                        seed=seed,
                        gnn_distinct=gnn_distinct,
                        wl_distinct=wl_distinct,
                        oracle_distinct=oracle_distinct,
                        embedding_distance=dist,
                    )
                )
    return AtlasResult(rows=rows)
