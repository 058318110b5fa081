import random

import pytest
from hypothesis import given, settings, strategies as st

import oracles
from sketchrec.corpus import PurchaseMatrix
from sketchrec.similarity import (
    NeighborPolicy,
    SimilarityModel,
    approx_jaccard,
    build_model,
    exact_jaccard,
    merge_similar_items,
    neighbors_plus,
)
from sketchrec.rng import SplitMix64
from sketchrec.sketch import LinearCountingSketch, estimate_intersection, estimate_jaccard


def matrix_of(events, sketch_m=None):
    m = PurchaseMatrix(sketch_m)
    for u, p, q in events:
        m.record_event(u, p, q)
    return m


def test_exact_jaccard_cases():
    m = matrix_of([("u1", "p", 1), ("u2", "p", 1), ("u2", "c", 1), ("u3", "c", 1), ("u9", "z", 1)])
    assert exact_jaccard(m, "p", "p") == 1.0
    assert exact_jaccard(m, "p", "z") == 0.0
    assert exact_jaccard(m, "p", "c") == pytest.approx(1 / 3, abs=1e-15)
    assert exact_jaccard(m, "nothing", "none") == 0.0


events_strategy = st.lists(
    st.tuples(st.sampled_from([f"u{i}" for i in range(8)]), st.sampled_from("pqrst"), st.integers(1, 4)),
    min_size=1,
    max_size=40,
)


@given(events_strategy)
def test_exact_jaccard_matches_sets(events):
    m = matrix_of(events)
    sets = oracles.buyer_sets(events)
    for p in sets:
        for q in sets:
            j = exact_jaccard(m, p, q)
            assert j == exact_jaccard(m, q, p)
            assert 0.0 <= j <= 1.0
            assert j == pytest.approx(oracles.jaccard(sets[p], sets[q]), abs=1e-12)


def test_approx_jaccard_edges():
    m = matrix_of([("u1", "p", 1), ("u2", "p", 1)], sketch_m=128)
    a = m.item_users("p")
    assert approx_jaccard(a, a) == 1.0
    nobody = m.item_users("never-bought")
    assert approx_jaccard(nobody, a) == 0.0
    with pytest.raises(ValueError):
        other = matrix_of([("u1", "q", 1)], sketch_m=64).item_users("q")
        approx_jaccard(a, other)


def test_approx_jaccard_half_overlap():
    # |A| = |B| = 300 sharing 200 users out of 10,000: true J = 0.5
    rng = SplitMix64(21)
    universe = [f"{x:016x}" for x in rng.batch(10_000)]
    hits = 0
    trials = 400
    for _ in range(trials):
        idx = rng.sample(10_000, 400)
        a = [universe[i] for i in idx[:300]]
        b = [universe[i] for i in idx[100:]]
        m = PurchaseMatrix(1024)
        for u in a:
            m.record_event(u, "A", 1)
        for u in b:
            m.record_event(u, "B", 1)
        assert exact_jaccard(m, "A", "B") == 0.5
        hits += abs(approx_jaccard(m.item_users("A"), m.item_users("B")) - 0.5) <= 0.05
    assert hits / trials >= 0.95


def test_single_product_model():
    model = build_model(matrix_of([("u1", "p", 1)]), NeighborPolicy.knn(5))
    assert model.neighbors == {"p": []}


@pytest.mark.parametrize("mode", ["exact", "sketch"])
def test_identical_buyers_are_mutual_neighbours(mode):
    m = matrix_of([("u1", "p", 1), ("u2", "p", 1), ("u1", "q", 2), ("u2", "q", 1)], sketch_m=64)
    model = build_model(m, NeighborPolicy.knn(5), mode)
    assert model.neighbors == {"p": [("q", 1.0)], "q": [("p", 1.0)]}


def test_threshold_model_matches_brute_force():
    rng = random.Random(4)
    events = oracles.random_events(rng, 30, 20, density=0.2)
    model = build_model(matrix_of(events), NeighborPolicy.threshold(0.2), "exact")
    expected = oracles.neighbor_lists(events, "threshold", 0.2)
    assert model.neighbors.keys() == expected.keys()
    for p, lst in expected.items():
        assert [q for q, _ in model.neighbors[p]] == [q for q, _ in lst]
        for (_, got), (_, want) in zip(model.neighbors[p], lst):
            assert got == pytest.approx(want, abs=1e-12)


@settings(max_examples=60)
@given(events_strategy, st.integers(1, 4))
def test_model_invariants(events, k):
    model = build_model(matrix_of(events), NeighborPolicy.knn(k))
    for p, lst in model.neighbors.items():
        assert p not in {q for q, _ in lst}
        assert len(lst) <= k
        assert lst == sorted(lst, key=lambda x: (-x[1], x[0]))
        assert all(s > 0 for _, s in lst)
    assert build_model(matrix_of(events), NeighborPolicy.knn(k)).neighbors == model.neighbors


def test_sketch_mode_recovers_exact_neighbours_with_wide_sketches():
    # sparse 200-user corpora, m = 4 |U|; dense corpora put many pairs within
    # sketch error of the cut and recover far less often
    rng = random.Random(8)
    agree = 0
    trials = 200
    policy = NeighborPolicy.threshold(0.25)
    for _ in range(trials):
        events = oracles.random_events(rng, 200, 10, density=0.1)
        m = matrix_of(events)
        m.freeze(4 * 200)
        exact = build_model(m, policy, "exact")
        approx = build_model(m, policy, "sketch")
        agree += all(
            {q for q, _ in exact.neighbors[p]} == {q for q, _ in approx.neighbors[p]}
            for p in exact.neighbors
        )
    assert agree / trials >= 0.99


def test_neighbors_plus():
    m = matrix_of([("u1", "p", 1), ("u1", "q", 1), ("u2", "z", 1)])
    model = build_model(m, NeighborPolicy.knn(3))
    assert neighbors_plus(model, "z") == {"z"}
    assert neighbors_plus(model, "p") == {"p", "q"}
    with pytest.raises(KeyError):
        neighbors_plus(model, "missing")


def test_policy_validation():
    for bad in (lambda: NeighborPolicy.knn(0), lambda: NeighborPolicy.threshold(0.0),
                lambda: NeighborPolicy.threshold(1.5), lambda: NeighborPolicy("cosine")):
        with pytest.raises(ValueError):
            bad()
    assert str(NeighborPolicy.parse("knn:7")) == "knn:7"
    assert NeighborPolicy.parse("threshold:0.25") == NeighborPolicy.threshold(0.25)


def test_model_text_format():
    m = matrix_of([("u1", "a", 1), ("u2", "a", 1), ("u2", "b", 1), ("u3", "c", 1)], sketch_m=16)
    model = build_model(m, NeighborPolicy.threshold(0.1), "sketch")
    text = model.to_text()
    lines = text.splitlines()
    assert lines[0] == "sketchrec-model v1 mode=sketch policy=threshold:0.1"
    assert lines[1].startswith("item a : b=")
    assert lines[3] == "item c :"
    assert lines[4] == f"sketch a 16 {m.sketch('a').to_hex()}"
    back = SimilarityModel.from_text(text)
    assert back.to_text() == text
    assert back.sketches["a"] == m.sketch("a")


def test_model_rejects_unwritable_ids():
    model = SimilarityModel({"has space": []}, NeighborPolicy.knn(1), "exact")
    with pytest.raises(ValueError):
        model.to_text()


def test_model_rejects_garbage():
    with pytest.raises(ValueError):
        SimilarityModel.from_text("not a model\n")
    with pytest.raises(ValueError):
        SimilarityModel.from_text("sketchrec-model v1 mode=exact policy=knn:3\nbogus line\n")


def _chain_events():
    # p = S + A, q = S, r = S + B with |S| = 96, |A| = |B| = 4:
    # J(p, q) = J(q, r) = 96/100, J(p, r) = 96/104
    shared = [f"s{i}" for i in range(96)]
    events = [(u, "q", 1) for u in shared]
    events += [(u, "p", 1) for u in shared + ["a1", "a2", "a3", "a4"]]
    events += [(u, "r", 2) for u in shared + ["b1", "b2", "b3", "b4"]]
    events += [("x", "other", 1)]
    return events


def test_chain_merges_by_single_linkage():
    m = matrix_of(_chain_events())
    assert exact_jaccard(m, "p", "q") == 0.96
    assert exact_jaccard(m, "p", "r") == pytest.approx(0.923, abs=1e-3)
    merged, mapping = merge_similar_items(m, 0.95)
    assert mapping == {"p": "p", "q": "p", "r": "p", "other": "other"}
    assert merged.products == {"p", "other"}
    col = merged.column("p")
    assert col["s0"] == 1 + 1 + 2
    assert col["a1"] == 1 and col["b1"] == 2
    again, mapping2 = merge_similar_items(merged, 0.95)
    assert again.entries == merged.entries
    assert all(k == v for k, v in mapping2.items())


def test_merge_sums_quantities():
    m = matrix_of([("u", "a", 1), ("u", "b", 2)])
    merged, mapping = merge_similar_items(m, 0.95)
    assert merged.column("a") == {"u": 3}
    assert mapping == {"a": "a", "b": "a"}


def test_merge_at_one_leaves_distinct_items():
    m = matrix_of([("u1", "a", 1), ("u2", "a", 1), ("u2", "b", 1)])
    merged, mapping = merge_similar_items(m, 1.0)
    assert merged.entries == m.entries
    assert all(k == v for k, v in mapping.items())


@pytest.mark.parametrize("theta", [0.0, -0.1, 1.01])
def test_merge_threshold_range(theta):
    with pytest.raises(ValueError):
        merge_similar_items(PurchaseMatrix(), theta)


@settings(max_examples=50)
@given(events_strategy, st.sampled_from([0.5, 0.7, 0.95]))
def test_merge_idempotent(events, theta):
    merged, _ = merge_similar_items(matrix_of(events), theta)
    twice, mapping = merge_similar_items(merged, theta)
    assert twice.entries == merged.entries
    assert all(k == v for k, v in mapping.items())


def test_sketch_skip_rule_is_lossless():
    # disjoint bit patterns with an unsaturated union never give a positive
    # intersection estimate
    rng = SplitMix64(9)
    for _ in range(5000):
        m = 1 + rng.below(128)
        x = rng.next_u64() & ((1 << m) - 1)
        y = rng.next_u64() & ((1 << m) - 1) & ~x
        a, b = LinearCountingSketch(m, x), LinearCountingSketch(m, y)
        if (a | b).zero_count:
            assert estimate_intersection(a, b) == 0.0


def test_saturated_disjoint_pair_is_still_scored():
    # two disjoint halves filling a 2-bit sketch: the clamped union estimate
    # is too small and the pair gets a positive similarity
    a, b = LinearCountingSketch(2, 0b01), LinearCountingSketch(2, 0b10)
    assert estimate_jaccard(a, b) > 0
    m = PurchaseMatrix(2)
    m.record_event("x", "A", 1)
    m.record_event("y", "B", 1)
    m.freeze()
    assert not m.sketch("A").overlaps(m.sketch("B"))
    assert (m.sketch("A") | m.sketch("B")).zero_count == 0
    assert build_model(m, NeighborPolicy.knn(1), "sketch").neighbors["A"]
