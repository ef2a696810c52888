import numpy as np
import pytest
from hypothesis import given, strategies as st

from relik.embed import EmbeddingStore, Scorer, random_store
from relik.errors import DomainError
from relik.evaluation import (
    approximation_study,
    best_threshold_accuracy,
    classification_accuracy,
    edge_weights,
    margin_report,
    mrr,
    reciprocal_ranks,
    rr_baseline,
    score_histogram,
    subgraph_correlation,
)
from relik.kg import KnowledgeGraph, corrupt_triples
from relik.reliability import SampleConfig, relik_values
from relik.synthetic import micro_m1, random_kg

from oracles import brute_filtered_rr, brute_threshold_accuracy


def line_store(kg, positions, rel=1.0):
    ent = np.asarray(positions, dtype=float).reshape(-1, 1)
    return EmbeddingStore(1, "real", ent, np.full((kg.n_relations, 1), rel),
                          entity_labels=kg.entities, relation_labels=kg.relations)


# -- ranking ---------------------------------------------------------------------------

def test_rr_one_when_true_tail_wins():
    kg, store = micro_m1()
    assert reciprocal_ranks(kg, Scorer(store, "TransE_L1"), [(0, 0, 1)], "tail")[0] == 1.0


def test_rr_half_with_one_outscorer():
    kg = KnowledgeGraph(["A", "B", "C"], ["r"], [[0, 0, 1]])
    sc = Scorer(line_store(kg, [0.0, 1.5, 1.0]), "TransE_L1")  # C (distance 0) beats B (0.5); A (1) does not
    assert reciprocal_ranks(kg, sc, [(0, 0, 1)], "tail")[0] == 0.5


def test_filtering_skips_known_facts():
    kg = KnowledgeGraph(["A", "B", "C"], ["r"], [[0, 0, 1], [0, 0, 2]])
    sc = Scorer(line_store(kg, [0.0, 1.5, 1.0]), "TransE_L1")
    assert reciprocal_ranks(kg, sc, [(0, 0, 1)], "tail")[0] == 1.0
    empty = KnowledgeGraph(kg.entities, kg.relations, np.zeros((0, 3), int))
    assert reciprocal_ranks(kg, sc, [(0, 0, 1)], "tail", filter_kg=empty)[0] == 0.5


def test_mrr_empty_is_error():
    kg, store = micro_m1()
    with pytest.raises(DomainError):
        mrr(kg, Scorer(store, "TransE_L1"), np.zeros((0, 3), int))


@pytest.mark.parametrize("target", ["tail", "relation"])
def test_mrr_matches_oracle_on_m1_variants(target):
    gen = np.random.default_rng(0)
    kg = KnowledgeGraph(["A", "B", "C"], ["r", "q"], [[0, 0, 1], [1, 1, 2], [2, 0, 0]])
    for _ in range(50):
        for kind in ("TransE_L1", "DistMult", "RotatE"):
            store = random_store(kg, kind, 2, gen)
            sc = Scorer(store, kind)
            got = mrr(kg, sc, kg.triples, target)
            want = np.mean([brute_filtered_rr(kg, store, kind, tuple(int(v) for v in x), target) for x in kg.triples])
            assert got == pytest.approx(want, abs=1e-15)


@given(st.integers(0, 2**32 - 1))
def test_reciprocal_ranks_oracle_random(seed):
    gen = np.random.default_rng(seed)
    kg = random_kg(gen, 15, 3)
    kind = ["TransE_L2", "PairRE", "ComplEx"][seed % 3]
    store = random_store(kg, kind, 3, gen)
    sc = Scorer(store, kind)
    for target in ("tail", "relation"):
        got = reciprocal_ranks(kg, sc, kg.triples, target)
        want = [brute_filtered_rr(kg, store, kind, tuple(int(v) for v in x), target) for x in kg.triples]
        assert np.array_equal(got, np.array(want))


# -- classification -------------------------------------------------------------------------

def test_separable_scores():
    assert best_threshold_accuracy([5, 6, 7], [1, 2, 3])[0] == 1.0


def test_identical_scores():
    assert best_threshold_accuracy([1.0] * 4, [1.0] * 4)[0] == 0.5


def test_threshold_scan_matches_brute_force():
    gen = np.random.default_rng(1)
    for _ in range(20):
        pos = gen.normal(0.5, 1, 100).round(1)
        neg = gen.normal(0, 1, 100).round(1)
        acc, thr = best_threshold_accuracy(pos, neg)
        assert acc == brute_threshold_accuracy(pos.tolist(), neg.tolist())
        assert acc == ((pos > thr).sum() + (neg <= thr).sum()) / 200


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=30), st.integers(0, 2**32 - 1))
def test_balanced_accuracy_at_least_half(pos, seed):
    neg = np.random.default_rng(seed).uniform(-5, 5, len(pos))
    acc, _ = best_threshold_accuracy(pos, neg)
    assert 0.5 <= acc <= 1.0


def test_classification_accuracy_deterministic_and_holdout():
    gen = np.random.default_rng(2)
    kg = random_kg(gen, 25, 2)
    sc = Scorer(random_store(kg, "DistMult", 4, gen), "DistMult")
    a = classification_accuracy(kg, sc, kg.triples, np.random.default_rng(7))
    b = classification_accuracy(kg, sc, kg.triples, np.random.default_rng(7))
    assert a == b and 0.5 <= a <= 1.0
    h = classification_accuracy(kg, sc, kg.triples[:5], np.random.default_rng(7), holdout=kg.triples[5:])
    assert 0.0 <= h <= 1.0


# -- estimator study -----------------------------------------------------------------------

def test_approximation_study_full_fraction_zero_mse():
    gen = np.random.default_rng(3)
    kg = random_kg(gen, 20, 2)
    sc = Scorer(random_store(kg, "TransE_L1", 3, gen), "TransE_L1")
    rep = approximation_study(kg, sc, kg.triples, [0.5, 1.0], repetitions=2, seed=4, timing=False)
    assert rep.columns == ["fraction", "seconds", "mse_apx", "mse_lb"]
    full = rep.rows[1]
    assert full["mse_apx"] == 0.0 and full["mse_lb"] == 0.0
    assert rep.rows[0]["seconds"] is None
    assert rep.rows[0]["mse_lb"] >= 0 and rep.rows[0]["mse_apx"] >= 0


def test_approximation_study_reproducible():
    gen = np.random.default_rng(3)
    kg = random_kg(gen, 20, 2)
    sc = Scorer(random_store(kg, "TransE_L1", 3, gen), "TransE_L1")
    a = approximation_study(kg, sc, kg.triples, [0.2], 3, seed=9, timing=False)
    b = approximation_study(kg, sc, kg.triples, [0.2], 3, seed=9, timing=False, threads=3)
    assert a.as_dict() == b.as_dict()


# -- subgraph correlation ---------------------------------------------------------------------

def _trained_like(seed=0):
    gen = np.random.default_rng(seed)
    kg = random_kg(gen, 30, 2, max_facts=80)
    return kg, Scorer(random_store(kg, "TransE_L2", 4, gen), "TransE_L2")


def test_correlation_deterministic():
    kg, sc = _trained_like()
    a = subgraph_correlation(kg, sc, 3, 6, "tail_mrr", seed=5)
    b = subgraph_correlation(kg, sc, 3, 6, "tail_mrr", seed=5)
    assert a.rows == b.rows


def test_correlation_self_check():
    kg, sc = _trained_like()
    rep = subgraph_correlation(kg, sc, 8, 6, "relik", seed=1)
    assert rep.summary["pearson_r"] == pytest.approx(1.0, abs=1e-12)


def test_correlation_validation():
    kg, sc = _trained_like()
    with pytest.raises(DomainError):
        subgraph_correlation(kg, sc, 2, 6, "tail_mrr")
    with pytest.raises(DomainError):
        subgraph_correlation(kg, sc, 3, 6, "hits")


def test_correlation_skips_empty_subgraphs():
    kg = KnowledgeGraph(["A", "B", "C", "D"], ["r"], [[0, 0, 1], [2, 0, 3]])
    sc = Scorer(random_store(kg, "TransE_L1", 2, np.random.default_rng(0)), "TransE_L1")
    rep = subgraph_correlation(kg, sc, 4, 1, "tail_mrr", seed=0)
    assert rep.summary["skipped"] == 4 and rep.summary["pearson_r"] is None


# -- margin report -------------------------------------------------------------------------------

def test_margin_rejects_overlap_and_bad_labels():
    kg, sc = _trained_like()
    pos = kg.triples[:3]
    with pytest.raises(DomainError):
        margin_report(kg, sc, pos, pos)
    with pytest.raises(DomainError):
        margin_report(kg, sc, pos, kg.triples[3:5])
    neg = corrupt_triples(kg, pos, np.random.default_rng(0))
    with pytest.raises(DomainError):
        margin_report(kg, sc, neg, pos)


def test_margin_perfect_positives():
    kg = KnowledgeGraph(["A", "B", "C", "D"], ["r"], [[0, 0, 1]])
    sc = Scorer(line_store(kg, [0.0, 1.0, 10.0, 20.0]), "TransE_L1")
    rep = margin_report(kg, sc, [(0, 0, 1)], [(2, 0, 3)], SampleConfig(fraction=1.0))
    assert rep.summary["mean_relik_pos"] == 1.0
    assert rep.summary["mean_relik_neg"] < 1.0
    assert rep.config["rr_baseline"]


def test_margin_negatives_use_rank_formulas():
    kg, sc = _trained_like(3)
    pos = kg.triples[:4]
    neg = corrupt_triples(kg, pos, np.random.default_rng(1))
    rep = margin_report(kg, sc, pos, neg, SampleConfig(fraction=1.0), "scaled")
    ex = relik_values(kg, sc, neg, "exact", require_positive=False)
    assert rep.summary["mean_relik_neg"] == pytest.approx(ex.mean(), abs=1e-15)
    assert rep.summary["mean_rr_pos"] == pytest.approx(rr_baseline(kg, sc, pos).mean(), abs=1e-15)


# -- weights and histograms ----------------------------------------------------------------------

def test_edge_weights_and_histogram():
    kg, sc = _trained_like(4)
    w = edge_weights(kg, sc, "relik")
    assert len(w) == kg.n_facts and all(0 < x.weight <= 1 for x in w)
    rr = edge_weights(kg, sc, "rr")
    assert all(0 < x.weight <= 1 for x in rr)
    with pytest.raises(DomainError):
        edge_weights(kg, sc, "degree")
    neg = corrupt_triples(kg, kg.triples, np.random.default_rng(0))
    rep = score_histogram(kg, sc, kg.triples, neg, bins=7)
    assert len(rep.rows) == 7
    assert sum(r["count_pos"] for r in rep.rows) == kg.n_facts
    assert sum(r["count_neg"] for r in rep.rows) == len(neg)
