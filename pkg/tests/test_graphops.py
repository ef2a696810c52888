import collections

import numpy as np
import pytest
from hypothesis import given, strategies as st

from relik.errors import ConfigurationError, DomainError, TruncationError
from relik.graphops import (
    WeightedTriple,
    densest_subgraph,
    induced_triples,
    peel_decomposition,
    rwr_subgraph,
)
from relik.kg import KnowledgeGraph
from relik.synthetic import random_kg

from oracles import brute_densest, fact_set


def wt(edges):
    return [WeightedTriple((u, 0, v), float(w)) for u, v, w in edges]


def star():
    # X = 0, leaves 1..5
    return KnowledgeGraph(["X", "L1", "L2", "L3", "L4", "L5"], ["r"], [[0, 0, i] for i in range(1, 6)])


# -- random walk with restart ---------------------------------------------------------

def test_target_one_is_start_with_self_loops():
    kg = KnowledgeGraph(["A", "B"], ["r", "q"], [[0, 0, 0], [0, 1, 1], [1, 0, 1]])
    sub = rwr_subgraph(kg, 1, 0.2, np.random.default_rng(0))
    assert sub.size == 1
    (v,) = sub.nodes
    assert all(t[0] == v and t[2] == v for t in sub.triples) and len(sub.triples) == 1


def test_saturation_returns_component():
    kg = KnowledgeGraph(list("ABCDE"), ["r"], [[0, 0, 1], [1, 0, 2], [3, 0, 4]])
    for seed in range(20):
        sub = rwr_subgraph(kg, 50, 0.2, np.random.default_rng(seed))
        assert set(sub.nodes) in ({0, 1, 2}, {3, 4})


def test_star_symmetry():
    kg = star()
    present = collections.Counter()
    n = 1000
    for seed in range(n):
        sub = rwr_subgraph(kg, 3, 0.2, np.random.default_rng(seed))
        assert 0 in sub.nodes and sub.size == 3
        present.update(v for v in sub.nodes if v != 0)
    for leaf in range(1, 6):
        assert abs(present[leaf] / n - 0.4) <= 0.05


def test_restart_probability_validation():
    with pytest.raises(ConfigurationError):
        rwr_subgraph(star(), 3, 1.0, np.random.default_rng(0))
    with pytest.raises(ConfigurationError):
        rwr_subgraph(star(), 0, 0.2, np.random.default_rng(0))
    with pytest.raises(DomainError):
        rwr_subgraph(KnowledgeGraph(["A"], ["r"], np.zeros((0, 3), int)), 1, 0.2, np.random.default_rng(0))


def test_truncation_carries_partial(monkeypatch):
    import relik.graphops as g

    monkeypatch.setattr(g, "STEP_BUDGET_PER_NODE", 0)
    with pytest.raises(TruncationError) as err:
        rwr_subgraph(star(), 3, 0.2, np.random.default_rng(0))
    assert err.value.partial.size == 1


@given(st.integers(0, 2**32 - 1), st.integers(1, 12), st.floats(0.0, 0.9))
def test_rwr_properties(seed, target, p):
    gen = np.random.default_rng(seed)
    kg = random_kg(gen, 20, 2)
    a = rwr_subgraph(kg, target, p, np.random.default_rng(seed))
    b = rwr_subgraph(kg, target, p, np.random.default_rng(seed))
    assert a.nodes == b.nodes and np.array_equal(a.triples, b.triples)
    facts = fact_set(kg)
    nodes = set(a.nodes)
    for t in a.triples:
        assert tuple(int(v) for v in t) in facts and t[0] in nodes and t[2] in nodes
    assert len(a.triples) == len(induced_triples(kg, nodes))
    # size equals min(target, component size)
    comp = {a.origin["start"]}
    frontier = [a.origin["start"]]
    while frontier:
        v = frontier.pop()
        for h, _, t in facts:
            for x, y in ((h, t), (t, h)):
                if x == v and y not in comp:
                    comp.add(y)
                    frontier.append(y)
    assert a.size == min(target, len(comp))


# -- densest subgraph -----------------------------------------------------------------

def test_triangle():
    nodes, d = densest_subgraph(None, wt([(0, 1, 1), (1, 2, 1), (0, 2, 1)]))
    assert nodes == (0, 1, 2) and d == 1.0


def test_path():
    nodes, d = densest_subgraph(None, wt([(0, 1, 1), (1, 2, 1)]))
    assert nodes == (0, 1, 2) and d == pytest.approx(2 / 3)
    assert brute_densest([(0, 1, 1), (1, 2, 1)])[0] == pytest.approx(2 / 3)


def test_single_edge():
    nodes, d = densest_subgraph(None, wt([(3, 5, 2.5)]))
    assert nodes == (3, 5) and d == 1.25


def test_all_zero_weights():
    nodes, d = densest_subgraph(None, wt([(0, 1, 0), (1, 2, 0)]))
    assert len(nodes) == 1 and d == 0.0


def test_parallel_edges_accumulate():
    nodes, d = densest_subgraph(None, [WeightedTriple((0, 0, 1), 1.0), WeightedTriple((0, 1, 1), 2.0),
                                       WeightedTriple((1, 0, 2), 0.5)])
    assert nodes == (0, 1) and d == 1.5


def test_invalid_weights():
    with pytest.raises(DomainError):
        densest_subgraph(None, wt([(0, 1, -1)]))
    with pytest.raises(DomainError):
        densest_subgraph(None, [])


@st.composite
def weighted_graphs(draw, max_nodes=10):
    n = draw(st.integers(2, max_nodes))
    # spanning tree plus extra edges keeps the graph connected
    edges = [(draw(st.integers(0, i - 1)), i) for i in range(1, n)]
    extra = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=2 * n))
    edges += extra
    weights = draw(st.lists(st.floats(0.0, 1.0), min_size=len(edges), max_size=len(edges)))
    return [(u, v, w) for (u, v), w in zip(edges, weights)]


@given(weighted_graphs())
def test_half_approximation(edges):
    opt, _ = brute_densest(edges)
    _, got = densest_subgraph(None, wt(edges))
    assert got >= 0.5 * opt - 1e-12
    assert got <= opt + 1e-12


# -- peeling decomposition ---------------------------------------------------------------

def test_empty_decomposition():
    assert peel_decomposition(None, []).components == []


def test_two_disjoint_triangles():
    edges = [(0, 1, 1), (1, 2, 1), (0, 2, 1), (3, 4, 1), (4, 5, 1), (3, 5, 1)]
    dec = peel_decomposition(None, wt(edges))
    assert [c.nodes for c in dec.components] == [(0, 1, 2, 3, 4, 5)] or \
        sorted(c.nodes for c in dec.components) == [(0, 1, 2), (3, 4, 5)]
    for c in dec.components:
        assert brute_densest([(int(t[0]), int(t[2]), float(w)) for t, w in zip(c.triples, c.weights)])[0] == 1.0


def test_two_disjoint_triangles_of_different_weight():
    edges = [(0, 1, 2), (1, 2, 2), (0, 2, 2), (3, 4, 1), (4, 5, 1), (3, 5, 1)]
    dec = peel_decomposition(None, wt(edges))
    assert [c.nodes for c in dec.components] == [(0, 1, 2), (3, 4, 5)]
    assert dec.densities == [2.0, 1.0]


@given(weighted_graphs())
def test_peeling_conserves_edges(edges):
    weights = wt(edges)
    dec = peel_decomposition(None, weights)
    got = collections.Counter()
    for comp in dec.components:
        for t, w in zip(comp.triples, comp.weights):
            got[(tuple(int(v) for v in t), float(w))] += 1
    want = collections.Counter((tuple(w.triple), w.weight) for w in weights)
    assert got == want
    cum = dec.cumulative()
    assert len(cum[-1].triples) == len(weights)
    assert all(len(a.triples) < len(b.triples) for a, b in zip(cum, cum[1:]))


@given(weighted_graphs())
def test_peel_densities_non_increasing(edges):
    dens = peel_decomposition(None, wt(edges)).densities
    assert all(b <= a + 1e-12 for a, b in zip(dens, dens[1:]))
