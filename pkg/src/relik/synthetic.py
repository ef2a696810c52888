"""Synthetic graphs for experiments and tests."""

from __future__ import annotations

import numpy as np

from .embed import EmbeddingStore
from .kg import KnowledgeGraph


def countries_like(seed: int = 0, n_regions: int = 5, n_subregions: int = 23, n_countries: int = 243,
                   neighbors: int = 2) -> KnowledgeGraph:
    """A geography-shaped graph at the scale of the Countries benchmark.

    Countries sit in subregions which sit in regions (``locatedIn``: country
    to subregion, country to region, subregion to region).  Countries get
    planar positions clustered by subregion and ``neighborOf`` links each
    country with its ``neighbors`` nearest countries, in both directions.
    With the defaults: 271 entities, 2 relations, roughly 1200 facts.
    """
    gen = np.random.default_rng(seed)
    regions = [f"region_{i}" for i in range(n_regions)]
    subs = [f"subregion_{i}" for i in range(n_subregions)]
    countries = [f"country_{i}" for i in range(n_countries)]

    sub_region = np.concatenate([np.arange(n_regions), gen.integers(0, n_regions, n_subregions - n_regions)])
    country_sub = np.concatenate([np.arange(n_subregions), gen.integers(0, n_subregions, n_countries - n_subregions)])
    region_xy = gen.uniform(0, 100, size=(n_regions, 2))
    sub_xy = region_xy[sub_region] + gen.normal(0, 12, size=(n_subregions, 2))
    country_xy = sub_xy[country_sub] + gen.normal(0, 4, size=(n_countries, 2))

    facts = []
    for c in range(n_countries):
        s = int(country_sub[c])
        facts.append((countries[c], "locatedIn", subs[s]))
        facts.append((countries[c], "locatedIn", regions[int(sub_region[s])]))
    for s in range(n_subregions):
        facts.append((subs[s], "locatedIn", regions[int(sub_region[s])]))
    dist = np.linalg.norm(country_xy[:, None, :] - country_xy[None, :, :], axis=-1)
    np.fill_diagonal(dist, np.inf)
    pairs = set()
    for c in range(n_countries):
        for o in np.argsort(dist[c], kind="stable")[:neighbors]:
            pairs.add((min(c, int(o)), max(c, int(o))))
    for a, b in sorted(pairs):
        facts.append((countries[a], "neighborOf", countries[b]))
        facts.append((countries[b], "neighborOf", countries[a]))
    return KnowledgeGraph.from_labeled(facts)


def chain_kg(n_facts: int = 5, relation: str = "next") -> KnowledgeGraph:
    """``e0 -> e1 -> ... -> e{n}`` with one relation."""
    return KnowledgeGraph.from_labeled((f"e{i}", relation, f"e{i + 1}") for i in range(n_facts))


def random_kg(gen: np.random.Generator, max_entities: int = 30, max_relations: int = 3,
              max_facts: int | None = None) -> KnowledgeGraph:
    """A random graph with at least one fact; sizes are drawn uniformly."""
    n_e = int(gen.integers(2, max_entities + 1))
    n_r = int(gen.integers(1, max_relations + 1))
    cap = max_facts if max_facts is not None else 3 * n_e
    m = int(gen.integers(1, cap + 1))
    rows = np.stack([gen.integers(0, n_e, m), gen.integers(0, n_r, m), gen.integers(0, n_e, m)], axis=1)
    return KnowledgeGraph([f"e{i}" for i in range(n_e)], [f"r{i}" for i in range(n_r)], rows)


def micro_m1(e_b: float = 1.0, e_c: float = 5.0) -> tuple[KnowledgeGraph, EmbeddingStore]:
    """E={A,B,C}, R={r}, F={(A,r,B)} with one-dimensional TransE vectors."""
    kg = KnowledgeGraph(["A", "B", "C"], ["r"], [[0, 0, 1]])
    store = EmbeddingStore(1, "real", np.array([[0.0], [e_b], [e_c]]), np.array([[1.0]]),
                           entity_labels=("A", "B", "C"), relation_labels=("r",))
    return kg, store
