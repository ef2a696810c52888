"""Subgraph sampling and weighted densest-subgraph peeling."""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ConfigurationError, DomainError, TruncationError
from .kg import KnowledgeGraph, Triple

STEP_BUDGET_PER_NODE = 1_000_000


@dataclass(frozen=True)
class SubgraphSample:
    """A node set and the facts it carries.

    ``triples`` keeps multiplicity and order; for RWR samples it is the
    induced closure of ``nodes`` in sorted fact order.
    """

    nodes: tuple[int, ...]
    triples: np.ndarray
    origin: dict = field(default_factory=dict)
    weights: np.ndarray | None = None

    @property
    def size(self) -> int:
        return len(self.nodes)

    def as_dict(self, kg: KnowledgeGraph | None = None) -> dict:
        d = {
            "nodes": [int(n) for n in self.nodes],
            "triples": [[int(v) for v in t] for t in self.triples],
            "origin": dict(self.origin),
        }
        if kg is not None:
            d["node_labels"] = [kg.entities[n] for n in self.nodes]
            d["triple_labels"] = [list(kg.label(t)) for t in self.triples]
        if self.weights is not None:
            d["weights"] = [float(w) for w in self.weights]
        return d


class WeightedTriple(NamedTuple):
    triple: Triple
    weight: float


def induced_triples(kg: KnowledgeGraph, nodes) -> np.ndarray:
    """All facts whose head and tail both lie in ``nodes``."""
    member = np.zeros(kg.n_entities, dtype=bool)
    member[np.asarray(list(nodes), dtype=np.int64)] = True
    t = kg.triples
    keep = member[t[:, 0]] & member[t[:, 2]]
    sel = t[keep]
    return sel[np.argsort(kg.encode(sel), kind="stable")]


def _component(start: int, ptr, facts, triples) -> int:
    seen = {start}
    queue = deque([start])
    while queue:
        v = queue.popleft()
        for f in facts[ptr[v]:ptr[v + 1]]:
            h, _, t = triples[f]
            u = t if h == v else h
            if u not in seen:
                seen.add(u)
                queue.append(u)
    return len(seen)


def rwr_subgraph(kg: KnowledgeGraph, target_nodes: int, restart_prob: float,
                 rng: np.random.Generator) -> SubgraphSample:
    """Grow a node set by an undirected random walk with restart.

    The start node is uniform over entities with at least one fact.  Each
    step returns to the start with probability ``restart_prob``; otherwise it
    follows an incident fact chosen uniformly.  The walk stops once
    ``min(target_nodes, component size)`` distinct nodes were visited.
    """
    if target_nodes < 1:
        raise ConfigurationError("target_nodes must be at least 1")
    if not 0.0 <= restart_prob < 1.0:
        raise ConfigurationError(f"restart probability must lie in [0, 1), got {restart_prob}")
    if kg.n_facts == 0:
        raise DomainError("cannot walk on a graph without facts")
    ptr, facts = kg.undirected_adjacency()
    degree = np.diff(ptr)
    candidates = np.flatnonzero(degree > 0)
    start = int(candidates[rng.integers(len(candidates))])
    goal = min(target_nodes, _component(start, ptr, facts, kg.triples))

    visited = [start]
    seen = {start}
    current = start
    budget = STEP_BUDGET_PER_NODE * target_nodes
    steps = 0
    triples = kg.triples
    while len(visited) < goal:
        if steps >= budget:
            partial = SubgraphSample(tuple(sorted(seen)), induced_triples(kg, seen),
                                     {"start": start, "steps": steps})
            raise TruncationError(f"random walk exhausted {budget} steps with {len(seen)} nodes", partial)
        steps += 1
        if rng.random() < restart_prob:
            current = start
            continue
        lo, hi = ptr[current], ptr[current + 1]
        f = facts[lo + rng.integers(hi - lo)]
        h, _, t = triples[f]
        current = int(t if h == current else h)
        if current not in seen:
            seen.add(current)
            visited.append(current)
    nodes = tuple(sorted(seen))
    return SubgraphSample(nodes, induced_triples(kg, nodes), {"start": start, "steps": steps})


# -- densest subgraph -------------------------------------------------------

def _edge_arrays(weights: Sequence[WeightedTriple]):
    if not weights:
        return np.zeros((0, 3), dtype=np.int64), np.zeros(0)
    trip = np.array([tuple(w[0]) for w in weights], dtype=np.int64).reshape(-1, 3)
    wts = np.array([float(w[1]) for w in weights], dtype=np.float64)
    if not np.all(np.isfinite(wts)) or np.any(wts < 0):
        raise DomainError("edge weights must be finite and non-negative")
    return trip, wts


def _peel(trip: np.ndarray, wts: np.ndarray, active: np.ndarray) -> tuple[list[int], float]:
    """Charikar's greedy peeling over the active edges; returns (nodes, density)."""
    idx = np.flatnonzero(active)
    nodes = sorted(set(trip[idx, 0].tolist()) | set(trip[idx, 2].tolist()))
    degree = {v: 0.0 for v in nodes}
    incident: dict[int, list[int]] = {v: [] for v in nodes}
    for e in idx:
        h, t = int(trip[e, 0]), int(trip[e, 2])
        w = wts[e]
        degree[h] += w
        incident[h].append(e)
        if t != h:
            degree[t] += w
            incident[t].append(e)
    total = math.fsum(wts[idx])
    if total == 0.0:
        return [nodes[0]], 0.0

    heap = [(degree[v], v) for v in nodes]
    heapq.heapify(heap)
    alive_edge = {int(e): True for e in idx}
    removed: list[int] = []
    gone = set()
    remaining = len(nodes)
    best_density, best_cut = total / remaining, 0
    while remaining > 1:
        deg, v = heapq.heappop(heap)
        if v in gone or deg != degree[v]:
            continue
        gone.add(v)
        removed.append(v)
        remaining -= 1
        for e in incident[v]:
            if not alive_edge[e]:
                continue
            alive_edge[e] = False
            w = wts[e]
            total -= w
            h, t = int(trip[e, 0]), int(trip[e, 2])
            u = t if h == v else h
            if u != v:
                degree[u] -= w
                heapq.heappush(heap, (degree[u], u))
        density = total / remaining
        if density > best_density:
            best_density, best_cut = density, len(removed)
    best = sorted(set(nodes) - set(removed[:best_cut]))
    member = set(best)
    inside = [e for e in idx if trip[e, 0] in member and trip[e, 2] in member]
    return best, math.fsum(wts[inside]) / len(best)


def densest_subgraph(kg: KnowledgeGraph | None, weights: Sequence[WeightedTriple]) -> tuple[tuple[int, ...], float]:
    """Greedy 1/2-approximate weighted densest subgraph.

    Parallel edges add their weights; ties in minimum degree go to the
    smallest entity id.  All-zero weights yield the smallest node alone with
    density 0.
    """
    trip, wts = _edge_arrays(weights)
    if len(wts) == 0:
        raise DomainError("densest subgraph of an empty edge list")
    nodes, density = _peel(trip, wts, np.ones(len(wts), dtype=bool))
    return tuple(nodes), density


@dataclass(frozen=True)
class Decomposition:
    components: list[SubgraphSample]
    densities: list[float]

    def cumulative(self) -> list[SubgraphSample]:
        """Unions of the first 1, 2, ... components (growing subgraphs)."""
        out = []
        nodes: set[int] = set()
        parts: list[np.ndarray] = []
        wparts: list[np.ndarray] = []
        for comp in self.components:
            nodes |= set(comp.nodes)
            parts.append(comp.triples)
            wparts.append(comp.weights)
            out.append(SubgraphSample(tuple(sorted(nodes)), np.concatenate(parts), {"prefix": len(parts)},
                                      np.concatenate(wparts)))
        return out


def peel_decomposition(kg: KnowledgeGraph | None, weights: Sequence[WeightedTriple]) -> Decomposition:
    """Repeatedly extract the densest subgraph and delete its edges.

    Every input edge lands in exactly one component.  If only zero-weight
    edges remain they are emitted together as a final component.
    """
    trip, wts = _edge_arrays(weights)
    active = np.ones(len(wts), dtype=bool)
    comps, dens = [], []
    while active.any():
        if math.fsum(wts[active]) == 0.0:
            take = active.copy()
            density = 0.0
        else:
            nodes, density = _peel(trip, wts, active)
            member = np.zeros(int(trip[:, [0, 2]].max()) + 1, dtype=bool)
            member[nodes] = True
            take = active & member[trip[:, 0]] & member[trip[:, 2]]
        sel = np.flatnonzero(take)
        comp_nodes = tuple(sorted(set(trip[sel, 0].tolist()) | set(trip[sel, 2].tolist())))
        comps.append(SubgraphSample(comp_nodes, trip[sel], {"iteration": len(comps)}, wts[sel]))
        dens.append(density)
        active &= ~take
    return Decomposition(comps, dens)
