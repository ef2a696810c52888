"""Brute-force reference implementations used as test oracles.

Everything here is written with plain Python loops over labels and tuples
and shares no code with the package beyond reading vectors out of a store.
"""

from __future__ import annotations

import itertools
import math


def _vec(store, table, i):
    row = [float(v) for v in getattr(store, table)[i]]
    if store.field == "complex":
        d = store.dim
        return [complex(row[j], row[d + j]) for j in range(d)]
    return row


def naive_score(store, kind, h, r, t):
    """Score of (h, r, t) straight from the textbook formulas."""
    kind = getattr(kind, "value", kind)
    eh, er, et = _vec(store, "entity_vecs", h), _vec(store, "relation_vecs", r), _vec(store, "entity_vecs", t)
    if kind == "TransE_L1":
        s = -sum(abs(a + b - c) for a, b, c in zip(eh, er, et))
    elif kind == "TransE_L2":
        s = -math.sqrt(sum((a + b - c) ** 2 for a, b, c in zip(eh, er, et)))
    elif kind == "DistMult":
        s = sum(a * b * c for a, b, c in zip(eh, er, et))
    elif kind == "PairRE":
        ert = _vec(store, "relation_tail_vecs", r)
        s = -math.sqrt(sum((a * b - c * e) ** 2 for a, b, c, e in zip(eh, er, et, ert)))
    elif kind == "RotatE":
        s = -math.sqrt(sum(abs(a * b - c) ** 2 for a, b, c in zip(eh, er, et)))
    elif kind == "ComplEx":
        s = sum(b * a * c.conjugate() for a, b, c in zip(eh, er, et)).real
    else:
        raise ValueError(kind)
    return s * store.orientation


def fact_set(kg):
    return {tuple(int(v) for v in row) for row in kg.triples}


def enumerate_neighbourhood(kg, anchor, side):
    """Negatives around ``anchor`` in relation-major, then entity order."""
    facts = fact_set(kg)
    out = []
    for r in range(kg.n_relations):
        for e in range(kg.n_entities):
            trip = (anchor, r, e) if side == "head" else (e, r, anchor)
            if trip not in facts:
                out.append(trip)
    return out


def brute_ranks(kg, store, kind, x, score=naive_score):
    h, r, t = x
    q = score(store, kind, h, r, t)
    rh = 1 + sum(score(store, kind, *y) > q for y in enumerate_neighbourhood(kg, h, "head"))
    rt = 1 + sum(score(store, kind, *y) > q for y in enumerate_neighbourhood(kg, t, "tail"))
    return rh, rt


def brute_relik(kg, store, kind, x):
    rh, rt = brute_ranks(kg, store, kind, x)
    return 0.5 * (1.0 / rh + 1.0 / rt), rh, rt


def brute_estimates(kg, store, kind, x, sample_h, sample_t):
    """(lower bound, scaled) from explicit per-side negative samples."""
    h, r, t = x
    q = naive_score(store, kind, h, r, t)
    nh = len(enumerate_neighbourhood(kg, h, "head"))
    nt = len(enumerate_neighbourhood(kg, t, "tail"))
    sh = 1 + sum(naive_score(store, kind, *y) > q for y in sample_h)
    st = 1 + sum(naive_score(store, kind, *y) > q for y in sample_t)
    kh, kt = len(sample_h), len(sample_t)
    lb = 0.5 * (1.0 / (sh + nh - kh) + 1.0 / (st + nt - kt))
    apx = 0.5 * (1.0 / (sh * nh / kh) + 1.0 / (st * nt / kt))
    return lb, apx


def brute_filtered_rr(kg, store, kind, x, target, filt=None):
    facts = fact_set(filt if filt is not None else kg)
    h, r, t = x
    q = naive_score(store, kind, h, r, t)
    if target == "tail":
        cands = [(h, r, e) for e in range(kg.n_entities) if e != t]
    else:
        cands = [(h, rr, t) for rr in range(kg.n_relations) if rr != r]
    rank = 1 + sum(1 for c in cands if c not in facts and naive_score(store, kind, *c) > q)
    return 1.0 / rank


def brute_threshold_accuracy(pos, neg):
    """Best accuracy of 'score > thr' over every possible split of the data."""
    values = sorted(set(pos) | set(neg))
    candidates = [-math.inf] + values  # predicting positive iff score > thr
    n = len(pos) + len(neg)
    best = 0.0
    for thr in candidates:
        correct = sum(p > thr for p in pos) + sum(v <= thr for v in neg)
        best = max(best, correct / n)
    return best


def brute_densest(edges):
    """Exact densest subset over all non-empty node subsets.

    ``edges`` is a list of (u, v, w); self-loops count when their node is in
    the subset.
    """
    nodes = sorted({u for u, _, _ in edges} | {v for _, v, _ in edges})
    best, best_set = -1.0, None
    for size in range(1, len(nodes) + 1):
        for subset in itertools.combinations(nodes, size):
            s = set(subset)
            w = sum(wt for u, v, wt in edges if u in s and v in s)
            if w / size > best + 1e-15:
                best, best_set = w / size, s
    return best, best_set


def plain_pearson(xs, ys):
    n = len(xs)
    mx, my = sum(xs) / n, sum(ys) / n
    sxy = sum((a - mx) * (b - my) for a, b in zip(xs, ys))
    sxx = sum((a - mx) ** 2 for a in xs)
    syy = sum((b - my) ** 2 for b in ys)
    return sxy / math.sqrt(sxx * syy)
