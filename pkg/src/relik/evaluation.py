"""Downstream metrics and experiment harnesses.

Covers filtered MRR for tail and relation prediction, threshold triple
classification, the estimator accuracy/time study, the subgraph
correlation study and positive-vs-negative margin reports.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import rng as _rng
from .embed import Scorer
from .errors import DomainError
from .graphops import WeightedTriple, rwr_subgraph
from .kg import KnowledgeGraph, corrupt_triples
from .reliability import (
    DEFAULT_SEED,
    Estimator,
    SampleConfig,
    relik_exact_many,
    relik_set,
    relik_values,
    sampled_ranks,
)
from .stats import DegenerateInputError, pearson

log = logging.getLogger(__name__)

# Stream tags for per-item generators.
WALK_TAG = 11
CLASSIFY_TAG = 12
REP_TAG = 13

EXACT_COST_WARNING = 50_000_000


@dataclass
class EvalReport:
    """Rows of named metrics plus the configuration that produced them.

    ``columns`` fixes the CSV layout; rows may carry extra keys that only
    appear in JSON.
    """

    kind: str
    config: dict = field(default_factory=dict)
    columns: list[str] = field(default_factory=list)
    rows: list[dict] = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def column(self, name: str) -> list:
        return [row.get(name) for row in self.rows]

    def as_dict(self) -> dict:
        return {"kind": self.kind, "config": self.config, "columns": self.columns,
                "rows": self.rows, "summary": self.summary}


def _as_triples(triples) -> np.ndarray:
    return np.asarray(triples, dtype=np.int64).reshape(-1, 3)


# -- ranking metrics -----------------------------------------------------------

def reciprocal_ranks(kg: KnowledgeGraph, scorer: Scorer, triples, target: str,
                     filter_kg: KnowledgeGraph | None = None) -> np.ndarray:
    """Filtered reciprocal rank of the true tail or relation of each triple.

    Competing candidates that form a fact of ``filter_kg`` (default ``kg``)
    are skipped; the rank counts only strictly higher-scoring candidates.
    """
    triples = _as_triples(triples)
    filt = filter_kg if filter_kg is not None else kg
    n_e, n_r = kg.n_entities, kg.n_relations
    if len(triples) == 0:
        return np.zeros(0)
    heads = triples[:, 0]
    if target == "tail":
        # candidates (h, r, t') for all t'
        cand = triples[:, 1:2] * n_e + np.arange(n_e)[None, :]
        is_true = np.arange(n_e)[None, :] == triples[:, 2:3]
    elif target == "relation":
        # candidates (h, r', t) for all r'
        cand = np.arange(n_r)[None, :] * n_e + triples[:, 2:3]
        is_true = np.arange(n_r)[None, :] == triples[:, 1:2]
    else:
        raise DomainError(f"target must be 'tail' or 'relation', got {target!r}")
    scores = scorer.score_candidates(heads, "head", cand)
    query = scorer.score_batch(triples)
    known = filt.is_positive_candidate(heads[:, None], "head", cand) & ~is_true
    rank = ((scores > query[:, None]) & ~known).sum(axis=1) + 1
    return 1.0 / rank


def mrr(kg: KnowledgeGraph, scorer: Scorer, eval_triples, target: str = "tail",
        filter_kg: KnowledgeGraph | None = None) -> float:
    """Filtered mean reciprocal rank for tail or relation prediction."""
    rr = reciprocal_ranks(kg, scorer, eval_triples, target, filter_kg)
    if rr.size == 0:
        raise DomainError("MRR of an empty evaluation set")
    return float(sum(rr.tolist()) / rr.size)


# -- triple classification -----------------------------------------------------

def best_threshold_accuracy(pos_scores, neg_scores) -> tuple[float, float]:
    """Best accuracy of ``score > threshold`` over all score midpoints.

    Returns ``(accuracy, threshold)``; the extremes ``-inf`` and ``+inf`` are
    included as candidates.
    """
    pos = np.asarray(pos_scores, dtype=np.float64)
    neg = np.asarray(neg_scores, dtype=np.float64)
    n = pos.size + neg.size
    if n == 0:
        raise DomainError("no labelled scores")
    scores = np.concatenate([pos, neg])
    labels = np.concatenate([np.ones(pos.size, bool), np.zeros(neg.size, bool)])
    order = np.argsort(scores, kind="stable")
    s, y = scores[order], labels[order]
    # Cut after index i: everything at or below s[i] is predicted negative.
    neg_below = np.cumsum(~y)
    pos_below = np.cumsum(y)
    distinct = np.flatnonzero(s[1:] > s[:-1])
    correct = [pos.size]  # threshold -inf: all predicted positive
    thresholds = [-math.inf]
    for i in distinct:
        correct.append(int(neg_below[i]) + pos.size - int(pos_below[i]))
        thresholds.append(0.5 * (s[i] + s[i + 1]))
    correct.append(neg.size)
    thresholds.append(math.inf)
    best = int(np.argmax(correct))
    return correct[best] / n, thresholds[best]


def classification_accuracy(kg: KnowledgeGraph, scorer: Scorer, eval_triples,
                            rng: np.random.Generator, holdout=None) -> float:
    """Accuracy of a single score threshold on positives plus one corrupted negative each.

    The threshold is the best one on the evaluation set itself unless
    ``holdout`` facts are given, in which case it is fitted on those (and
    their corruptions) and only applied to the evaluation set.
    """
    pos = _as_triples(eval_triples)
    if len(pos) == 0:
        raise DomainError("classification over an empty evaluation set")
    neg = corrupt_triples(kg, pos, rng)
    ps, ns = scorer.score_batch(pos), scorer.score_batch(neg)
    if holdout is None:
        acc, _ = best_threshold_accuracy(ps, ns)
        return acc
    hpos = _as_triples(holdout)
    if len(hpos) == 0:
        raise DomainError("empty held-out set")
    hneg = corrupt_triples(kg, hpos, rng)
    _, thr = best_threshold_accuracy(scorer.score_batch(hpos), scorer.score_batch(hneg))
    return (int((ps > thr).sum()) + int((ns <= thr).sum())) / (len(ps) + len(ns))


# -- estimator study -----------------------------------------------------------

def approximation_study(kg: KnowledgeGraph, scorer: Scorer, triples, fractions: Sequence[float],
                        repetitions: int = 3, seed: int = DEFAULT_SEED, timing: bool = True,
                        threads: int = 1) -> EvalReport:
    """Time and squared error of both sampled estimators against exact ReliK.

    For each fraction, every triple is estimated once per repetition, with
    repetition ``i`` using the derived seed ``derive_key(seed, REP_TAG, i)``.
    ``seconds`` is the mean wall-clock of one sampled pass over all triples.
    """
    triples = _as_triples(triples)
    cost = kg.space * len(triples) * 2
    if cost > EXACT_COST_WARNING:
        log.warning("exact ReliK needs about %d score evaluations", cost)
    t0 = time.perf_counter()
    exact = relik_values(kg, scorer, triples, "exact", threads=threads)
    exact_seconds = time.perf_counter() - t0

    rows = []
    for frac in fractions:
        sq = {"apx": [], "lb": []}
        elapsed = 0.0
        for rep in range(repetitions):
            cfg = SampleConfig(fraction=float(frac), seed=_rng.derive_key(seed, REP_TAG, rep))
            t0 = time.perf_counter()
            ranks = sampled_ranks(kg, scorer, triples, cfg, threads=threads)
            apx = ranks.values("scaled")
            elapsed += time.perf_counter() - t0
            lb = ranks.values("lower_bound")
            sq["apx"].append((apx - exact) ** 2)
            sq["lb"].append((lb - exact) ** 2)
        row = {"fraction": float(frac), "seconds": elapsed / repetitions if timing else None}
        for name in ("apx", "lb"):
            err = np.concatenate(sq[name])
            row[f"mse_{name}"] = float(err.mean())
            row[f"mse_{name}_stderr"] = float(err.std(ddof=1) / math.sqrt(err.size)) if err.size > 1 else 0.0
        rows.append(row)
    return EvalReport(
        kind="approximation_study",
        config={"scorer": scorer.kind.value, "fractions": [float(f) for f in fractions],
                "repetitions": repetitions, "seed": seed, "n_triples": int(len(triples))},
        columns=["fraction", "seconds", "mse_apx", "mse_lb"],
        rows=rows,
        summary={"exact_seconds": exact_seconds if timing else None,
                 "mean_exact_relik": float(exact.mean()) if exact.size else None},
    )


# -- subgraph correlation ------------------------------------------------------

TASKS = ("tail_mrr", "relation_mrr", "classification", "relik")


def task_metric(kg: KnowledgeGraph, scorer: Scorer, triples, task: str, rng: np.random.Generator,
                filter_kg: KnowledgeGraph | None = None, relik_value: float | None = None,
                holdout=None) -> float:
    if task == "tail_mrr":
        return mrr(kg, scorer, triples, "tail", filter_kg)
    if task == "relation_mrr":
        return mrr(kg, scorer, triples, "relation", filter_kg)
    if task == "classification":
        return classification_accuracy(kg, scorer, triples, rng, holdout)
    if task == "relik":
        return float(relik_value)
    raise DomainError(f"unknown task {task!r}; choose from {TASKS}")


def subgraph_correlation(kg: KnowledgeGraph, scorer: Scorer, n_subgraphs: int, subgraph_nodes: int,
                         task: str, seed: int = DEFAULT_SEED, restart_prob: float = 0.2,
                         cfg: SampleConfig | None = None, estimator="scaled",
                         filter_kg: KnowledgeGraph | None = None, threads: int = 1,
                         holdout=None) -> EvalReport:
    """Correlate subgraph ReliK with a task metric over random-walk subgraphs.

    Subgraph ``i`` is walked with ``numpy_generator(seed, i, WALK_TAG)``; its
    ReliK is the mean estimate over its induced facts and the task metric is
    computed on the same facts.  The ``relik`` task uses ReliK itself as the
    metric and exists as a self-check.
    """
    if n_subgraphs < 3:
        raise DomainError("need at least 3 subgraphs for a correlation")
    if task not in TASKS:
        raise DomainError(f"unknown task {task!r}; choose from {TASKS}")
    cfg = cfg or SampleConfig(seed=seed)
    est = Estimator.parse(estimator)

    def item(i):
        sub = rwr_subgraph(kg, subgraph_nodes, restart_prob, _rng.numpy_generator(seed, i, WALK_TAG))
        if len(sub.triples) == 0:
            return {"index": i, "start": sub.origin["start"], "n_nodes": sub.size, "n_triples": 0,
                    "relik": None, "metric": None}
        x = relik_set(relik_values(kg, scorer, sub.triples, est, cfg).tolist())
        y = task_metric(kg, scorer, sub.triples, task, _rng.numpy_generator(seed, i, CLASSIFY_TAG),
                        filter_kg, x, holdout)
        return {"index": i, "start": sub.origin["start"], "n_nodes": sub.size,
                "n_triples": int(len(sub.triples)), "relik": x, "metric": y}

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(item, range(n_subgraphs)))
    else:
        rows = [item(i) for i in range(n_subgraphs)]
    points = [(r["relik"], r["metric"]) for r in rows if r["relik"] is not None]
    skipped = sum(r["relik"] is None for r in rows)
    try:
        r, p = pearson(points)
    except DegenerateInputError as exc:
        log.warning("correlation undefined: %s", exc)
        r, p = None, None
    return EvalReport(
        kind="subgraph_correlation",
        config={"scorer": scorer.kind.value, "task": task, "n_subgraphs": n_subgraphs,
                "subgraph_nodes": subgraph_nodes, "restart_prob": restart_prob, "seed": seed,
                "estimator": est.value, "fraction": cfg.fraction, "k": cfg.k},
        columns=["index", "start", "n_nodes", "n_triples", "relik", "metric"],
        rows=rows,
        summary={"pearson_r": r, "p_value": p, "n_points": len(points), "skipped": skipped},
    )


# -- margin report ---------------------------------------------------------------

def rr_baseline(kg: KnowledgeGraph, scorer: Scorer, triples, filter_kg: KnowledgeGraph | None = None) -> np.ndarray:
    """Mean of the filtered tail and relation reciprocal ranks, per triple."""
    tail = reciprocal_ranks(kg, scorer, triples, "tail", filter_kg)
    rel = reciprocal_ranks(kg, scorer, triples, "relation", filter_kg)
    return 0.5 * (tail + rel)


def margin_report(kg: KnowledgeGraph, scorer: Scorer, positives, negatives,
                  cfg: SampleConfig | None = None, estimator="scaled") -> EvalReport:
    """Mean ReliK (and reciprocal-rank baseline) of positive vs negative triples.

    Negatives are scored with the same rank formulas, using the candidate
    itself as the query.
    """
    pos, neg = _as_triples(positives), _as_triples(negatives)
    if len(pos) == 0 or len(neg) == 0:
        raise DomainError("margin report needs positives and negatives")
    overlap = set(kg.encode(pos).tolist()) & set(kg.encode(neg).tolist())
    if overlap:
        raise DomainError(f"{len(overlap)} triples appear as both positive and negative")
    if not kg.has_codes(kg.encode(pos)).all():
        raise DomainError("every positive must be a fact of the graph")
    if kg.has_codes(kg.encode(neg)).any():
        raise DomainError("negatives must not be facts of the graph")
    cfg = cfg or SampleConfig()
    est = Estimator.parse(estimator)
    pos_v = relik_values(kg, scorer, pos, est, cfg)
    neg_v = relik_values(kg, scorer, neg, est, cfg, require_positive=False)
    pos_rr = rr_baseline(kg, scorer, pos)
    neg_rr = rr_baseline(kg, scorer, neg)
    rows = [
        {"label": "positive", "n": int(len(pos)), "mean_relik": relik_set(pos_v.tolist()),
         "mean_rr": float(pos_rr.mean())},
        {"label": "negative", "n": int(len(neg)), "mean_relik": relik_set(neg_v.tolist()),
         "mean_rr": float(neg_rr.mean())},
    ]
    return EvalReport(
        kind="margin",
        config={"scorer": scorer.kind.value, "estimator": est.value, "fraction": cfg.fraction,
                "k": cfg.k, "seed": cfg.seed, "rr_baseline": "mean of filtered tail and relation reciprocal ranks"},
        columns=["label", "n", "mean_relik", "mean_rr"],
        rows=rows,
        summary={"mean_relik_pos": rows[0]["mean_relik"], "mean_relik_neg": rows[1]["mean_relik"],
                 "mean_rr_pos": rows[0]["mean_rr"], "mean_rr_neg": rows[1]["mean_rr"]},
    )


# -- weights and histograms --------------------------------------------------------

def edge_weights(kg: KnowledgeGraph, scorer: Scorer, mode: str = "relik", estimator="scaled",
                 cfg: SampleConfig | None = None, threads: int = 1) -> list[WeightedTriple]:
    """Weight every fact by its ReliK or by the reciprocal-rank baseline."""
    if mode == "relik":
        w = relik_values(kg, scorer, kg.triples, estimator, cfg, threads=threads)
    elif mode == "rr":
        w = rr_baseline(kg, scorer, kg.triples)
    else:
        raise DomainError(f"weight mode must be 'relik' or 'rr', got {mode!r}")
    return [WeightedTriple(tuple(int(v) for v in t), float(x)) for t, x in zip(kg.triples, w)]


def score_histogram(kg: KnowledgeGraph, scorer: Scorer, positives, negatives, bins: int = 50) -> EvalReport:
    """Shared-bin histograms of positive and negative triple scores."""
    ps = scorer.score_batch(positives)
    ns = scorer.score_batch(negatives)
    both = np.concatenate([ps, ns])
    if both.size == 0:
        raise DomainError("no scores to histogram")
    edges = np.histogram_bin_edges(both, bins=bins)
    cp, _ = np.histogram(ps, bins=edges)
    cn, _ = np.histogram(ns, bins=edges)
    rows = [{"bin_lo": float(edges[i]), "bin_hi": float(edges[i + 1]),
             "count_pos": int(cp[i]), "count_neg": int(cn[i])} for i in range(len(cp))]
    return EvalReport(kind="histogram", config={"scorer": scorer.kind.value, "bins": bins},
                      columns=["bin_lo", "bin_hi", "count_pos", "count_neg"], rows=rows,
                      summary={"n_pos": int(ps.size), "n_neg": int(ns.size)})
