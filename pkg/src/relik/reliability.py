"""The ReliK measure: exact ranks, subgraph aggregation and sampled estimators.

A triple's head-rank is one plus the number of negatives sharing its head
whose score is strictly greater than the triple's own score; the tail-rank
is defined the same way over negatives sharing its tail.  ReliK is the mean
of the two reciprocal ranks.

The sampled estimators draw ``k`` negatives per side without replacement
and compute the in-sample rank ``rank_s``.  With ``N`` the neighbourhood
size the per-side terms are

* lower bound: ``1 / (rank_s + N - k)``
* scaled:      ``1 / (rank_s * N / k)``

Sampling streams are keyed by ``(seed, triple code, side)`` where the code
is ``(h * |R| + r) * |E| + t``, so a triple's estimate does not depend on
which batch or thread computed it.
"""

from __future__ import annotations

import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import rng as _rng
from .embed import Scorer
from .errors import ConfigurationError, DomainError
from .kg import KnowledgeGraph, Side, check_side, clamp_sample_size, sample_negative_candidates

DEFAULT_FRACTION = 0.10
DEFAULT_SEED = 20240513
# Upper bound on float64 cells materialised per one-vs-all chunk.
CHUNK_CELLS = 4_000_000


class Estimator(str, enum.Enum):
    EXACT = "exact"
    LOWER_BOUND = "lower_bound"
    SCALED = "scaled"

    @classmethod
    def parse(cls, name) -> "Estimator":
        aliases = {"lb": cls.LOWER_BOUND, "apx": cls.SCALED, "approx": cls.SCALED}
        if isinstance(name, cls):
            return name
        key = str(name).lower()
        if key in aliases:
            return aliases[key]
        try:
            return cls(key)
        except ValueError:
            raise ConfigurationError(f"unknown estimator {name!r}") from None


@dataclass(frozen=True)
class ReliKResult:
    value: float
    head_rank: int
    tail_rank: int
    head_neg_size: int
    tail_neg_size: int
    estimator: Estimator = Estimator.EXACT
    head_sample_size: int = 0
    tail_sample_size: int = 0
    clamped: bool = False

    @property
    def sample_size(self) -> int:
        return max(self.head_sample_size, self.tail_sample_size)

    def as_dict(self) -> dict:
        return {
            "value": self.value,
            "head_rank": self.head_rank,
            "tail_rank": self.tail_rank,
            "head_neg_size": self.head_neg_size,
            "tail_neg_size": self.tail_neg_size,
            "estimator": self.estimator.value,
            "head_sample_size": self.head_sample_size,
            "tail_sample_size": self.tail_sample_size,
            "clamped": self.clamped,
        }


@dataclass(frozen=True)
class SampleConfig:
    """Per-side sample size as a fraction of |N-| or an absolute ``k``."""

    fraction: float | None = DEFAULT_FRACTION
    k: int | None = None
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        if self.k is None:
            if self.fraction is None or not 0.0 < self.fraction <= 1.0:
                raise ConfigurationError(f"fraction must lie in (0, 1], got {self.fraction}")
        elif self.k < 1:
            raise ConfigurationError(f"k must be at least 1, got {self.k}")

    def sizes(self, neg_sizes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        out = [clamp_sample_size(self.fraction, self.k, int(n)) for n in np.asarray(neg_sizes).ravel()]
        ks = np.array([k for k, _ in out], dtype=np.int64)
        clamped = np.array([c for _, c in out], dtype=bool)
        return ks, clamped


def _as_triples(triples) -> np.ndarray:
    return np.asarray(triples, dtype=np.int64).reshape(-1, 3)


def _require_positive(kg: KnowledgeGraph, triples: np.ndarray) -> None:
    for row in triples:
        if not kg.contains(row):
            raise DomainError(f"triple {tuple(int(v) for v in row)} is not a fact of the graph")


def _positive_mask_indices(kg: KnowledgeGraph, anchors: np.ndarray, side: Side):
    """(row, candidate) pairs of facts incident to each anchor."""
    ptr, cand = kg._by_side[side]
    starts, ends = ptr[anchors], ptr[anchors + 1]
    lengths = ends - starts
    rows = np.repeat(np.arange(len(anchors)), lengths)
    offsets = np.arange(lengths.sum()) - np.repeat(np.cumsum(lengths) - lengths, lengths)
    return rows, cand[np.repeat(starts, lengths) + offsets]


def _chunks(n: int, size: int) -> list[slice]:
    return [slice(i, min(i + size, n)) for i in range(0, n, max(size, 1))]


def _map_chunks(fn, n: int, size: int, threads: int):
    parts = _chunks(n, size)
    if threads > 1 and len(parts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, parts))
    return [fn(p) for p in parts]


def exact_ranks(kg: KnowledgeGraph, scorer: Scorer, triples, side: Side, threads: int = 1) -> np.ndarray:
    """Exact ranks of ``triples`` against their full negative neighbourhood on ``side``.

    Queries need not be facts; a non-fact query sits in its own
    neighbourhood but never outranks itself.
    """
    side = check_side(side)
    triples = _as_triples(triples)
    col = 0 if side == "head" else 2
    chunk = max(1, CHUNK_CELLS // max(1, kg.space * scorer.store.width))

    def run(sl):
        part = triples[sl]
        anchors = part[:, col]
        query = scorer.score_batch(part)
        greater = scorer.one_vs_all(anchors, side) > query[:, None]
        rows, cols = _positive_mask_indices(kg, anchors, side)
        greater[rows, cols] = False
        return greater.sum(axis=1) + 1

    parts = _map_chunks(run, len(triples), chunk, threads)
    return np.concatenate(parts).astype(np.int64) if parts else np.zeros(0, dtype=np.int64)


def rank_against_negatives(kg: KnowledgeGraph, scorer: Scorer, x, side: Side) -> int:
    """Exact head- or tail-rank of the fact ``x``."""
    x = _as_triples(x)
    _require_positive(kg, x)
    return int(exact_ranks(kg, scorer, x, side)[0])


def _exact_value(rh, rt):
    return 0.5 * (1.0 / rh + 1.0 / rt)


def relik_exact_many(kg: KnowledgeGraph, scorer: Scorer, triples, require_positive: bool = True,
                     threads: int = 1) -> list[ReliKResult]:
    triples = _as_triples(triples)
    if require_positive:
        _require_positive(kg, triples)
    rh = exact_ranks(kg, scorer, triples, "head", threads)
    rt = exact_ranks(kg, scorer, triples, "tail", threads)
    nh = kg.negative_sizes(triples[:, 0], "head")
    nt = kg.negative_sizes(triples[:, 2], "tail")
    return [
        ReliKResult(float(_exact_value(float(a), float(b))), int(a), int(b), int(c), int(d))
        for a, b, c, d in zip(rh, rt, nh, nt)
    ]


def relik_exact(kg: KnowledgeGraph, scorer: Scorer, x) -> ReliKResult:
    """Exact ReliK of a fact; costs |N-(h)| + |N-(t)| score evaluations."""
    return relik_exact_many(kg, scorer, [tuple(x)])[0]


@dataclass(frozen=True)
class SampledRanks:
    """In-sample ranks and sizes for a batch, before choosing an estimator."""

    head_rank: np.ndarray
    tail_rank: np.ndarray
    head_size: np.ndarray
    tail_size: np.ndarray
    head_k: np.ndarray
    tail_k: np.ndarray
    clamped: np.ndarray

    def values(self, estimator) -> np.ndarray:
        est = Estimator.parse(estimator)
        rh, rt = self.head_rank.astype(np.float64), self.tail_rank.astype(np.float64)
        nh, nt = self.head_size.astype(np.float64), self.tail_size.astype(np.float64)
        kh, kt = self.head_k.astype(np.float64), self.tail_k.astype(np.float64)
        if est is Estimator.LOWER_BOUND:
            return 0.5 * (1.0 / (rh + nh - kh) + 1.0 / (rt + nt - kt))
        if est is Estimator.SCALED:
            return 0.5 * (1.0 / (rh * nh / kh) + 1.0 / (rt * nt / kt))
        raise ConfigurationError("exact values are not derived from samples")

    def results(self, estimator) -> list[ReliKResult]:
        est = Estimator.parse(estimator)
        vals = self.values(est)
        return [
            ReliKResult(float(v), int(a), int(b), int(c), int(d), est, int(e), int(f), bool(g))
            for v, a, b, c, d, e, f, g in zip(vals, self.head_rank, self.tail_rank, self.head_size,
                                              self.tail_size, self.head_k, self.tail_k, self.clamped)
        ]


def triple_keys(kg: KnowledgeGraph, triples: np.ndarray, seed: int, side: Side) -> np.ndarray:
    tag = _rng.HEAD_TAG if side == "head" else _rng.TAIL_TAG
    return _rng.derive_keys(seed, kg.encode(triples), tag)


def sampled_ranks(kg: KnowledgeGraph, scorer: Scorer, triples, cfg: SampleConfig,
                  require_positive: bool = True, threads: int = 1,
                  samples: dict | None = None) -> SampledRanks:
    """Draw S_H and S_T for every triple and count in-sample outrankers.

    ``samples`` optionally fixes the draws: ``{"head": cand, "tail": cand}``
    with candidate-index arrays of shape (B, k) (used for hand-checked cases).
    """
    triples = _as_triples(triples)
    if require_positive:
        _require_positive(kg, triples)
    out = {}
    clamped_any = np.zeros(len(triples), dtype=bool)
    for side, col in (("head", 0), ("tail", 2)):
        anchors = triples[:, col]
        sizes = kg.negative_sizes(anchors, side)
        if samples is not None:
            cand = np.asarray(samples[side], dtype=np.int64).reshape(len(triples), -1)
            ks = (cand >= 0).sum(axis=1)
            clamped = np.zeros(len(triples), dtype=bool)
        else:
            if np.any(sizes == 0):
                bad = triples[int(np.flatnonzero(sizes == 0)[0])]
                raise ConfigurationError(
                    f"sample size is 0 for triple {tuple(int(v) for v in bad)}: empty {side} neighbourhood")
            ks, clamped = cfg.sizes(sizes)
            cand = None
        clamped_any |= clamped
        keys = triple_keys(kg, triples, cfg.seed, side)
        per_row = max(1, int(ks.max()) if len(ks) else 1) * scorer.store.width
        chunk = max(1, CHUNK_CELLS // per_row)

        def run(sl, side=side, anchors=anchors, ks=ks, keys=keys, cand=cand):
            c = cand[sl] if cand is not None else sample_negative_candidates(kg, anchors[sl], side, ks[sl], keys[sl])
            valid = c >= 0
            s = scorer.score_candidates(anchors[sl], side, np.where(valid, c, 0))
            q = scorer.score_batch(triples[sl])
            return ((s > q[:, None]) & valid).sum(axis=1) + 1

        parts = _map_chunks(run, len(triples), chunk, threads)
        ranks = np.concatenate(parts).astype(np.int64) if parts else np.zeros(0, dtype=np.int64)
        out[side] = (ranks, sizes, ks)
    return SampledRanks(out["head"][0], out["tail"][0], out["head"][1], out["tail"][1],
                        out["head"][2], out["tail"][2], clamped_any)


def relik_sampled_many(kg: KnowledgeGraph, scorer: Scorer, triples, cfg: SampleConfig | None = None,
                       estimator="scaled", require_positive: bool = True, threads: int = 1) -> list[ReliKResult]:
    cfg = cfg or SampleConfig()
    return sampled_ranks(kg, scorer, triples, cfg, require_positive, threads).results(estimator)


def relik_sampled(kg: KnowledgeGraph, scorer: Scorer, x, cfg: SampleConfig | None = None,
                  estimator="scaled") -> ReliKResult:
    """Lower-bound or scaled ReliK estimate of a fact from one sample per side."""
    return relik_sampled_many(kg, scorer, [tuple(x)], cfg, estimator)[0]


def relik_values(kg: KnowledgeGraph, scorer: Scorer, triples, estimator="scaled",
                 cfg: SampleConfig | None = None, require_positive: bool = True, threads: int = 1) -> np.ndarray:
    """ReliK values for many triples as a float array."""
    est = Estimator.parse(estimator)
    triples = _as_triples(triples)
    if est is Estimator.EXACT:
        res = relik_exact_many(kg, scorer, triples, require_positive, threads)
        return np.array([r.value for r in res], dtype=np.float64)
    return sampled_ranks(kg, scorer, triples, cfg or SampleConfig(), require_positive, threads).values(est)


def relik_set(results: Iterable[ReliKResult | float]) -> float:
    """Mean ReliK over a set of triples, summed in input order."""
    total = 0.0
    n = 0
    for r in results:
        total += r.value if isinstance(r, ReliKResult) else float(r)
        n += 1
    if n == 0:
        raise DomainError("ReliK of an empty set is undefined")
    return total / n
