"""In-memory knowledge graph with negative-neighbourhood arithmetic.

Entities and relations are interned to dense integer ids in first-occurrence
order.  A candidate triple around an anchor entity is addressed by a single
integer ``c`` in ``[0, |R|*|E|)`` with ``relation = c // |E|`` and
``other_entity = c % |E|``; for the head side the candidate is
``(anchor, relation, other_entity)`` and for the tail side it is
``(other_entity, relation, anchor)``.  Enumeration order is therefore
relation-major, then entity.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Iterable, Iterator, Literal, NamedTuple, Sequence

import numpy as np

from . import rng as _rng
from .errors import DomainError, ParseError, SamplingError

Side = Literal["head", "tail"]
SIDES: tuple[Side, Side] = ("head", "tail")


class Triple(NamedTuple):
    head: int
    relation: int
    tail: int


def check_side(side: str) -> Side:
    if side not in SIDES:
        raise DomainError(f"side must be 'head' or 'tail', got {side!r}")
    return side  # type: ignore[return-value]


class KnowledgeGraph:
    """Immutable fact set over interned entity and relation vocabularies.

    Parameters
    ----------
    entities, relations:
        Labels; position is the id.
    triples:
        Integer array of shape (m, 3).  Duplicates are collapsed, first
        occurrence wins.
    """

    def __init__(
        self,
        entities: Sequence[str],
        relations: Sequence[str],
        triples: np.ndarray | Sequence[Sequence[int]],
    ):
        self.entities: tuple[str, ...] = tuple(entities)
        self.relations: tuple[str, ...] = tuple(relations)
        self.entity_index = {label: i for i, label in enumerate(self.entities)}
        self.relation_index = {label: i for i, label in enumerate(self.relations)}
        if len(self.entity_index) != len(self.entities):
            raise DomainError("duplicate entity label")
        if len(self.relation_index) != len(self.relations):
            raise DomainError("duplicate relation label")

        arr = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
        n_e, n_r = len(self.entities), len(self.relations)
        if arr.size:
            if (arr[:, [0, 2]].min() < 0 or arr[:, [0, 2]].max() >= n_e
                    or arr[:, 1].min() < 0 or arr[:, 1].max() >= n_r):
                raise DomainError("triple id out of range")
        codes = self._encode(arr[:, 0], arr[:, 1], arr[:, 2])
        _, first = np.unique(codes, return_index=True)
        keep = np.sort(first)
        self.triples = arr[keep].copy()
        self.triples.setflags(write=False)

        self.codes = np.sort(codes[keep])
        self.codes.setflags(write=False)
        self._code_set = frozenset(self.codes.tolist())

        self.head_counts = np.bincount(self.triples[:, 0], minlength=n_e).astype(np.int64)
        self.tail_counts = np.bincount(self.triples[:, 2], minlength=n_e).astype(np.int64)
        # CSR layouts: facts grouped by head and by tail, as candidate indices.
        self._by_side = {}
        for side, anchor_col, other_col in (("head", 0, 2), ("tail", 2, 0)):
            order = np.argsort(self.triples[:, anchor_col], kind="stable")
            grouped = self.triples[order]
            ptr = np.zeros(n_e + 1, dtype=np.int64)
            np.cumsum(np.bincount(grouped[:, anchor_col], minlength=n_e), out=ptr[1:])
            cand = grouped[:, 1] * n_e + grouped[:, other_col]
            self._by_side[side] = (ptr, cand)

    # -- construction -----------------------------------------------------

    @classmethod
    def from_labeled(cls, facts: Iterable[tuple[str, str, str]]) -> "KnowledgeGraph":
        entities: dict[str, int] = {}
        relations: dict[str, int] = {}
        rows = []
        for h, r, t in facts:
            hi = entities.setdefault(h, len(entities))
            ri = relations.setdefault(r, len(relations))
            ti = entities.setdefault(t, len(entities))
            rows.append((hi, ri, ti))
        return cls(list(entities), list(relations), np.array(rows, dtype=np.int64).reshape(-1, 3))

    def restrict(self, triples: np.ndarray) -> "KnowledgeGraph":
        """A graph over the same vocabularies holding only ``triples``."""
        return KnowledgeGraph(self.entities, self.relations, triples)

    # -- sizes ------------------------------------------------------------

    @property
    def n_entities(self) -> int:
        return len(self.entities)

    @property
    def n_relations(self) -> int:
        return len(self.relations)

    @property
    def n_facts(self) -> int:
        return len(self.triples)

    @property
    def space(self) -> int:
        """Number of candidate triples around one anchor, |R|*|E|."""
        return self.n_relations * self.n_entities

    def __len__(self) -> int:
        return self.n_facts

    def __repr__(self) -> str:
        return f"KnowledgeGraph(|E|={self.n_entities}, |R|={self.n_relations}, |F|={self.n_facts})"

    # -- encoding ---------------------------------------------------------

    def _encode(self, h, r, t):
        n_e, n_r = len(self.entities), len(self.relations)
        h = np.asarray(h, dtype=np.int64)
        return (h * n_r + np.asarray(r, dtype=np.int64)) * n_e + np.asarray(t, dtype=np.int64)

    def encode(self, triples: np.ndarray) -> np.ndarray:
        triples = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
        return self._encode(triples[:, 0], triples[:, 1], triples[:, 2])

    def candidate_triples(self, anchors, side: Side, cand) -> np.ndarray:
        """Expand candidate indices around ``anchors`` into (..., 3) triples."""
        anchors = np.asarray(anchors, dtype=np.int64)
        cand = np.asarray(cand, dtype=np.int64)
        rel = cand // self.n_entities
        other = cand % self.n_entities
        anchor = anchors.reshape(anchors.shape + (1,) * (cand.ndim - anchors.ndim)) if anchors.ndim < cand.ndim else anchors
        if check_side(side) == "head":
            return np.stack(np.broadcast_arrays(anchor, rel, other), axis=-1)
        return np.stack(np.broadcast_arrays(other, rel, anchor), axis=-1)

    def is_positive_candidate(self, anchors, side: Side, cand) -> np.ndarray:
        """Vectorised membership test for candidate indices around anchors."""
        anchors = np.asarray(anchors, dtype=np.int64)
        cand = np.asarray(cand, dtype=np.int64)
        n_e = self.n_entities
        if side == "head":
            codes = anchors * self.space + cand
        else:
            codes = (cand % n_e) * self.space + (cand // n_e) * n_e + anchors
        return self.has_codes(codes)

    def has_codes(self, codes) -> np.ndarray:
        """Vectorised membership test for triple codes."""
        codes = np.asarray(codes, dtype=np.int64)
        if self.codes.size == 0:
            return np.zeros(codes.shape, dtype=bool)
        pos = np.minimum(np.searchsorted(self.codes, codes), self.codes.size - 1)
        return self.codes[pos] == codes

    def positive_candidates(self, anchor: int, side: Side) -> np.ndarray:
        """Candidate indices of the facts incident to ``anchor`` on ``side``."""
        ptr, cand = self._by_side[check_side(side)]
        return cand[ptr[anchor]:ptr[anchor + 1]]

    # -- queries ----------------------------------------------------------

    def _check_entity(self, e: int) -> None:
        if not 0 <= e < self.n_entities:
            raise DomainError(f"entity id {e} out of range [0, {self.n_entities})")

    def _check_triple(self, triple) -> Triple:
        h, r, t = (int(v) for v in triple)
        self._check_entity(h)
        self._check_entity(t)
        if not 0 <= r < self.n_relations:
            raise DomainError(f"relation id {r} out of range [0, {self.n_relations})")
        return Triple(h, r, t)

    def contains(self, triple) -> bool:
        h, r, t = self._check_triple(triple)
        return ((h * self.n_relations + r) * self.n_entities + t) in self._code_set

    __contains__ = contains

    def positive_count(self, anchor: int, side: Side) -> int:
        self._check_entity(anchor)
        counts = self.head_counts if check_side(side) == "head" else self.tail_counts
        return int(counts[anchor])

    def negative_neighborhood_size(self, anchor: int, side: Side) -> int:
        """|N-(anchor)| = |R|*|E| minus facts with ``anchor`` on ``side``.

        Self-referential candidates ``(anchor, r, anchor)`` are counted.
        """
        return self.space - self.positive_count(anchor, side)

    def negative_sizes(self, anchors, side: Side) -> np.ndarray:
        counts = self.head_counts if check_side(side) == "head" else self.tail_counts
        return self.space - counts[np.asarray(anchors, dtype=np.int64)]

    def negative_candidates(self, anchor: int, side: Side) -> np.ndarray:
        """Sorted candidate indices of every negative around ``anchor``."""
        self._check_entity(anchor)
        mask = np.ones(self.space, dtype=bool)
        mask[self.positive_candidates(anchor, side)] = False
        return np.flatnonzero(mask)

    def iter_negatives(self, anchor: int, side: Side) -> Iterator[Triple]:
        """Yield N-(anchor) in relation-major, then entity, order."""
        for row in self.candidate_triples(anchor, side, self.negative_candidates(anchor, side)):
            yield Triple(*(int(v) for v in row))

    def label(self, triple) -> tuple[str, str, str]:
        h, r, t = triple
        return self.entities[h], self.relations[r], self.entities[t]

    def lookup(self, h: str, r: str, t: str) -> Triple:
        try:
            return Triple(self.entity_index[h], self.relation_index[r], self.entity_index[t])
        except KeyError as exc:
            raise DomainError(f"unknown label {exc.args[0]!r}") from None

    def undirected_adjacency(self) -> tuple[np.ndarray, np.ndarray]:
        """CSR (ptr, fact index) of facts incident to each entity, ignoring direction.

        A self-loop fact appears once in its entity's list.
        """
        n_e = self.n_entities
        h, t = self.triples[:, 0], self.triples[:, 2]
        fact = np.arange(self.n_facts)
        loops = h == t
        ends = np.concatenate([h, t[~loops]])
        facts = np.concatenate([fact, fact[~loops]])
        order = np.lexsort((facts, ends))
        ptr = np.zeros(n_e + 1, dtype=np.int64)
        np.cumsum(np.bincount(ends, minlength=n_e), out=ptr[1:])
        return ptr, facts[order]


# -- parsing -------------------------------------------------------------

def _iter_rows(text: str, source: str | None):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\r")
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise ParseError(f"expected 3 tab-separated fields, got {len(fields)}", lineno, source)
        for col, f in enumerate(fields, start=1):
            if f == "":
                raise ParseError(f"empty field in column {col}", lineno, source)
        yield lineno, fields


def parse_labeled(text: str, source: str | None = None) -> list[tuple[str, str, str]]:
    return [tuple(fields) for _, fields in _iter_rows(text, source)]  # type: ignore[misc]


def parse_triples(text: str, source: str | None = None) -> KnowledgeGraph:
    """Parse a ``head<TAB>relation<TAB>tail`` document."""
    return KnowledgeGraph.from_labeled(parse_labeled(text, source))


def read_text(path: str | Path) -> str:
    data = Path(path).read_bytes()
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"not valid UTF-8 ({exc.reason} at byte {exc.start})", source=str(path)) from None


def load_triples(*paths: str | Path) -> tuple[KnowledgeGraph, list[np.ndarray]]:
    """Load one or more split files into a single graph over their union.

    Returns the union graph and, per file, the (m_i, 3) id array of that
    split's facts in file order (duplicates within a split removed).
    """
    labeled = [parse_labeled(read_text(p), str(p)) for p in paths]
    kg = KnowledgeGraph.from_labeled(f for split in labeled for f in split)
    splits = []
    for split in labeled:
        ids = np.array([kg.lookup(*f) for f in split], dtype=np.int64).reshape(-1, 3)
        _, first = np.unique(kg.encode(ids), return_index=True)
        splits.append(ids[np.sort(first)])
    return kg, splits


def format_triples(kg: KnowledgeGraph, triples=None) -> str:
    rows = kg.triples if triples is None else triples
    return "".join("\t".join(kg.label(t)) + "\n" for t in rows)


# -- negative sampling ---------------------------------------------------

def _first_distinct_valid(kg, anchors, side, ks, keys):
    """Rejection sampling: first k distinct non-positive draws per row.

    Returns (B, max k) candidate indices, padded with -1.
    """
    B = len(anchors)
    out = np.full((B, int(ks.max()) if B else 0), -1, dtype=np.int64)
    space = kg.space
    sizes = kg.negative_sizes(anchors, side)
    frac = sizes / space
    pending = np.arange(B)
    m = int(np.max(np.ceil(1.25 * ks / frac))) + 8 if B else 0
    while pending.size:
        a, k = anchors[pending], ks[pending]
        cand = _rng.uniform_below(_rng.draws(keys[pending], 0, m), space)
        bad = kg.is_positive_candidate(a[:, None], side, cand)
        order = np.argsort(cand, axis=1, kind="stable")
        srt = np.take_along_axis(cand, order, axis=1)
        dup = np.zeros_like(bad)
        np.put_along_axis(dup, order[:, 1:], srt[:, 1:] == srt[:, :-1], axis=1)
        valid = ~(bad | dup)
        cum = np.cumsum(valid, axis=1)
        done = cum[:, -1] >= k
        take = valid & (cum <= k[:, None]) & done[:, None]
        rows, cols = np.nonzero(take)
        out[pending[rows], cum[rows, cols] - 1] = cand[rows, cols]
        pending = pending[~done]
        m *= 2
    return out


def _shuffled_prefix(kg, anchor, side, k, key):
    """Enumerate N-(anchor), order by per-candidate random keys, keep k."""
    neg = kg.negative_candidates(anchor, side)
    raw = _rng.splitmix64(np.uint64(key) ^ _rng.splitmix64(neg.astype(np.uint64)))
    order = np.lexsort((neg, raw))
    return neg[order[:k]]


def sample_negative_candidates(kg: KnowledgeGraph, anchors, side: Side, ks, keys) -> np.ndarray:
    """Sample ``ks[i]`` distinct negatives around each ``anchors[i]``.

    Each row is drawn from its own counter stream ``keys[i]`` so the result
    for one anchor does not depend on the rest of the batch.  Rows asking for
    more than half their neighbourhood are served by enumeration and a
    random-key shuffle instead of rejection.

    Returns candidate indices of shape (B, max k) padded with -1.
    """
    side = check_side(side)
    anchors = np.asarray(anchors, dtype=np.int64).reshape(-1)
    ks = np.asarray(ks, dtype=np.int64).reshape(-1)
    keys = np.asarray(keys, dtype=np.uint64).reshape(-1)
    sizes = kg.negative_sizes(anchors, side)
    if np.any(ks < 0) or np.any(ks > sizes):
        bad = int(np.flatnonzero((ks < 0) | (ks > sizes))[0])
        raise DomainError(
            f"cannot sample {ks[bad]} negatives from a neighbourhood of size {sizes[bad]}")
    B = len(anchors)
    out = np.full((B, int(ks.max()) if B else 0), -1, dtype=np.int64)
    big = 2 * ks > sizes
    small = np.flatnonzero(~big & (ks > 0))
    if small.size:
        part = _first_distinct_valid(kg, anchors[small], side, ks[small], keys[small])
        out[small, :part.shape[1]] = part
    for i in np.flatnonzero(big):
        out[i, :ks[i]] = _shuffled_prefix(kg, int(anchors[i]), side, int(ks[i]), int(keys[i]))
    return out


def sample_negatives(kg: KnowledgeGraph, anchor: int, side: Side, k: int, seed: int) -> np.ndarray:
    """Uniformly sample ``k`` distinct negatives around ``anchor`` without replacement.

    Returns a (k, 3) array of triples; deterministic in ``seed``.
    """
    kg._check_entity(anchor)
    cand = sample_negative_candidates(kg, [anchor], side, [k], [_rng.derive_key(seed)])[0, :k]
    return kg.candidate_triples(anchor, side, cand).reshape(-1, 3)


def clamp_sample_size(fraction: float | None, k: int | None, size: int) -> tuple[int, bool]:
    """Resolve a per-side sample size from a fraction or absolute count.

    Returns ``(k, clamped)``; k lies in [1, size] whenever size >= 1.
    """
    if k is None:
        want = int(math.ceil(fraction * size - 1e-9)) if fraction is not None else 0
    else:
        want = int(k)
    got = min(max(want, 1), size)
    return got, got != want


def corrupt_triples(kg: KnowledgeGraph, triples, rng: np.random.Generator,
                    max_attempts: int = 10_000) -> np.ndarray:
    """One filtered negative per input triple.

    A fair coin picks whether the head or the tail is replaced by a uniform
    entity; draws that land on a fact of ``kg`` are redrawn.
    """
    src = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
    out = src.copy()
    pending = np.arange(len(src))
    for _ in range(max_attempts):
        if not pending.size:
            return out
        coin = rng.integers(0, 2, size=pending.size)
        ent = rng.integers(0, kg.n_entities, size=pending.size)
        cand = src[pending].copy()
        cand[coin == 0, 0] = ent[coin == 0]
        cand[coin == 1, 2] = ent[coin == 1]
        hit = kg.has_codes(kg.encode(cand))
        out[pending[~hit]] = cand[~hit]
        pending = pending[hit]
    if pending.size:
        bad = tuple(int(v) for v in src[pending[0]])
        raise SamplingError(f"no filtered negative found for triple {bad} after {max_attempts} attempts")
    return out
