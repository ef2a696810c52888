"""Embedding storage and closed-form triple scorers.

Complex vectors are stored as ``d`` real parts followed by ``d`` imaginary
parts.  Every scorer is oriented so that a higher score means a more
plausible triple.

All scoring paths (single triple, arbitrary batch, one-vs-all block,
sampled candidates) go through the same elementwise kernel followed by a
reduction over a freshly allocated contiguous last axis, which keeps the
results bit-identical between paths.
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigurationError, ParseError
from .kg import KnowledgeGraph, Side, check_side


class ScorerKind(str, enum.Enum):
    TRANSE_L1 = "TransE_L1"
    TRANSE_L2 = "TransE_L2"
    DISTMULT = "DistMult"
    ROTATE = "RotatE"
    PAIRRE = "PairRE"
    COMPLEX = "ComplEx"

    @classmethod
    def parse(cls, name: "str | ScorerKind") -> "ScorerKind":
        if isinstance(name, cls):
            return name
        for kind in cls:
            if kind.value.lower() == str(name).lower():
                return kind
        raise ConfigurationError(f"unknown scorer {name!r}; choose from {[k.value for k in cls]}")

    @property
    def field(self) -> str:
        return "complex" if self in (ScorerKind.ROTATE, ScorerKind.COMPLEX) else "real"


TRAINABLE = (ScorerKind.TRANSE_L1, ScorerKind.TRANSE_L2, ScorerKind.DISTMULT)


@dataclass(frozen=True)
class EmbeddingStore:
    """Entity and relation vectors aligned to a graph's vocabularies.

    ``entity_vecs`` has shape (|E|, w) and ``relation_vecs`` (|R|, w) where
    ``w = dim`` for real stores and ``2 * dim`` for complex ones.
    ``relation_tail_vecs`` is the second relation vector used by PairRE.
    """

    dim: int
    field: str
    entity_vecs: np.ndarray
    relation_vecs: np.ndarray
    relation_tail_vecs: np.ndarray | None = None
    orientation: int = 1
    entity_labels: tuple[str, ...] = ()
    relation_labels: tuple[str, ...] = ()

    def __post_init__(self):
        if self.dim < 1:
            raise ConfigurationError("dim must be positive")
        if self.field not in ("real", "complex"):
            raise ConfigurationError(f"field must be real or complex, got {self.field!r}")
        if self.orientation not in (1, -1):
            raise ConfigurationError("orientation must be +1 or -1")
        w = self.width
        for name in ("entity_vecs", "relation_vecs", "relation_tail_vecs"):
            arr = getattr(self, name)
            if arr is None:
                continue
            arr = np.ascontiguousarray(arr, dtype=np.float64)
            if arr.ndim != 2 or arr.shape[1] != w:
                raise ConfigurationError(f"{name} must have shape (n, {w}), got {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise ConfigurationError(f"{name} contains non-finite values")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.relation_tail_vecs is not None and self.relation_tail_vecs.shape != self.relation_vecs.shape:
            raise ConfigurationError("relation_tail_vecs must match relation_vecs in shape")

    @property
    def width(self) -> int:
        return self.dim * (2 if self.field == "complex" else 1)

    @property
    def n_entities(self) -> int:
        return self.entity_vecs.shape[0]

    @property
    def n_relations(self) -> int:
        return self.relation_vecs.shape[0]

    def complex_entities(self) -> np.ndarray:
        d = self.dim
        return self.entity_vecs[:, :d] + 1j * self.entity_vecs[:, d:]

    def complex_relations(self) -> np.ndarray:
        d = self.dim
        return self.relation_vecs[:, :d] + 1j * self.relation_vecs[:, d:]

    def replace(self, **changes) -> "EmbeddingStore":
        values = {f: getattr(self, f) for f in self.__dataclass_fields__}
        values.update(changes)
        return EmbeddingStore(**values)

    def check_compatible(self, kind: ScorerKind) -> None:
        kind = ScorerKind.parse(kind)
        if kind.field != self.field:
            raise ConfigurationError(f"{kind.value} requires a {kind.field} store, got {self.field}")
        if kind is ScorerKind.PAIRRE and self.relation_tail_vecs is None:
            raise ConfigurationError("PairRE requires RT (relation tail) vectors")

    def align(self, kg: KnowledgeGraph) -> "EmbeddingStore":
        """Reorder rows to ``kg``'s vocabularies; every label must be present."""
        ent = {label: i for i, label in enumerate(self.entity_labels)}
        rel = {label: i for i, label in enumerate(self.relation_labels)}
        missing = [e for e in kg.entities if e not in ent]
        if missing:
            raise ConfigurationError(f"no vector for entity {missing[0]!r} ({len(missing)} missing)")
        missing = [r for r in kg.relations if r not in rel]
        if missing:
            raise ConfigurationError(f"no vector for relation {missing[0]!r} ({len(missing)} missing)")
        ei = [ent[e] for e in kg.entities]
        ri = [rel[r] for r in kg.relations]
        return self.replace(
            entity_vecs=self.entity_vecs[ei],
            relation_vecs=self.relation_vecs[ri],
            relation_tail_vecs=None if self.relation_tail_vecs is None else self.relation_tail_vecs[ri],
            entity_labels=tuple(kg.entities),
            relation_labels=tuple(kg.relations),
        )


# -- kernel ----------------------------------------------------------------

def _kernel(kind: ScorerKind, d: int, h, r, rt, t) -> np.ndarray:
    """Score broadcastable blocks whose last axis holds the vector entries."""
    if kind is ScorerKind.TRANSE_L1:
        return -np.abs(h + r - t).sum(axis=-1)
    if kind is ScorerKind.TRANSE_L2:
        diff = h + r - t
        return -np.sqrt((diff * diff).sum(axis=-1))
    if kind is ScorerKind.DISTMULT:
        return (h * r * t).sum(axis=-1)
    if kind is ScorerKind.PAIRRE:
        diff = h * r - t * rt
        return -np.sqrt((diff * diff).sum(axis=-1))
    h_re, h_im = h[..., :d], h[..., d:]
    r_re, r_im = r[..., :d], r[..., d:]
    t_re, t_im = t[..., :d], t[..., d:]
    hr_re = h_re * r_re - h_im * r_im
    hr_im = h_re * r_im + h_im * r_re
    if kind is ScorerKind.ROTATE:
        dre = hr_re - t_re
        dim = hr_im - t_im
        return -np.sqrt((dre * dre + dim * dim).sum(axis=-1))
    if kind is ScorerKind.COMPLEX:
        return (hr_re * t_re + hr_im * t_im).sum(axis=-1)
    raise ConfigurationError(f"unsupported scorer {kind}")


class Scorer:
    """A triple scoring oracle: higher means more plausible.

    ``transform``, when given, is applied elementwise to the oriented score.
    It exists to check that rank-based quantities only see the ordering.
    """

    def __init__(self, store: EmbeddingStore, kind: "ScorerKind | str",
                 transform: Callable[[np.ndarray], np.ndarray] | None = None):
        self.kind = ScorerKind.parse(kind)
        store.check_compatible(self.kind)
        self.store = store
        self.transform = transform

    def with_transform(self, transform) -> "Scorer":
        return Scorer(self.store, self.kind, transform)

    def _finish(self, raw: np.ndarray) -> np.ndarray:
        if self.store.orientation == -1:
            raw = -raw
        if self.transform is not None:
            raw = np.asarray(self.transform(raw), dtype=np.float64)
        return raw

    def _blocks(self, h_idx, r_idx, t_idx):
        s = self.store
        rt = s.relation_tail_vecs[r_idx] if s.relation_tail_vecs is not None else None
        return s.entity_vecs[h_idx], s.relation_vecs[r_idx], rt, s.entity_vecs[t_idx]

    def score_batch(self, triples) -> np.ndarray:
        triples = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
        if len(triples) == 0:
            return np.zeros(0, dtype=np.float64)
        h, r, rt, t = self._blocks(triples[:, 0], triples[:, 1], triples[:, 2])
        return self._finish(_kernel(self.kind, self.store.dim, h, r, rt, t))

    def score(self, triple) -> float:
        return float(self.score_batch([tuple(triple)])[0])

    def __call__(self, triples) -> np.ndarray:
        return self.score_batch(triples)

    def score_candidates(self, anchors, side: Side, cand) -> np.ndarray:
        """Scores of candidate triples ``cand`` (B, k) around ``anchors`` (B,)."""
        anchors = np.asarray(anchors, dtype=np.int64)
        cand = np.asarray(cand, dtype=np.int64)
        n_e = self.store.n_entities
        rel, other = cand // n_e, cand % n_e
        s = self.store
        a = s.entity_vecs[anchors][:, None, :]
        o = s.entity_vecs[other]
        r = s.relation_vecs[rel]
        rt = s.relation_tail_vecs[rel] if s.relation_tail_vecs is not None else None
        if check_side(side) == "head":
            raw = _kernel(self.kind, s.dim, a, r, rt, o)
        else:
            raw = _kernel(self.kind, s.dim, o, r, rt, a)
        return self._finish(raw)

    def one_vs_all(self, anchors, side: Side) -> np.ndarray:
        """Scores of every candidate around each anchor, shape (B, |R|*|E|).

        Column ``c`` holds candidate ``(relation=c // |E|, other=c % |E|)``.
        """
        anchors = np.asarray(anchors, dtype=np.int64).reshape(-1)
        s = self.store
        a = s.entity_vecs[anchors][:, None, None, :]
        r = s.relation_vecs[None, :, None, :]
        rt = s.relation_tail_vecs[None, :, None, :] if s.relation_tail_vecs is not None else None
        o = s.entity_vecs[None, None, :, :]
        if check_side(side) == "head":
            raw = _kernel(self.kind, s.dim, a, r, rt, o)
        else:
            raw = _kernel(self.kind, s.dim, o, r, rt, a)
        return self._finish(raw.reshape(len(anchors), -1))


# -- file format -----------------------------------------------------------

_HEADER = re.compile(r"^#relik-embeddings(?P<rest>(\s+\S+=\S+)*)\s*$")


def _parse_header(line: str, source):
    m = _HEADER.match(line)
    if not m:
        raise ParseError("first line must be '#relik-embeddings v=1 dim=<D> field=<real|complex> orientation=+1'",
                         1, source)
    opts = dict(kv.split("=", 1) for kv in m.group("rest").split())
    if opts.get("v") != "1":
        raise ParseError(f"unsupported version {opts.get('v')!r}", 1, source)
    try:
        dim = int(opts["dim"])
    except (KeyError, ValueError):
        raise ParseError("header needs an integer dim=", 1, source) from None
    if dim < 1:
        raise ParseError("dim must be positive", 1, source)
    fld = opts.get("field", "real")
    if fld not in ("real", "complex"):
        raise ParseError(f"field must be real or complex, got {fld!r}", 1, source)
    orient = opts.get("orientation", "+1")
    if orient not in ("+1", "1", "-1"):
        raise ParseError(f"orientation must be +1 or -1, got {orient!r}", 1, source)
    return dim, fld, -1 if orient == "-1" else 1


def load_embeddings(text: str, kg: KnowledgeGraph | None = None, source: str | None = None) -> EmbeddingStore:
    """Parse an embedding file; align to ``kg`` when given."""
    lines = text.splitlines()
    if not lines:
        raise ParseError("empty embedding file", 1, source)
    dim, fld, orient = _parse_header(lines[0].rstrip("\r"), source)
    width = dim * (2 if fld == "complex" else 1)
    rows: dict[str, dict[str, list[float]]] = {"E": {}, "R": {}, "RT": {}}
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.rstrip("\r")
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        tag = parts[0]
        if tag not in rows:
            raise ParseError(f"unknown row tag {tag!r} (expected E, R or RT)", lineno, source)
        if len(parts) < 2 or parts[1] == "":
            raise ParseError("missing label", lineno, source)
        label, nums = parts[1], parts[2:]
        if len(nums) != width:
            raise ParseError(f"{tag} row {label!r} has {len(nums)} values, expected {width}", lineno, source)
        try:
            vec = [float(x) for x in nums]
        except ValueError as exc:
            raise ParseError(f"bad numeral in row {label!r}: {exc}", lineno, source) from None
        if not all(math.isfinite(v) for v in vec):
            raise ParseError(f"non-finite value in row {label!r}", lineno, source)
        if label in rows[tag]:
            raise ParseError(f"duplicate {tag} row {label!r}", lineno, source)
        rows[tag][label] = vec
    if rows["RT"] and fld != "real":
        raise ParseError("RT rows are only valid in real stores (PairRE)", None, source)
    if rows["RT"] and set(rows["RT"]) != set(rows["R"]):
        raise ParseError("RT rows must cover exactly the relations with R rows", None, source)
    rel_labels = tuple(rows["R"])
    store = EmbeddingStore(
        dim=dim,
        field=fld,
        entity_vecs=np.array(list(rows["E"].values()), dtype=np.float64).reshape(-1, width),
        relation_vecs=np.array(list(rows["R"].values()), dtype=np.float64).reshape(-1, width),
        relation_tail_vecs=(np.array([rows["RT"][r] for r in rel_labels], dtype=np.float64).reshape(-1, width)
                            if rows["RT"] else None),
        orientation=orient,
        entity_labels=tuple(rows["E"]),
        relation_labels=rel_labels,
    )
    return store.align(kg) if kg is not None else store


def dump_embeddings(store: EmbeddingStore) -> str:
    """Serialise ``store`` in the v1 text format (17 significant digits)."""
    sign = "+1" if store.orientation == 1 else "-1"
    out = [f"#relik-embeddings v=1 dim={store.dim} field={store.field} orientation={sign}\n"]

    def rows(tag, labels, vecs):
        for label, vec in zip(labels, vecs):
            out.append(tag + "\t" + label + "\t" + "\t".join(f"{v:.17g}" for v in vec) + "\n")

    rows("E", store.entity_labels, store.entity_vecs)
    rows("R", store.relation_labels, store.relation_vecs)
    if store.relation_tail_vecs is not None:
        rows("RT", store.relation_labels, store.relation_tail_vecs)
    return "".join(out)


def random_store(kg: KnowledgeGraph, kind: "ScorerKind | str", dim: int, rng: np.random.Generator,
                 scale: float = 1.0) -> EmbeddingStore:
    """Uniform(-scale, scale) vectors shaped for ``kind``; handy for tests and smoke runs."""
    kind = ScorerKind.parse(kind)
    fld = kind.field
    w = dim * (2 if fld == "complex" else 1)
    ent = rng.uniform(-scale, scale, size=(kg.n_entities, w))
    rel = rng.uniform(-scale, scale, size=(kg.n_relations, w))
    rt = rng.uniform(-scale, scale, size=(kg.n_relations, w)) if kind is ScorerKind.PAIRRE else None
    return EmbeddingStore(dim, fld, ent, rel, rt, 1, tuple(kg.entities), tuple(kg.relations))
