"""Small margin-ranking trainer for TransE and DistMult.

Mini-batch SGD on ``max(0, margin - s(pos) + s(neg))`` with filtered
head/tail corruptions.  It only exists so experiments can run end to end
without an external training stack.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import rng as _rng
from .embed import EmbeddingStore, Scorer, ScorerKind, TRAINABLE
from .errors import ConfigurationError, DivergenceError, DomainError
from .kg import KnowledgeGraph, corrupt_triples

TRAIN_TAG = 21


@dataclass(frozen=True)
class TrainConfig:
    dim: int = 50
    epochs: int = 100
    learning_rate: float = 0.01
    margin: float = 1.0
    negatives_per_positive: int = 1
    batch_size: int = 128
    seed: int = 0

    def __post_init__(self):
        if self.dim < 1 or self.epochs < 0 or self.negatives_per_positive < 1 or self.batch_size < 1:
            raise ConfigurationError("dim, negatives_per_positive and batch_size must be positive; epochs >= 0")
        if not (self.learning_rate > 0 and self.margin > 0):
            raise ConfigurationError("learning_rate and margin must be positive")


@dataclass
class TrainResult:
    store: EmbeddingStore
    losses: list[float] = field(default_factory=list)


def margin_loss(scorer: Scorer, positives, negatives, margin: float) -> np.ndarray:
    """Per-pair hinge ``max(0, margin - s(pos) + s(neg))``."""
    return np.maximum(0.0, margin - scorer.score_batch(positives) + scorer.score_batch(negatives))


def _grad_d(kind: ScorerKind, d: np.ndarray) -> np.ndarray:
    """Gradient of the distance ``-score`` with respect to the residual."""
    if kind is ScorerKind.TRANSE_L1:
        return np.sign(d)
    norm = np.sqrt((d * d).sum(axis=1, keepdims=True))
    return d / np.maximum(norm, 1e-12)


def _normalize_rows(x: np.ndarray) -> np.ndarray:
    norm = np.sqrt((x * x).sum(axis=1, keepdims=True))
    return x / np.maximum(norm, 1e-12)


@np.errstate(over="ignore", invalid="ignore")  # divergence is detected explicitly
def train_with_history(kg: KnowledgeGraph, kind, cfg: TrainConfig,
                       on_epoch: Callable[[int, float], None] | None = None) -> TrainResult:
    kind = ScorerKind.parse(kind)
    if kind not in TRAINABLE:
        raise ConfigurationError(f"{kind.value} cannot be trained here; import its embeddings instead")
    if kg.n_facts == 0:
        raise DomainError("cannot train on an empty graph")
    gen = _rng.numpy_generator(cfg.seed, TRAIN_TAG)
    bound = 6.0 / math.sqrt(cfg.dim)
    ent = gen.uniform(-bound, bound, size=(kg.n_entities, cfg.dim))
    rel = gen.uniform(-bound, bound, size=(kg.n_relations, cfg.dim))
    facts = np.asarray(kg.triples)
    translational = kind is not ScorerKind.DISTMULT
    losses = []

    for epoch in range(cfg.epochs):
        pos = np.repeat(facts, cfg.negatives_per_positive, axis=0)
        neg = corrupt_triples(kg, pos, gen)
        order = gen.permutation(len(pos))
        total = 0.0
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            p, n = pos[idx], neg[idx]
            gh_e = np.zeros_like(ent)
            gr = np.zeros_like(rel)
            if translational:
                dp = ent[p[:, 0]] + rel[p[:, 1]] - ent[p[:, 2]]
                dn = ent[n[:, 0]] + rel[n[:, 1]] - ent[n[:, 2]]
                if kind is ScorerKind.TRANSE_L1:
                    sp, sn = -np.abs(dp).sum(1), -np.abs(dn).sum(1)
                else:
                    sp, sn = -np.sqrt((dp * dp).sum(1)), -np.sqrt((dn * dn).sum(1))
                loss = np.maximum(0.0, cfg.margin - sp + sn)
                active = (loss > 0)[:, None]
                gp = _grad_d(kind, dp) * active
                gn = -_grad_d(kind, dn) * active
                for trip, g in ((p, gp), (n, gn)):
                    np.add.at(gh_e, trip[:, 0], g)
                    np.add.at(gr, trip[:, 1], g)
                    np.add.at(gh_e, trip[:, 2], -g)
            else:
                hp, rp, tp = ent[p[:, 0]], rel[p[:, 1]], ent[p[:, 2]]
                hn, rn, tn = ent[n[:, 0]], rel[n[:, 1]], ent[n[:, 2]]
                sp, sn = (hp * rp * tp).sum(1), (hn * rn * tn).sum(1)
                loss = np.maximum(0.0, cfg.margin - sp + sn)
                active = (loss > 0)[:, None]
                # d loss / d params: -grad s(pos) + grad s(neg)
                for (h, r, t, trip, sign) in ((hp, rp, tp, p, -1.0), (hn, rn, tn, n, 1.0)):
                    np.add.at(gh_e, trip[:, 0], sign * r * t * active)
                    np.add.at(gr, trip[:, 1], sign * h * t * active)
                    np.add.at(gh_e, trip[:, 2], sign * h * r * active)
            ent -= cfg.learning_rate * gh_e
            rel -= cfg.learning_rate * gr
            total += float(loss.sum())
        mean = total / len(pos)
        if not math.isfinite(mean) or not np.all(np.isfinite(ent)) or not np.all(np.isfinite(rel)):
            raise DivergenceError(f"non-finite loss in epoch {epoch}", epoch)
        if translational:
            ent = _normalize_rows(ent)
        losses.append(mean)
        if on_epoch is not None:
            on_epoch(epoch, mean)

    store = EmbeddingStore(cfg.dim, "real", ent, rel, None, 1, tuple(kg.entities), tuple(kg.relations))
    return TrainResult(store, losses)


def train(kg: KnowledgeGraph, kind, cfg: TrainConfig) -> EmbeddingStore:
    """Train TransE_L1, TransE_L2 or DistMult embeddings for ``kg``."""
    return train_with_history(kg, kind, cfg).store
