"""Write the small bundled fixture files used by tests and CLI examples.

    python3 scripts/make_fixtures.py [OUTDIR]

Produces the three-entity graph ``m1`` with 1-d TransE vectors, a small
two-relation graph ``micro`` with train/test splits and one embedding file
per scoring function, and a malformed triples file for lint checks.
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np

from relik.embed import ScorerKind, dump_embeddings, random_store
from relik.kg import KnowledgeGraph, format_triples
from relik.synthetic import micro_m1


def main(out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    kg, store = micro_m1()
    (out / "m1.tsv").write_text(format_triples(kg), encoding="utf-8")
    (out / "m1_transe.emb").write_text(dump_embeddings(store), encoding="utf-8")

    gen = np.random.default_rng(7)
    n_e = 12
    ents = [f"n{i}" for i in range(n_e)]
    rows = set()
    for i in range(n_e):
        rows.add((i, 0, (i + 1) % n_e))
    while len(rows) < 30:
        h, t = (int(x) for x in gen.integers(0, n_e, 2))
        if h != t:
            rows.add((h, int(gen.integers(0, 2)), t))
    rows = sorted(rows)
    micro = KnowledgeGraph(ents, ["next", "likes"], np.array(rows))
    perm = gen.permutation(len(rows))
    train, test = np.array(rows)[np.sort(perm[:24])], np.array(rows)[np.sort(perm[24:])]
    (out / "micro_train.tsv").write_text(format_triples(micro, train), encoding="utf-8")
    (out / "micro_test.tsv").write_text(format_triples(micro, test), encoding="utf-8")
    for kind in ScorerKind:
        st = random_store(micro, kind, 4, np.random.default_rng(11))
        (out / f"micro_{kind.value}.emb").write_text(dump_embeddings(st), encoding="utf-8")
    (out / "bad_two_fields.tsv").write_text("a\tr\n", encoding="utf-8")


if __name__ == "__main__":
    main(Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parents[1] / "fixtures")
