"""Command-line interface.

Exit codes: 0 success, 1 usage or validation error, 2 runtime error.
Artifacts go to stdout (or ``--out``); diagnostics go to stderr, errors as a
single JSON line ``{"error": ..., "location": ..., "message": ...}``.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import rng as _rng
from .embed import EmbeddingStore, Scorer, ScorerKind, dump_embeddings, load_embeddings
from .errors import ParseError, ReliKError, SamplingError, TruncationError, DivergenceError
from .evaluation import (
    EvalReport,
    TASKS,
    approximation_study,
    edge_weights,
    margin_report,
    score_histogram,
    subgraph_correlation,
)
from .graphops import densest_subgraph, peel_decomposition, rwr_subgraph
from .kg import KnowledgeGraph, corrupt_triples, load_triples, parse_labeled, read_text
from .reliability import (
    DEFAULT_FRACTION,
    DEFAULT_SEED,
    Estimator,
    SampleConfig,
    relik_exact_many,
    relik_sampled_many,
    relik_set,
)
from .report import dumps, emit_report
from .trainer import TrainConfig, train_with_history

log = logging.getLogger("relik")

DEFAULT_MAX_EXACT_SPACE = 1_000_000
SAMPLE_TAG = 31
HIST_TAG = 32
MARGIN_TAG = 33
RUNTIME_ERRORS = (SamplingError, TruncationError, DivergenceError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# -- helpers ---------------------------------------------------------------------

def _digest(path: str) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _manifest(args, argv: list[str]) -> dict:
    kept, skip = [], False
    for tok in argv:
        if skip:
            skip = False
            continue
        if tok in ("--threads", "--out"):
            skip = True
            continue
        if tok.startswith("--threads=") or tok.startswith("--out="):
            continue
        kept.append(tok)
    inputs = {}
    for name in ("triples", "embeddings", "queries", "positives", "negatives", "holdout"):
        val = getattr(args, name, None)
        paths = [val] if isinstance(val, str) else val if isinstance(val, list) else []
        for p in paths:
            inputs[p] = _digest(p)
    params = {k: v for k, v in sorted(vars(args).items())
              if k not in ("threads", "out", "func", "command") and not callable(v)}
    return {"tool": "relik", "version": __version__, "command": args.command, "argv": kept,
            "params": params, "seed": getattr(args, "seed", None), "inputs": inputs}


def _load_graph(args) -> tuple[KnowledgeGraph, KnowledgeGraph, EmbeddingStore | None]:
    """Union graph, the graph defining negatives, and the aligned embeddings.

    Entities and relations that only appear in the embedding file join the
    vocabulary (a triples file cannot mention isolated entities).
    """
    kg, splits = load_triples(*args.triples)
    store = None
    emb_path = getattr(args, "embeddings", None)
    if emb_path:
        raw = load_embeddings(read_text(emb_path), source=emb_path)
        ents = list(kg.entities) + [e for e in raw.entity_labels if e not in kg.entity_index]
        rels = list(kg.relations) + [r for r in raw.relation_labels if r not in kg.relation_index]
        if len(ents) > kg.n_entities or len(rels) > kg.n_relations:
            kg = KnowledgeGraph(ents, rels, kg.triples)
        store = raw.align(kg)
    neg_kg = kg
    if getattr(args, "negatives_from", "all") == "first" and len(splits) > 1:
        neg_kg = kg.restrict(splits[0])
    return kg, neg_kg, store


def _scorer(args, store: EmbeddingStore) -> Scorer:
    return Scorer(store, args.scorer)


def _read_queries(path: str, kg: KnowledgeGraph) -> np.ndarray:
    rows = []
    for lineno, (h, r, t) in enumerate(parse_labeled(read_text(path), path), start=1):
        try:
            rows.append(kg.lookup(h, r, t))
        except ReliKError as exc:
            raise ParseError(str(exc), lineno, path) from None
    return np.array(rows, dtype=np.int64).reshape(-1, 3)


def _cfg(args) -> SampleConfig:
    return SampleConfig(fraction=None if args.k else args.fraction, k=args.k, seed=args.seed)


def _triple_row(kg, t) -> dict:
    h, r, tl = kg.label(t)
    return {"head": h, "relation": r, "tail": tl}


def _results(kg, scorer, triples, mode, cfg, threads, require_positive=True):
    est = Estimator.parse(mode)
    if est is Estimator.EXACT:
        return relik_exact_many(kg, scorer, triples, require_positive, threads)
    return relik_sampled_many(kg, scorer, triples, cfg, est, require_positive, threads)


def _guard_exact(args, kg):
    if Estimator.parse(args.mode) is Estimator.EXACT and kg.space > args.max_exact_space:
        raise ReliKError(
            f"exact ReliK needs |E|*|R| = {kg.space} scores per side and triple, above "
            f"--max-exact-space {args.max_exact_space}; use --mode apx or raise the limit")


# -- commands --------------------------------------------------------------------

def cmd_score(args) -> EvalReport:
    kg, neg_kg, store = _load_graph(args)
    scorer = _scorer(args, store)
    _guard_exact(args, neg_kg)
    triples = _read_queries(args.queries, kg) if args.queries else neg_kg.triples
    res = _results(neg_kg, scorer, triples, args.mode, _cfg(args), args.threads)
    rows = [{**_triple_row(kg, t), **r.as_dict()} for t, r in zip(triples, res)]
    return EvalReport(
        "score", {"mode": Estimator.parse(args.mode).value, "scorer": scorer.kind.value},
        ["head", "relation", "tail", "value", "head_rank", "tail_rank", "head_neg_size", "tail_neg_size",
         "estimator", "head_sample_size", "tail_sample_size"],
        rows, {"n_triples": len(rows), "mean_relik": relik_set(res) if res else None})


def cmd_score_set(args) -> EvalReport:
    kg, neg_kg, store = _load_graph(args)
    scorer = _scorer(args, store)
    _guard_exact(args, neg_kg)
    sub = None
    if args.queries:
        triples = _read_queries(args.queries, kg)
    else:
        sub = rwr_subgraph(neg_kg, args.nodes, args.restart, _rng.numpy_generator(args.seed, SAMPLE_TAG))
        triples = sub.triples
    res = _results(neg_kg, scorer, triples, args.mode, _cfg(args), args.threads)
    rows = [{**_triple_row(kg, t), "value": r.value} for t, r in zip(triples, res)]
    summary = {"relik": relik_set(res) if res else None, "n_triples": len(rows)}
    if sub is not None:
        summary["subgraph"] = sub.as_dict(kg)
    return EvalReport("score_set", {"mode": Estimator.parse(args.mode).value, "scorer": scorer.kind.value},
                      ["head", "relation", "tail", "value"], rows, summary)


def cmd_study_approx(args) -> EvalReport:
    kg, neg_kg, store = _load_graph(args)
    scorer = _scorer(args, store)
    triples = _read_queries(args.queries, kg) if args.queries else neg_kg.triples
    return approximation_study(neg_kg, scorer, triples, args.fractions, args.reps, args.seed,
                               timing=args.timing, threads=args.threads)


def cmd_correlate(args) -> EvalReport:
    kg, neg_kg, store = _load_graph(args)
    scorer = _scorer(args, store)
    holdout = _read_queries(args.holdout, kg) if args.holdout else None
    return subgraph_correlation(neg_kg, scorer, args.subgraphs, args.size, args.task, args.seed,
                                args.restart, _cfg(args), args.mode, filter_kg=kg, threads=args.threads,
                                holdout=holdout)


def _weights(args, kg, neg_kg, scorer):
    mode = args.mode
    return edge_weights(neg_kg, scorer, args.weight, mode, _cfg(args), args.threads)


def cmd_densest(args) -> EvalReport:
    kg, neg_kg, store = _load_graph(args)
    scorer = _scorer(args, store)
    nodes, density = densest_subgraph(neg_kg, _weights(args, kg, neg_kg, scorer))
    rows = [{"node": kg.entities[n]} for n in nodes]
    return EvalReport("densest", {"weight": args.weight, "mode": args.mode, "scorer": scorer.kind.value},
                      ["node"], rows, {"density": density, "n_nodes": len(nodes)})


def cmd_peel(args) -> EvalReport:
    kg, neg_kg, store = _load_graph(args)
    scorer = _scorer(args, store)
    dec = peel_decomposition(neg_kg, _weights(args, kg, neg_kg, scorer))
    rows = []
    for i, (comp, cum, dens) in enumerate(zip(dec.components, dec.cumulative(), dec.densities)):
        rows.append({"iteration": i, "n_nodes": comp.size, "n_triples": int(len(comp.triples)),
                     "density": dens, "cumulative_nodes": cum.size,
                     "cumulative_triples": int(len(cum.triples)),
                     "cumulative_fraction": len(cum.triples) / max(1, neg_kg.n_facts),
                     "nodes": [kg.entities[n] for n in comp.nodes]})
    return EvalReport("peel", {"weight": args.weight, "mode": args.mode, "scorer": scorer.kind.value},
                      ["iteration", "n_nodes", "n_triples", "density", "cumulative_nodes",
                       "cumulative_triples", "cumulative_fraction"],
                      rows, {"n_components": len(rows)})


def cmd_margin(args) -> EvalReport:
    kg, neg_kg, store = _load_graph(args)
    scorer = _scorer(args, store)
    gen = _rng.numpy_generator(args.seed, MARGIN_TAG)
    if args.positives:
        pos = _read_queries(args.positives, kg)
    else:
        n = min(args.n, neg_kg.n_facts)
        pos = neg_kg.triples[np.sort(gen.choice(neg_kg.n_facts, size=n, replace=False))]
    if args.negatives:
        neg = _read_queries(args.negatives, kg)
    else:
        neg = corrupt_triples(kg, pos, gen)
    return margin_report(neg_kg, scorer, pos, neg, _cfg(args), args.mode)


def cmd_train(args) -> EvalReport:
    kg, neg_kg, _ = _load_graph(args)
    cfg = TrainConfig(dim=args.dim, epochs=args.epochs, learning_rate=args.lr, margin=args.margin,
                      negatives_per_positive=args.negatives, batch_size=args.batch_size, seed=args.seed)
    result = train_with_history(neg_kg, args.scorer, cfg)
    Path(args.embeddings_out).write_text(dump_embeddings(result.store), encoding="utf-8")
    rows = [{"epoch": i, "loss": v} for i, v in enumerate(result.losses)]
    return EvalReport("train", {"scorer": ScorerKind.parse(args.scorer).value, "dim": args.dim,
                                "epochs": args.epochs, "learning_rate": args.lr, "margin": args.margin},
                      ["epoch", "loss"], rows,
                      {"final_loss": result.losses[-1] if result.losses else None,
                       "embeddings_sha256": _digest(args.embeddings_out)})


def cmd_histogram(args) -> EvalReport:
    kg, neg_kg, store = _load_graph(args)
    scorer = _scorer(args, store)
    neg = corrupt_triples(kg, neg_kg.triples, _rng.numpy_generator(args.seed, HIST_TAG))
    return score_histogram(neg_kg, scorer, neg_kg.triples, neg, args.bins)


def cmd_validate(args) -> EvalReport:
    kg, splits = load_triples(*args.triples)
    rows = [{"check": "triples", "status": "ok"}]
    summary = {"n_facts": kg.n_facts, "split_sizes": [int(len(s)) for s in splits]}
    if args.embeddings:
        kg, _, store = _load_graph(args)
        rows.append({"check": "embeddings", "status": "ok"})
        summary.update({"dim": store.dim, "field": store.field})
        if args.scorer:
            Scorer(store, args.scorer)
            rows.append({"check": "scorer", "status": "ok"})
    summary.update({"n_entities": kg.n_entities, "n_relations": kg.n_relations})
    return EvalReport("validate", {}, ["check", "status"], rows, summary)


def cmd_rerun(args):
    doc = json.loads(read_text(args.artifact))
    manifest = doc.get("manifest")
    if not manifest:
        raise ParseError("artifact has no manifest", source=args.artifact)
    for path, digest in manifest["inputs"].items():
        if _digest(path) != digest:
            raise ReliKError(f"input {path} changed since the artifact was produced")
    return manifest["argv"]


# -- parser ----------------------------------------------------------------------

def _fractions(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad fraction list {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="relik", description="ReliK reliability scores for knowledge-graph embeddings.")
    p.add_argument("--version", action="version", version=f"relik {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, embeddings=True, sampling=True):
        sp.add_argument("--triples", nargs="+", required=True, metavar="FILE",
                        help="triple files (train, valid, test ...); their union is the fact set")
        sp.add_argument("--negatives-from", choices=["all", "first"], default="all",
                        help="fact set defining negatives: union of all files or the first file only")
        if embeddings:
            sp.add_argument("--embeddings", required=True, metavar="FILE")
            sp.add_argument("--scorer", required=True, choices=[k.value for k in ScorerKind])
        if sampling:
            sp.add_argument("--fraction", type=float, default=DEFAULT_FRACTION,
                            help="per-side sample size as a fraction of the negative neighbourhood")
            sp.add_argument("--k", type=int, default=None, help="absolute per-side sample size")
        sp.add_argument("--seed", type=int, default=DEFAULT_SEED)
        sp.add_argument("--threads", type=int, default=1)
        sp.add_argument("--format", choices=["json", "csv"], default="json")
        sp.add_argument("--out", default=None, help="write the artifact here instead of stdout")

    s = sub.add_parser("score", help="per-triple ReliK")
    common(s)
    s.add_argument("--mode", choices=["exact", "lb", "apx"], default="apx")
    s.add_argument("--queries", metavar="FILE", help="triples to score (default: every fact)")
    s.add_argument("--max-exact-space", type=int, default=DEFAULT_MAX_EXACT_SPACE)
    s.set_defaults(func=cmd_score)

    s = sub.add_parser("score-set", help="ReliK of a triple set or a random-walk subgraph")
    common(s)
    s.add_argument("--mode", choices=["exact", "lb", "apx"], default="apx")
    s.add_argument("--queries", metavar="FILE")
    s.add_argument("--nodes", type=int, default=60)
    s.add_argument("--restart", type=float, default=0.2)
    s.add_argument("--max-exact-space", type=int, default=DEFAULT_MAX_EXACT_SPACE)
    s.set_defaults(func=cmd_score_set)

    s = sub.add_parser("study-approx", help="time and MSE of the estimators vs sample fraction")
    common(s, sampling=False)
    s.add_argument("--fractions", type=_fractions, default=[0.05, 0.1, 0.2, 0.4, 0.8])
    s.add_argument("--reps", type=int, default=3)
    s.add_argument("--queries", metavar="FILE")
    s.add_argument("--timing", action="store_true",
                   help="record wall-clock seconds (makes the artifact non-reproducible)")
    s.set_defaults(func=cmd_study_approx)

    s = sub.add_parser("correlate", help="correlate subgraph ReliK with a downstream metric")
    common(s)
    s.add_argument("--task", choices=list(TASKS), default="relation_mrr")
    s.add_argument("--subgraphs", type=int, default=100)
    s.add_argument("--size", type=int, default=60)
    s.add_argument("--restart", type=float, default=0.2)
    s.add_argument("--mode", choices=["exact", "lb", "apx"], default="apx")
    s.add_argument("--holdout", metavar="FILE",
                   help="facts used to fit the classification threshold (default: the subgraph itself)")
    s.set_defaults(func=cmd_correlate)

    for name, fn, text in (("densest", cmd_densest, "weighted densest subgraph"),
                           ("peel", cmd_peel, "repeated densest-subgraph decomposition")):
        s = sub.add_parser(name, help=text)
        common(s)
        s.add_argument("--weight", choices=["relik", "rr"], default="relik")
        s.add_argument("--mode", choices=["exact", "lb", "apx"], default="apx")
        s.set_defaults(func=fn)

    s = sub.add_parser("margin", help="mean ReliK of positive vs negative triples")
    common(s)
    s.add_argument("--positives", metavar="FILE")
    s.add_argument("--negatives", metavar="FILE")
    s.add_argument("--n", type=int, default=50, help="positives to sample when --positives is absent")
    s.add_argument("--mode", choices=["exact", "lb", "apx"], default="apx")
    s.set_defaults(func=cmd_margin)

    s = sub.add_parser("train", help="train TransE or DistMult embeddings")
    common(s, embeddings=False, sampling=False)
    s.add_argument("--scorer", required=True, choices=["TransE_L1", "TransE_L2", "DistMult"])
    s.add_argument("--embeddings-out", required=True, metavar="FILE")
    s.add_argument("--dim", type=int, default=50)
    s.add_argument("--epochs", type=int, default=100)
    s.add_argument("--lr", type=float, default=0.01)
    s.add_argument("--margin", type=float, default=1.0)
    s.add_argument("--negatives", type=int, default=1)
    s.add_argument("--batch-size", type=int, default=128)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("histogram", help="score histogram of facts vs corrupted triples")
    common(s, sampling=False)
    s.add_argument("--bins", type=int, default=50)
    s.set_defaults(func=cmd_histogram)

    s = sub.add_parser("validate", help="lint triple and embedding files")
    s.add_argument("--triples", nargs="+", required=True, metavar="FILE")
    s.add_argument("--embeddings", metavar="FILE")
    s.add_argument("--scorer", choices=[k.value for k in ScorerKind])
    s.add_argument("--threads", type=int, default=1, help="accepted for uniformity; validation is serial")
    s.add_argument("--format", choices=["json", "csv"], default="json")
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("rerun", help="re-execute the command recorded in an artifact's manifest")
    s.add_argument("artifact")
    s.add_argument("--threads", type=int, default=None)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_rerun)
    return p


def _fail(kind: str, message: str, location: str | None, code: int, stderr) -> int:
    stderr.write(json.dumps({"error": kind, "location": location, "message": message}) + "\n")
    return code


def main(argv: list[str] | None = None, stdout=None, stderr=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        if args.command == "rerun":
            new_argv = args.func(args)
            if args.threads is not None:
                new_argv += ["--threads", str(args.threads)]
            if args.out is not None:
                new_argv += ["--out", args.out]
            return main(new_argv, stdout, stderr)
        report = args.func(args)
        text = emit_report(report, args.format, _manifest(args, argv) if args.format == "json" else None)
        if args.out:
            Path(args.out).write_text(text, encoding="utf-8")
        else:
            stdout.write(text)
        return 0
    except UsageError as exc:
        return _fail("UsageError", str(exc), None, 1, stderr)
    except ParseError as exc:
        loc = f"{exc.source or '<input>'}:{exc.line}" if exc.line else exc.source
        return _fail("ParseError", exc.message, loc, 1, stderr)
    except FileNotFoundError as exc:
        return _fail("FileNotFound", exc.strerror or str(exc), exc.filename, 1, stderr)
    except RUNTIME_ERRORS as exc:
        return _fail(type(exc).__name__, str(exc), None, 2, stderr)
    except ReliKError as exc:
        return _fail(type(exc).__name__, str(exc), None, 1, stderr)


def entry() -> None:
    logging.basicConfig(level=logging.WARNING, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    sys.exit(main())


if __name__ == "__main__":
    entry()
