import io
import json
import time

import pytest

from relik.cli import main


def run(argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(argv, out, err)
    return code, out.getvalue(), err.getvalue()


@pytest.fixture
def here(fixtures, monkeypatch):
    monkeypatch.chdir(fixtures)
    return fixtures


M1 = ["--triples", "m1.tsv", "--embeddings", "m1_transe.emb", "--scorer", "TransE_L1"]
MICRO = ["--triples", "micro_train.tsv", "micro_test.tsv", "--embeddings", "micro_RotatE.emb", "--scorer", "RotatE"]


def test_score_exact_on_m1(here):
    code, out, _ = run(["score", *M1, "--mode", "exact"])
    assert code == 0
    row = json.loads(out)["rows"][0]
    assert (row["value"], row["head_rank"], row["tail_rank"]) == (1.0, 1, 1)
    # C only appears in the embedding file but still belongs to the vocabulary
    assert row["head_neg_size"] == 2


def test_full_fraction_equals_exact(here):
    _, exact, _ = run(["score", *MICRO, "--mode", "exact"])
    _, apx, _ = run(["score", *MICRO, "--mode", "apx", "--fraction", "1.0"])
    _, lb, _ = run(["score", *MICRO, "--mode", "lb", "--fraction", "1.0"])
    ex = [r["value"] for r in json.loads(exact)["rows"]]
    assert ex == [r["value"] for r in json.loads(apx)["rows"]] == [r["value"] for r in json.loads(lb)["rows"]]


def test_validate_two_field_line(here):
    code, out, err = run(["validate", "--triples", "bad_two_fields.tsv"])
    assert code == 1 and out == ""
    assert err.count("\n") == 1
    msg = json.loads(err)
    assert msg["error"] == "ParseError" and msg["location"] == "bad_two_fields.tsv:1"


def test_usage_errors_exit_one(here):
    for argv in (["score", *M1, "--bogus"], ["nosuch"], ["score", *M1, "--mode", "upper"], []):
        code, _, err = run(argv)
        assert code == 1 and json.loads(err)["error"] == "UsageError"


def test_missing_file(here):
    code, _, err = run(["score", "--triples", "nope.tsv", "--embeddings", "m1_transe.emb", "--scorer", "TransE_L1"])
    assert code == 1 and json.loads(err)["location"] == "nope.tsv"


def test_missing_vectors_and_scorer_mismatch(here, tmp_path):
    extra = tmp_path / "more.tsv"
    extra.write_text("A\tr\tZ\n")
    code, _, err = run(["score", "--triples", str(extra), "--embeddings", "m1_transe.emb", "--scorer", "TransE_L1"])
    assert code == 1 and json.loads(err)["error"] == "ConfigurationError"
    code, _, err = run(["score", "--triples", "m1.tsv", "--embeddings", "m1_transe.emb", "--scorer", "RotatE"])
    assert code == 1


def test_exact_guard(here):
    code, _, err = run(["score", *M1, "--mode", "exact", "--max-exact-space", "2"])
    assert code == 1 and "max-exact-space" in json.loads(err)["message"]
    assert run(["score", *M1, "--mode", "exact", "--max-exact-space", "3"])[0] == 0


def test_runtime_error_exit_two(here, tmp_path):
    code, _, err = run(["train", "--triples", "micro_train.tsv", "--scorer", "DistMult", "--lr", "1e150",
                        "--epochs", "30", "--embeddings-out", str(tmp_path / "x.emb")])
    assert code == 2 and json.loads(err)["error"] == "DivergenceError"


def test_queries_must_be_facts(here, tmp_path):
    q = tmp_path / "q.tsv"
    q.write_text("B\tr\tA\n")
    code, _, err = run(["score", *M1, "--queries", str(q)])
    assert code == 1 and json.loads(err)["error"] == "DomainError"


def test_study_csv_columns(here):
    code, out, _ = run(["study-approx", *MICRO, "--fractions", "0.2,1.0", "--reps", "2", "--format", "csv"])
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "fraction,seconds,mse_apx,mse_lb"
    assert lines[2] == "1,,0,0"


def test_negatives_from_first_split(here):
    _, union, _ = run(["score", *MICRO, "--mode", "exact"])
    _, first, _ = run(["score", *MICRO, "--mode", "exact", "--negatives-from", "first"])
    u, f = json.loads(union), json.loads(first)
    assert len(f["rows"]) == 24 and len(u["rows"]) == 30
    assert all(r["head_neg_size"] >= 0 for r in f["rows"])


def test_train_then_score(here, tmp_path):
    emb = tmp_path / "t.emb"
    code, out, _ = run(["train", "--triples", "micro_train.tsv", "--scorer", "TransE_L2", "--epochs", "5",
                        "--dim", "4", "--embeddings-out", str(emb)])
    assert code == 0 and len(json.loads(out)["rows"]) == 5
    code, out, _ = run(["score", "--triples", "micro_train.tsv", "--embeddings", str(emb), "--scorer", "TransE_L2"])
    assert code == 0


SUBCOMMANDS = [
    ["score", *MICRO, "--mode", "apx"],
    ["score", *MICRO, "--mode", "exact"],
    ["score-set", *MICRO, "--nodes", "6"],
    ["score-set", *MICRO, "--queries", "micro_test.tsv", "--mode", "lb"],
    ["study-approx", *MICRO, "--fractions", "0.1,0.5", "--reps", "2"],
    ["correlate", *MICRO, "--subgraphs", "5", "--size", "5", "--task", "classification"],
    ["correlate", *MICRO, "--subgraphs", "5", "--size", "5", "--task", "classification", "--holdout", "micro_test.tsv"],
    ["densest", *MICRO, "--weight", "relik"],
    ["peel", *MICRO, "--weight", "rr"],
    ["margin", *MICRO, "--n", "8"],
    ["margin", *MICRO, "--positives", "micro_test.tsv", "--k", "3"],
    ["histogram", *MICRO, "--bins", "6"],
    ["validate", "--triples", "micro_train.tsv", "--embeddings", "micro_PairRE.emb", "--scorer", "PairRE"],
]


@pytest.mark.parametrize("argv", SUBCOMMANDS, ids=lambda a: a[0])
def test_subcommands_reproducible_and_fast(here, argv):
    t0 = time.perf_counter()
    code, a, err = run(argv)
    assert code == 0, err
    assert time.perf_counter() - t0 < 10
    for fmt in (["--format", "json"], ["--format", "csv"]):
        one = run([*argv, *fmt, "--threads", "1"])[1]
        two = run([*argv, *fmt, "--threads", "3"])[1]
        assert one == two
    assert run(argv)[1] == a


def test_train_reproducible(here, tmp_path):
    argv = ["train", "--triples", "micro_train.tsv", "--scorer", "DistMult", "--epochs", "4", "--dim", "3"]
    a = run([*argv, "--embeddings-out", str(tmp_path / "a.emb")])[1]
    b = run([*argv, "--embeddings-out", str(tmp_path / "a.emb"), "--threads", "2"])[1]
    assert a == b


def test_rerun_from_manifest(here, tmp_path):
    art = tmp_path / "a.json"
    assert run(["score", *MICRO, "--mode", "apx", "--fraction", "0.3", "--out", str(art)])[0] == 0
    code, again, _ = run(["rerun", str(art)])
    assert code == 0 and again == art.read_text()
    manifest = json.loads(again)["manifest"]
    assert "--out" not in manifest["argv"] and set(manifest["inputs"]) == {"micro_train.tsv", "micro_test.tsv",
                                                                            "micro_RotatE.emb"}


def test_rerun_detects_changed_inputs(here, tmp_path, monkeypatch):
    tri = tmp_path / "m.tsv"
    tri.write_text((here / "m1.tsv").read_text())
    art = tmp_path / "a.json"
    run(["score", "--triples", str(tri), "--embeddings", "m1_transe.emb", "--scorer", "TransE_L1", "--out", str(art)])
    tri.write_text("A\tr\tB\nB\tr\tC\n")
    code, _, err = run(["rerun", str(art)])
    assert code == 1 and "changed" in json.loads(err)["message"]
