import json

import pytest

from qdtm.cli import EXIT_OK, EXIT_VALIDATION, main


@pytest.fixture
def small_corpus(tmp_path):
    path = tmp_path / "corpus.jsonl"
    assert main(["synth", "--topics", "4", "--vocab", "120", "--docs", "80",
                 "--doc-length", "25", "--rare-prevalence", "0.05",
                 "--seed", "1", "--out", str(path),
                 "--embeddings-out", str(tmp_path / "vec.txt")]) == EXIT_OK
    return path


def test_synth_writes_corpus_truth_manifest(small_corpus, tmp_path):
    assert small_corpus.exists()
    truth = json.loads((tmp_path / "corpus.jsonl.truth.json").read_text())
    assert truth["rare_topic"] == "topic3"
    manifest = json.loads((tmp_path / "corpus.jsonl.manifest.json").read_text())
    assert manifest["command"] == "synth"
    assert "qdtm_version" in manifest
    assert (tmp_path / "vec.txt").exists()


def test_synth_byte_deterministic(tmp_path):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    args = ["synth", "--topics", "4", "--vocab", "100", "--docs", "60",
            "--seed", "9", "--rare-prevalence", "0.05"]
    assert main(args + ["--out", str(a)]) == EXIT_OK
    assert main(args + ["--out", str(b)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()


def test_retrieve_to_stdout(small_corpus, capsys):
    assert main(["retrieve", "--corpus", str(small_corpus),
                 "--query", "w0000 w0001", "--top", "5"]) == EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    assert payload["query"] == "w0000 w0001"
    assert 0 < len(payload["documents"]) <= 5
    scores = [d["log_score"] for d in payload["documents"]]
    assert scores == sorted(scores, reverse=True)


def test_expand_kld(small_corpus, capsys):
    assert main(["expand", "--corpus", str(small_corpus),
                 "--query", "w0000", "--method", "kld", "--n", "5"]) == EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    assert len(payload["words"]) == 5
    assert all(w["score"] > 0 for w in payload["words"])


def test_missing_corpus_is_validation_error(tmp_path, capsys):
    rc = main(["retrieve", "--corpus", str(tmp_path / "nope.jsonl"),
               "--query", "x"])
    assert rc == EXIT_VALIDATION
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "validation"


def test_oov_and_query_is_validation_error(small_corpus, capsys):
    rc = main(["retrieve", "--corpus", str(small_corpus),
               "--query", "zzz qqq", "--mode", "and"])
    assert rc == EXIT_VALIDATION


def test_fit_rel_without_embeddings_rejected(small_corpus, tmp_path, capsys):
    rc = main(["fit", "--corpus", str(small_corpus), "--query", "w0000",
               "--method", "rel", "--out", str(tmp_path / "r.json")])
    assert rc == EXIT_VALIDATION
    assert not (tmp_path / "r.json").exists()


def test_fit_target_label_count_mismatch(small_corpus, tmp_path):
    rc = main(["fit", "--corpus", str(small_corpus), "--query", "w0000",
               "--target-label", "a", "--target-label", "b",
               "--out", str(tmp_path / "r.json")])
    assert rc == EXIT_VALIDATION


def test_config_overlay_and_unknown_key(small_corpus, tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"top": 3}))
    assert main(["--config", str(cfg), "retrieve", "--corpus",
                 str(small_corpus), "--query", "w0000"]) == EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    assert len(payload["documents"]) <= 3

    # explicit flag wins over config
    assert main(["--config", str(cfg), "retrieve", "--corpus",
                 str(small_corpus), "--query", "w0000", "--top", "1"]) == EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    assert len(payload["documents"]) == 1

    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"bogus_key": 1}))
    assert main(["--config", str(bad), "retrieve", "--corpus",
                 str(small_corpus), "--query", "w0000"]) == EXIT_VALIDATION


def test_fit_then_eval_smoke(small_corpus, tmp_path, capsys):
    out = tmp_path / "result.json"
    rc = main(["fit", "--corpus", str(small_corpus),
               "--query", "w0090 w0091", "--mode", "and",
               "--method", "kld", "--n", "5",
               "--iters1", "25", "--iters2", "15", "--seed", "3",
               "--target-label", "topic3",
               "--embeddings", str(tmp_path / "vec.txt"),
               "--out", str(out)])
    capsys.readouterr()
    assert rc == EXIT_OK
    result = json.loads(out.read_text())
    assert result["format"] == "qdtm-result-v1"
    assert result["queries"][0]["subtopics"]
    assert (tmp_path / "result.json.manifest.json").exists()

    rc = main(["eval", "--corpus", str(small_corpus),
               "--result", str(out),
               "--embeddings", str(tmp_path / "vec.txt")])
    assert rc == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    entry = report["queries"][0]
    assert entry["target_label"] == "topic3"
    assert entry["precision_at_k"] is not None
    assert entry["diversity"] is not None
    assert "npmi" in entry
