"""embed-export against a small locally constructed BERT encoder."""

import json
import struct

import numpy as np
import pytest
import torch
from transformers import BertConfig, BertModel, BertTokenizer

from embed_export import (EmbedJob, encode_texts, export_embeddings,
                          load_encoder, mean_pool, read_corpus_texts)
from embed_export.cli import main

VOCAB = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
         "hello", "world", "graph", "posts", "engage",
         "alpha", "beta", "gamma", "delta", "text"]


@pytest.fixture(scope="module")
def tiny_bert(tmp_path_factory):
    """Random-weight 2-layer 768-dim BERT saved to a local directory."""
    d = tmp_path_factory.mktemp("tinybert")
    (d / "vocab.txt").write_text("\n".join(VOCAB) + "\n")
    torch.manual_seed(0)
    cfg = BertConfig(vocab_size=len(VOCAB), hidden_size=768,
                     num_hidden_layers=2, num_attention_heads=4,
                     intermediate_size=128, max_position_embeddings=64)
    BertModel(cfg).save_pretrained(d)
    BertTokenizer(str(d / "vocab.txt")).save_pretrained(d)
    return str(d)


def _record(i, text, lang="en"):
    return {"id": f"p{i}", "timestamp": 1635724800 + i, "lang": lang,
            "text": text, "author": f"u{i}", "favorite_count": 0,
            "retweet_count": 0, "hashtags": "x"}


def _write_corpus(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r) + "\n")


def _read_emb1(path):
    with open(path, "rb") as fh:
        magic, n, dim = struct.unpack("<4sII", fh.read(12))
        assert magic == b"EMB1"
        data = np.frombuffer(fh.read(), dtype="<f4")
    return data.reshape(n, dim)


def test_corpus_filter_mirrors_ingest(tmp_path):
    path = tmp_path / "posts.jsonl"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(_record(0, "hello world")) + "\n")
        fh.write("this is not json\n")
        fh.write(json.dumps(_record(1, "dropped", lang="de")) + "\n")
        fh.write(json.dumps({"id": "p9", "text": "no timestamp"}) + "\n")
        fh.write("\n")
        fh.write(json.dumps(_record(2, "graph posts")) + "\n")
    assert read_corpus_texts(path) == ["hello world", "graph posts"]


def test_export_header_rows_and_meta(tmp_path, tiny_bert):
    corpus = tmp_path / "posts.jsonl"
    _write_corpus(corpus, [
        _record(0, "hello world"),
        _record(1, "alpha beta gamma"),
        _record(2, "hello world"),      # duplicate of row 0
        _record(3, ""),                 # empty -> zero vector
        _record(4, "engage graph"),
    ])
    out = tmp_path / "emb.emb1"
    job = EmbedJob(str(corpus), str(out), model_name=tiny_bert, batch_size=2)
    assert export_embeddings(job) == 5
    mat = _read_emb1(out)
    assert mat.shape == (5, 768)
    assert np.array_equal(mat[0], mat[2])
    assert np.all(mat[3] == 0.0)
    assert np.any(mat[0] != 0.0)
    meta = json.loads((tmp_path / "emb.meta").read_text())
    assert meta == {"model": tiny_bert, "pooling": "mean", "dim": 768,
                    "rows": 5}


def test_rerun_is_byte_identical(tmp_path, tiny_bert):
    corpus = tmp_path / "posts.jsonl"
    _write_corpus(corpus, [_record(i, t) for i, t in enumerate(
        ["hello", "alpha beta", "graph text posts", "hello"])])
    outs = []
    for name in ("a.emb1", "b.emb1"):
        out = tmp_path / name
        export_embeddings(EmbedJob(str(corpus), str(out),
                                   model_name=tiny_bert, batch_size=3))
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_duplicates_identical_across_batches(tmp_path, tiny_bert):
    # same text surrounded by different neighbors in batch-size-1 runs
    corpus = tmp_path / "posts.jsonl"
    texts = ["alpha", "hello world", "beta gamma delta", "hello world"]
    _write_corpus(corpus, [_record(i, t) for i, t in enumerate(texts)])
    out = tmp_path / "emb.emb1"
    export_embeddings(EmbedJob(str(corpus), str(out), model_name=tiny_bert,
                               batch_size=1))
    mat = _read_emb1(out)
    assert np.array_equal(mat[1], mat[3])


def test_mean_pool_matches_manual_loop(tiny_bert):
    torch.manual_seed(1)
    hidden = torch.randn(2, 4, 3, dtype=torch.float64)
    mask = torch.tensor([[1, 1, 1, 0], [1, 1, 0, 0]])
    pooled = mean_pool(hidden, mask)
    for b in range(2):
        kept = [hidden[b, t] for t in range(4) if mask[b, t]]
        manual = torch.stack(kept).mean(dim=0)
        assert torch.allclose(pooled[b], manual, atol=1e-12)


def test_encode_empty_text_warns(tmp_path, tiny_bert, caplog):
    tokenizer, model = load_encoder(tiny_bert)
    with caplog.at_level("WARNING", logger="embed_export.export"):
        mat = encode_texts(["hello", "   "], tokenizer, model)
    assert "zero vector" in caplog.text
    assert mat.shape == (2, 768)
    assert np.all(mat[1] == 0.0)


def test_job_validation(tmp_path):
    with pytest.raises(FileNotFoundError):
        EmbedJob(str(tmp_path / "missing.jsonl"), "out.emb1").validate()
    job = EmbedJob(__file__, "out.emb1", batch_size=0)
    with pytest.raises(ValueError, match="batch size"):
        job.validate()


def test_export_rejects_empty_corpus(tmp_path, tiny_bert):
    corpus = tmp_path / "posts.jsonl"
    _write_corpus(corpus, [_record(0, "nur deutsch", lang="de")])
    with pytest.raises(ValueError, match="no usable records"):
        export_embeddings(EmbedJob(str(corpus), str(tmp_path / "o.emb1"),
                                   model_name=tiny_bert))


def test_cli_end_to_end(tmp_path, tiny_bert):
    corpus = tmp_path / "posts.jsonl"
    _write_corpus(corpus, [_record(0, "hello graph"),
                           _record(1, "alpha text")])
    out = tmp_path / "emb.emb1"
    rc = main(["--input", str(corpus), "--out", str(out),
               "--model", tiny_bert, "--batch", "8"])
    assert rc == 0
    assert _read_emb1(out).shape == (2, 768)
    assert (tmp_path / "emb.meta").exists()


def test_cli_model_load_failure(tmp_path):
    corpus = tmp_path / "posts.jsonl"
    _write_corpus(corpus, [_record(0, "hello")])
    rc = main(["--input", str(corpus), "--out", str(tmp_path / "o.emb1"),
               "--model", str(tmp_path / "no-such-model")])
    assert rc == 1
