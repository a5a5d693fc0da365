"""Encode post texts with a pre-trained transformer into an EMB1 matrix.

Reads the same line-delimited corpus the graph pipeline uses, applies the
same keep rules as its ingest stage (malformed lines skipped, non-English
records dropped), and writes one pooled vector per kept record in corpus
order. Pooling is a masked mean over token states; a sidecar file records
model name, pooling and dimension so results stay attributable.

Each distinct text is encoded exactly once and the result is scattered to
every row that carries it. Besides saving compute, this guarantees that
duplicate texts produce bit-identical rows: encoding the same text in
batches of different padded lengths can shift float summation order.
"""

from __future__ import annotations

import json
import logging
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

DEFAULT_MODEL = "bert-base-uncased"
EMB_MAGIC = b"EMB1"
POOLING = "mean"


@dataclass
class EmbedJob:
    input_path: str
    output_path: str
    model_name: str = DEFAULT_MODEL
    batch_size: int = 64
    device: str = "cpu"

    def validate(self) -> None:
        if self.batch_size < 1:
            raise ValueError("batch size must be at least 1")
        if not Path(self.input_path).exists():
            raise FileNotFoundError(f"input not found: {self.input_path}")


def read_corpus_texts(path: str | Path) -> list[str]:
    """Texts of the records the primary ingest stage would keep.

    A line is malformed when it is not a JSON object or lacks id or
    timestamp; records whose lang tag is not "en" are dropped. Both rules
    mirror the ingest stage so row counts line up with its output.
    """
    texts: list[str] = []
    skipped = 0
    dropped = 0
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError:
                skipped += 1
                continue
            if not isinstance(doc, dict) or "id" not in doc \
                    or "timestamp" not in doc:
                skipped += 1
                continue
            if doc.get("lang") != "en":
                dropped += 1
                continue
            texts.append(str(doc.get("text", "")))
    if skipped or dropped:
        logger.info("%s: kept %d records, skipped %d malformed, dropped %d "
                    "non-English", path, len(texts), skipped, dropped)
    return texts


def load_encoder(model_name: str, device: str = "cpu"):
    """Tokenizer and encoder in inference mode."""
    from transformers import AutoModel, AutoTokenizer

    tokenizer = AutoTokenizer.from_pretrained(model_name)
    model = AutoModel.from_pretrained(model_name)
    model.eval()
    model.to(device)
    return tokenizer, model


def mean_pool(hidden, attention_mask):
    """Average token states over positions the attention mask keeps."""
    import torch

    mask = attention_mask.unsqueeze(-1).to(hidden.dtype)
    summed = (hidden * mask).sum(dim=1)
    counts = mask.sum(dim=1).clamp(min=1.0)
    return summed / counts


def encode_texts(texts: list[str], tokenizer, model, batch_size: int = 64,
                 device: str = "cpu") -> np.ndarray:
    """One pooled float32 vector per text; empty texts become zero rows."""
    import torch

    dim = int(model.config.hidden_size)
    out = np.zeros((len(texts), dim), dtype=np.float32)
    order: dict[str, list[int]] = {}
    n_empty = 0
    for i, text in enumerate(texts):
        if not text.strip():
            n_empty += 1
            continue
        order.setdefault(text, []).append(i)
    if n_empty:
        logger.warning("%d empty texts encoded as zero vectors", n_empty)
    unique = list(order)
    with torch.no_grad():
        for start in range(0, len(unique), batch_size):
            chunk = unique[start:start + batch_size]
            enc = tokenizer(chunk, padding=True, truncation=True,
                            return_tensors="pt")
            enc = {k: v.to(device) for k, v in enc.items()}
            hidden = model(**enc).last_hidden_state
            pooled = mean_pool(hidden, enc["attention_mask"])
            block = pooled.cpu().numpy().astype(np.float32)
            for row, text in zip(block, chunk):
                for i in order[text]:
                    out[i] = row
    return out


def write_embeddings(matrix: np.ndarray, path: str | Path) -> None:
    """EMB1: magic, u32 rows, u32 dim, little-endian float32 rows."""
    matrix = np.ascontiguousarray(matrix, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sII", EMB_MAGIC, matrix.shape[0],
                             matrix.shape[1]))
        fh.write(matrix.tobytes())


def meta_path(output_path: str | Path) -> Path:
    return Path(output_path).with_suffix(".meta")


def write_meta(job: EmbedJob, dim: int, n_rows: int) -> None:
    doc = {
        "model": job.model_name,
        "pooling": POOLING,
        "dim": dim,
        "rows": n_rows,
    }
    with open(meta_path(job.output_path), "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")


def export_embeddings(job: EmbedJob) -> int:
    """Run the job end to end; returns the number of rows written."""
    job.validate()
    texts = read_corpus_texts(job.input_path)
    if not texts:
        raise ValueError(f"no usable records in {job.input_path}")
    tokenizer, model = load_encoder(job.model_name, job.device)
    matrix = encode_texts(texts, tokenizer, model,
                          batch_size=job.batch_size, device=job.device)
    write_embeddings(matrix, job.output_path)
    write_meta(job, matrix.shape[1], matrix.shape[0])
    logger.info("wrote %d x %d embeddings to %s", matrix.shape[0],
                matrix.shape[1], job.output_path)
    return matrix.shape[0]
