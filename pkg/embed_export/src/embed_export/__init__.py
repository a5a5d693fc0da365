"""Inference-only transformer embedding export in EMB1 format."""

from .export import (DEFAULT_MODEL, EmbedJob, encode_texts,
                     export_embeddings, load_encoder, mean_pool,
                     read_corpus_texts, write_embeddings)

__all__ = [
    "DEFAULT_MODEL",
    "EmbedJob",
    "encode_texts",
    "export_embeddings",
    "load_encoder",
    "mean_pool",
    "read_corpus_texts",
    "write_embeddings",
]

__version__ = "0.1.0"
