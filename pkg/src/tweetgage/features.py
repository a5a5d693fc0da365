"""Node feature assembly: the 9 post/user features, text embeddings
(EMB1 file or hashing fallback), z-scoring, and PCA reduction.

Rows of every matrix align 1:1 with graph node indices (= corpus rows).
Standardization and PCA are always fitted on a caller-supplied row subset
(the training split) and applied to all rows, so held-out rows never leak
into the fitted statistics.
"""

from __future__ import annotations

import hashlib
import re
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .ingest import TweetRecord

EMB_MAGIC = b"EMB1"

# Fixed column order of the per-post feature block.
PHI_COLUMNS = (
    "followers", "n_tweets", "following", "length_of_post",
    "n_hashtags", "n_mentions", "emojis", "official_source", "has_media",
)

_WORD_RE = re.compile(r"\w+")


@dataclass(frozen=True, slots=True)
class FeatureMatrix:
    """Dense row-per-post matrix with column names."""

    values: np.ndarray
    names: tuple[str, ...]

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True, slots=True)
class PcaModel:
    """Fitted PCA: column means, components (dim x k), variance ratios."""

    mean: np.ndarray
    components: np.ndarray
    explained_variance_ratio: np.ndarray


def assemble_phi(records: Sequence[TweetRecord]) -> FeatureMatrix:
    """9-column feature block in the fixed PHI_COLUMNS order."""
    values = np.array(
        [
            [
                r.followers, r.n_tweets, r.following, r.length_of_post,
                r.n_hashtags, r.n_mentions, r.emojis,
                int(r.official_source), int(r.has_media),
            ]
            for r in records
        ],
        dtype=np.float64,
    ).reshape(len(records), len(PHI_COLUMNS))
    return FeatureMatrix(values=values, names=PHI_COLUMNS)


def write_phi_csv(matrix: FeatureMatrix, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(matrix.names) + "\n")
        for row in matrix.values:
            fh.write(",".join(repr(v) if v != int(v) else str(int(v))
                              for v in row.tolist()) + "\n")


def read_phi_csv(path: str | Path) -> FeatureMatrix:
    with open(path, "r", encoding="utf-8") as fh:
        names = tuple(fh.readline().strip().split(","))
        values = np.array(
            [[float(v) for v in line.strip().split(",")] for line in fh if line.strip()],
            dtype=np.float64,
        )
    if values.size == 0:
        values = values.reshape(0, len(names))
    return FeatureMatrix(values=values, names=names)


def write_embeddings(matrix: np.ndarray, path: str | Path) -> None:
    """Write an EMB1 file (rows stored as little-endian 32-bit floats)."""
    arr = np.ascontiguousarray(matrix, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sII", EMB_MAGIC, arr.shape[0], arr.shape[1]))
        fh.write(arr.tobytes())


def load_embeddings(path: str | Path, expected_rows: int | None = None) -> np.ndarray:
    """Load an EMB1 file as float64; row i corresponds to post i.

    Raises ValueError on a bad magic, a truncated payload, or (when
    ``expected_rows`` is given) a row-count mismatch with the corpus.
    """
    with open(path, "rb") as fh:
        header = fh.read(12)
        if len(header) != 12:
            raise ValueError(f"{path}: truncated EMB1 header")
        magic, n_rows, dim = struct.unpack("<4sII", header)
        if magic != EMB_MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        payload = np.frombuffer(fh.read(), dtype="<f4")
    if payload.size != n_rows * dim:
        raise ValueError(
            f"{path}: expected {n_rows * dim} floats, found {payload.size}")
    if expected_rows is not None and n_rows != expected_rows:
        raise ValueError(
            f"{path}: row count mismatch: corpus has {expected_rows} posts, "
            f"file has {n_rows} rows")
    return payload.reshape(n_rows, dim).astype(np.float64)


def _hash_token(token: str, seed: int) -> int:
    key = struct.pack("<q", seed)
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8, key=key).digest()
    return int.from_bytes(digest, "little")


def fallback_embed(texts: Sequence[str], dim: int, seed: int) -> np.ndarray:
    """Deterministic feature-hashing embedding of word unigrams.

    Each token lands in ``hash % dim`` with a +/-1 sign from the hash; rows
    are L2-normalized; empty text gives a zero row. Pure in (texts, dim,
    seed) across runs and platforms.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    out = np.zeros((len(texts), dim), dtype=np.float64)
    for i, text in enumerate(texts):
        row = out[i]
        for token in _WORD_RE.findall(text.lower()):
            h = _hash_token(token, seed)
            sign = 1.0 if (h >> 63) & 1 == 0 else -1.0
            row[(h & 0x7FFFFFFFFFFFFFFF) % dim] += sign
        norm = np.linalg.norm(row)
        if norm > 0.0:
            row /= norm
    return out


def standardize(matrix: np.ndarray, stats_from: Sequence[int]
                ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Z-score columns using mean/std (population) of the given row subset.

    Zero-variance columns are centered but not scaled. Returns
    (transformed all-rows matrix, means, stds).
    """
    idx = np.asarray(stats_from, dtype=np.int64)
    if idx.size == 0:
        raise ValueError("stats_from must be non-empty")
    sub = matrix[idx]
    means = sub.mean(axis=0)
    stds = sub.std(axis=0)
    safe = np.where(stds == 0.0, 1.0, stds)
    return (matrix - means) / safe, means, stds


def pca_fit_transform(matrix: np.ndarray, k: int, stats_from: Sequence[int]
                      ) -> tuple[PcaModel, np.ndarray]:
    """Fit PCA on a row subset; project all rows onto the top k components.

    Components come from an SVD of the centered subset, with a fixed sign
    convention (largest-magnitude loading positive) for reproducibility.
    """
    n_cols = matrix.shape[1]
    if not 1 <= k <= n_cols:
        raise ValueError(f"k must be in [1, {n_cols}], got {k}")
    idx = np.asarray(stats_from, dtype=np.int64)
    if idx.size < 2:
        raise ValueError("stats_from must contain at least 2 rows")
    sub = matrix[idx]
    mean = sub.mean(axis=0)
    centered = sub - mean
    _, svals, vt = np.linalg.svd(centered, full_matrices=False)
    components = vt[:k].T.copy()
    for j in range(k):
        pivot = np.argmax(np.abs(components[:, j]))
        if components[pivot, j] < 0:
            components[:, j] = -components[:, j]
    var = svals**2
    total = var.sum()
    ratios = var[:k] / total if total > 0 else np.zeros(k)
    model = PcaModel(mean=mean, components=components,
                     explained_variance_ratio=ratios)
    return model, pca_transform(model, matrix)


def pca_transform(model: PcaModel, matrix: np.ndarray) -> np.ndarray:
    return (matrix - model.mean) @ model.components


def concat_features(phi: np.ndarray | None, emb: np.ndarray | None,
                    use_phi: bool, use_emb: bool) -> np.ndarray:
    """Horizontal concatenation of the enabled blocks, (phi, emb) order.

    With both flags off the result is a single constant-1 column, the
    degenerate "no node features" input for graph-only runs.
    """
    blocks = []
    if use_phi:
        if phi is None:
            raise ValueError("use_phi requires a phi matrix")
        blocks.append(phi)
    if use_emb:
        if emb is None:
            raise ValueError("use_emb requires an embedding matrix")
        blocks.append(emb)
    if not blocks:
        n = phi.shape[0] if phi is not None else emb.shape[0]
        return np.ones((n, 1), dtype=np.float64)
    if len(blocks) == 2 and blocks[0].shape[0] != blocks[1].shape[0]:
        raise ValueError(
            f"row mismatch: phi has {blocks[0].shape[0]}, emb has {blocks[1].shape[0]}")
    return np.ascontiguousarray(np.hstack(blocks))


def prepare_features(phi: np.ndarray | None, emb: np.ndarray | None, *,
                     phi_mode: str, emb_mode: str, pca_k: int = 48,
                     fit_idx: Sequence[int], zscore: bool = True) -> np.ndarray:
    """Build one design matrix for a feature-ablation configuration.

    ``phi_mode`` / ``emb_mode`` are "off", "raw", or "pca". When both are
    "pca" the two blocks are reduced jointly (one PCA over the standardized
    concatenation); a lone "pca" reduces just that block. All fitting uses
    ``fit_idx`` rows only.
    """
    for name, mode in (("phi_mode", phi_mode), ("emb_mode", emb_mode)):
        if mode not in ("off", "raw", "pca"):
            raise ValueError(f"{name} must be off|raw|pca, got {mode!r}")
    use_phi = phi_mode != "off"
    use_emb = emb_mode != "off"
    if not use_phi and not use_emb:
        return concat_features(phi, emb, False, False)

    def block(matrix: np.ndarray) -> np.ndarray:
        return standardize(matrix, fit_idx)[0] if zscore else matrix

    if phi_mode == "pca" and emb_mode == "pca":
        joint = block(concat_features(phi, emb, True, True))
        _, reduced = pca_fit_transform(joint, pca_k, fit_idx)
        return reduced
    parts = []
    if use_phi:
        x = block(phi)
        if phi_mode == "pca":
            x = pca_fit_transform(x, pca_k, fit_idx)[1]
        parts.append(x)
    if use_emb:
        x = block(emb)
        if emb_mode == "pca":
            x = pca_fit_transform(x, pca_k, fit_idx)[1]
        parts.append(x)
    if len(parts) == 1:
        return np.ascontiguousarray(parts[0])
    return concat_features(parts[0], parts[1], True, True)


def prepare_from_files(phi_path: str | Path, emb_path: str | Path, *,
                       phi_mode: str, emb_mode: str, pca_k: int = 48,
                       fit_idx: Sequence[int], zscore: bool = True) -> np.ndarray:
    """prepare_features over on-disk artifacts, with row counts checked."""
    phi = read_phi_csv(phi_path)
    emb = load_embeddings(emb_path, expected_rows=phi.n_rows)
    return prepare_features(phi.values, emb, phi_mode=phi_mode,
                            emb_mode=emb_mode, pca_k=pca_k, fit_idx=fit_idx,
                            zscore=zscore)
