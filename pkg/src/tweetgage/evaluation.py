"""Stratified splits, classification metrics, and the ablation harness."""

from __future__ import annotations

import json
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .features import FeatureMatrix, prepare_features
from .model import ModelConfig, TrainConfig, TweetGageModel, fit_model
from .postgraph import PostGraph
from .util import derive_seed

REPORT_COLUMNS = ("Acc", "Prec", "Recall", "AUC_ROC", "AUC_PR", "F1")

# Table-5-shaped grid: (row label, phi mode, omega mode). The joint row
# reduces the standardized concatenation of both blocks with one PCA.
ABLATION_GRID = (
    ("none", "off", "off"),
    ("phi", "raw", "off"),
    ("omega", "off", "raw"),
    ("omega_pca", "off", "pca"),
    ("phi_pca+omega_pca", "pca", "pca"),
    ("phi+omega_pca", "raw", "pca"),
    ("phi+omega", "raw", "raw"),
)


@dataclass
class Split:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    seed: int
    fractions: tuple[float, float, float]

    @property
    def n_total(self) -> int:
        return self.train.size + self.val.size + self.test.size


@dataclass
class EvalReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    auc_roc: float
    auc_pr: float
    config: dict = field(default_factory=dict)
    runtime: float = 0.0

    def as_row(self) -> list[float]:
        """Metric values in report-column order."""
        return [self.accuracy, self.precision, self.recall,
                self.auc_roc, self.auc_pr, self.f1]


def make_split(labels: Sequence[int],
               fractions: tuple[float, float, float] = (0.70, 0.15, 0.15),
               seed: int = 0) -> Split:
    """Stratified train/val/test split with largest-remainder allocation."""
    y = np.asarray(labels, dtype=np.int64)
    fracs = np.asarray(fractions, dtype=np.float64)
    if fracs.size != 3 or abs(fracs.sum() - 1.0) > 1e-9 or np.any(fracs < 0):
        raise ValueError(f"fractions must be 3 non-negatives summing to 1, "
                         f"got {fractions}")
    rng = np.random.default_rng(seed)
    parts: list[list[np.ndarray]] = [[], [], []]
    for cls in np.unique(y):
        idx = np.flatnonzero(y == cls)
        if idx.size < 3:
            raise ValueError(f"class {cls} has only {idx.size} members; "
                             "need at least 3")
        shuffled = idx[rng.permutation(idx.size)]
        counts = _largest_remainder(idx.size, fracs)
        offset = 0
        for part, count in enumerate(counts):
            parts[part].append(shuffled[offset:offset + count])
            offset += count
    train, val, test = (np.sort(np.concatenate(p)) for p in parts)
    return Split(train, val, test, seed, tuple(float(f) for f in fracs))


def _largest_remainder(n: int, fracs: np.ndarray) -> np.ndarray:
    exact = n * fracs
    base = np.floor(exact).astype(np.int64)
    rem = exact - base
    for k in np.argsort(-rem, kind="stable")[: n - base.sum()]:
        base[k] += 1
    return base


def write_split(path: str | Path, split: Split) -> None:
    doc = {
        "seed": split.seed,
        "fractions": list(split.fractions),
        "train": split.train.tolist(),
        "val": split.val.tolist(),
        "test": split.test.tolist(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")


def read_split(path: str | Path) -> Split:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return Split(np.asarray(doc["train"], dtype=np.int64),
                 np.asarray(doc["val"], dtype=np.int64),
                 np.asarray(doc["test"], dtype=np.int64),
                 int(doc["seed"]), tuple(doc["fractions"]))


def classification_metrics(prob: Sequence[float], labels: Sequence[int],
                           threshold: float = 0.5,
                           positive_only: bool = False
                           ) -> tuple[float, float, float, float]:
    """(accuracy, precision, recall, f1) at a probability threshold.

    Precision/recall are macro-averaged over both classes by default; F1 is
    the harmonic mean of the reported precision and recall. Zero-denominator
    class terms are defined as 0 and flagged with a warning.
    """
    p = np.asarray(prob, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if p.shape != y.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {y.shape}")
    if np.any((p < 0) | (p > 1)):
        raise ValueError("probabilities must lie in [0, 1]")
    pred = (p >= threshold).astype(np.int64)
    accuracy = float(np.mean(pred == y))
    per_prec = []
    per_rec = []
    for cls in (0, 1):
        tp = int(np.sum((pred == cls) & (y == cls)))
        n_pred = int(np.sum(pred == cls))
        n_true = int(np.sum(y == cls))
        if n_pred == 0:
            warnings.warn(f"no predictions for class {cls}; precision set to 0")
            per_prec.append(0.0)
        else:
            per_prec.append(tp / n_pred)
        if n_true == 0:
            warnings.warn(f"no true members of class {cls}; recall set to 0")
            per_rec.append(0.0)
        else:
            per_rec.append(tp / n_true)
    if positive_only:
        precision, recall = per_prec[1], per_rec[1]
    else:
        precision = float(np.mean(per_prec))
        recall = float(np.mean(per_rec))
    denom = precision + recall
    f1 = 2.0 * precision * recall / denom if denom > 0 else 0.0
    return accuracy, precision, recall, f1


def _average_ranks(x: np.ndarray) -> np.ndarray:
    srt = np.sort(x)
    left = np.searchsorted(srt, x, side="left")
    right = np.searchsorted(srt, x, side="right")
    return 0.5 * (left + 1 + right)


def auc_roc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Probability that a random positive outscores a random negative.

    Mann-Whitney rank formulation; ties contribute one half.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    n_pos = int(np.sum(y == 1))
    n_neg = int(np.sum(y == 0))
    if n_pos == 0 or n_neg == 0:
        raise ValueError("auc_roc needs both classes present")
    ranks = _average_ranks(s)
    rank_sum = float(ranks[y == 1].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def auc_pr(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Average precision with step interpolation over distinct thresholds."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    n_pos = int(np.sum(y == 1))
    if n_pos == 0:
        raise ValueError("auc_pr needs at least one positive")
    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    y_sorted = y[order]
    tp = np.cumsum(y_sorted == 1)
    k = np.arange(1, s.size + 1)
    # threshold points sit at the last element of each tie group
    last = np.flatnonzero(np.r_[s_sorted[1:] != s_sorted[:-1], True])
    precision = tp[last] / k[last]
    recall = tp[last] / n_pos
    prev_recall = np.r_[0.0, recall[:-1]]
    return float(np.sum((recall - prev_recall) * precision))


def evaluate_scores(scores: Sequence[float], labels: Sequence[int],
                    threshold: float = 0.5, positive_only: bool = False,
                    config: dict | None = None) -> EvalReport:
    """Bundle all six metrics for one score vector."""
    acc, prec, rec, f1 = classification_metrics(scores, labels, threshold,
                                                positive_only)
    return EvalReport(acc, prec, rec, f1,
                      auc_roc(scores, labels), auc_pr(scores, labels),
                      config=dict(config or {}))


def write_report(path: str | Path, rows: Sequence[tuple[str, EvalReport]]) -> None:
    """CSV report, one labeled row per configuration."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("config," + ",".join(REPORT_COLUMNS) + "\n")
        for name, report in rows:
            cells = ",".join(repr(v) for v in report.as_row())
            fh.write(f"{name},{cells}\n")


def train_and_evaluate(features: np.ndarray, labels: np.ndarray,
                       graph: PostGraph, split: Split, seed: int,
                       hidden: int = 64, n_layers: int = 2, lr: float = 0.1,
                       batch_size: int = 256, epochs: int = 200,
                       plateau_patience: int = 5, early_patience: int = 10,
                       weighted_agg: bool = False,
                       config_echo: dict | None = None
                       ) -> tuple[TweetGageModel, EvalReport, list]:
    """Train one TweetGage model and score it on the test split."""
    t0 = time.perf_counter()
    model = TweetGageModel(ModelConfig(
        n_features=features.shape[1], hidden=hidden, n_layers=n_layers,
        lr=lr, batch_size=batch_size, weighted_agg=weighted_agg, seed=seed))
    cfg = TrainConfig(lr=lr, batch_size=batch_size, epochs=epochs,
                      plateau_patience=plateau_patience,
                      early_patience=early_patience, seed=seed)
    history = fit_model(model, features, labels, split.train, split.val, cfg,
                        graph=graph)
    prob = model.predict(features, graph)[split.test]
    report = evaluate_scores(prob, np.asarray(labels)[split.test],
                             config=config_echo)
    report.runtime = time.perf_counter() - t0
    return model, report, history


def run_ablation(phi: FeatureMatrix, emb: np.ndarray, graph: PostGraph,
                 labels: np.ndarray, split: Split, seed: int,
                 pca_k: int = 48, hidden: int = 64, n_layers: int = 2,
                 lr: float = 0.1, batch_size: int = 256, epochs: int = 200,
                 plateau_patience: int = 5, early_patience: int = 10,
                 zscore: bool = True) -> list[tuple[str, EvalReport]]:
    """Run the 7-row feature-set grid on a shared split.

    Each row trains a fresh model with a sub-seed derived from the row
    label, so rows are independent yet reproducible.
    """
    phi_values = phi.values if isinstance(phi, FeatureMatrix) else phi
    rows: list[tuple[str, EvalReport]] = []
    for name, phi_mode, emb_mode in ABLATION_GRID:
        feats = prepare_features(phi_values, emb, phi_mode=phi_mode,
                                 emb_mode=emb_mode, pca_k=pca_k,
                                 fit_idx=split.train, zscore=zscore)
        row_seed = derive_seed(seed, f"ablation:{name}")
        _, report, _ = train_and_evaluate(
            feats, labels, graph, split, row_seed, hidden=hidden,
            n_layers=n_layers, lr=lr, batch_size=batch_size, epochs=epochs,
            plateau_patience=plateau_patience, early_patience=early_patience,
            config_echo={"phi": phi_mode, "omega": emb_mode})
        rows.append((name, report))
    return rows
