"""GraphSAGE-style engagement classifier and the shared training loop.

Each SAGE step sums neighbor representations, concatenates with the node's
own vector and applies a dense + GELU transform. Message passing always
runs over the full graph; the configured batch size only controls which
training nodes contribute to the loss of a given optimizer step.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .nn import (Adam, Dense, EarlyStopping, Gelu, PlateauScheduler,
                 bce_with_logits, load_checkpoint, save_checkpoint, sigmoid)
from .postgraph import PostGraph

logger = logging.getLogger(__name__)


@dataclass
class ModelConfig:
    n_features: int
    hidden: int = 64
    n_layers: int = 2
    head_hidden: int = 16
    lr: float = 0.1
    batch_size: int = 256
    weighted_agg: bool = False
    seed: int = 0


@dataclass
class TrainConfig:
    lr: float
    batch_size: int = 256
    epochs: int = 200
    plateau_patience: int = 5
    early_patience: int = 10
    min_lr: float = 1e-6
    min_delta: float = 1e-4
    seed: int = 0
    pos_weight: float | None = None


@dataclass
class HistoryRow:
    epoch: int
    train_loss: float
    val_loss: float
    val_acc: float
    lr: float


class SageLayer:
    """Sum-aggregate neighbors, concat with self, dense + GELU."""

    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator):
        self.dense = Dense(2 * d_in, d_out, rng)
        self.act = Gelu()
        self._h: np.ndarray | None = None

    def forward(self, h: np.ndarray, agg) -> np.ndarray:
        self._h = h
        a = agg @ h
        z = np.concatenate([h, a], axis=1)
        return self.act.forward(self.dense.forward(z))

    def backward(self, d_out: np.ndarray, agg) -> np.ndarray:
        dz = self.dense.backward(self.act.backward(d_out))
        d_in = self.dense.W.shape[0] // 2
        d_self = dz[:, :d_in]
        d_aggr = dz[:, d_in:]
        # agg is symmetric, so the adjoint of (agg @ .) is agg @ . again
        return d_self + agg @ d_aggr

    def zero_grad(self) -> None:
        self.dense.zero_grad()

    def params(self) -> list[np.ndarray]:
        return self.dense.params()

    def grads(self) -> list[np.ndarray]:
        return self.dense.grads()


class TweetGageModel:
    """Stack of SAGE layers followed by a dense 16 + GELU head and a logit."""

    uses_graph = True

    def __init__(self, config: ModelConfig):
        if config.n_layers < 1:
            raise ValueError("need at least one SAGE layer")
        self.config = config
        rng = np.random.default_rng(config.seed)
        self.sage_layers: list[SageLayer] = []
        d_in = config.n_features
        for _ in range(config.n_layers):
            self.sage_layers.append(SageLayer(d_in, config.hidden, rng))
            d_in = config.hidden
        self.head = Dense(config.hidden, config.head_hidden, rng)
        self.head_act = Gelu()
        self.out = Dense(config.head_hidden, 1, rng)
        logger.info("TweetGage model: %d parameters", self.n_params)

    @property
    def n_params(self) -> int:
        return sum(p.size for p in self.params())

    def forward(self, x: np.ndarray, graph: PostGraph | None = None) -> np.ndarray:
        if graph is None:
            raise ValueError("TweetGageModel.forward requires a graph")
        if x.shape[0] != graph.n_nodes:
            raise ValueError(
                f"feature rows ({x.shape[0]}) != graph nodes ({graph.n_nodes})")
        agg = graph.agg_matrix(self.config.weighted_agg)
        h = np.asarray(x, dtype=np.float64)
        for layer in self.sage_layers:
            h = layer.forward(h, agg)
        h = self.head_act.forward(self.head.forward(h))
        return self.out.forward(h)[:, 0]

    def backward(self, d_logits: np.ndarray, graph: PostGraph | None = None) -> None:
        agg = graph.agg_matrix(self.config.weighted_agg)
        d = self.out.backward(np.asarray(d_logits, dtype=np.float64).reshape(-1, 1))
        d = self.head.backward(self.head_act.backward(d))
        for layer in reversed(self.sage_layers):
            d = layer.backward(d, agg)

    def predict(self, x: np.ndarray, graph: PostGraph | None = None) -> np.ndarray:
        return sigmoid(self.forward(x, graph))

    def zero_grad(self) -> None:
        for layer in self.sage_layers:
            layer.zero_grad()
        self.head.zero_grad()
        self.out.zero_grad()

    def params(self) -> list[np.ndarray]:
        out: list[np.ndarray] = []
        for layer in self.sage_layers:
            out.extend(layer.params())
        out.extend(self.head.params())
        out.extend(self.out.params())
        return out

    def grads(self) -> list[np.ndarray]:
        out: list[np.ndarray] = []
        for layer in self.sage_layers:
            out.extend(layer.grads())
        out.extend(self.head.grads())
        out.extend(self.out.grads())
        return out


def fit_model(model, x: np.ndarray, labels: np.ndarray, train_idx: Sequence[int],
              val_idx: Sequence[int], cfg: TrainConfig,
              graph: PostGraph | None = None) -> list[HistoryRow]:
    """Train with Adam + plateau scheduling + early stopping.

    Works for both graph models (full-graph forward, loss restricted to the
    minibatch) and plain row-wise models (forward on the batch rows only).
    Restores the best-validation parameters before returning and raises if
    the loss goes non-finite, naming the epoch.
    """
    train_idx = np.asarray(train_idx, dtype=np.int64)
    val_idx = np.asarray(val_idx, dtype=np.int64)
    if train_idx.size == 0 or val_idx.size == 0:
        raise ValueError("train and val splits must both be non-empty")
    if np.intersect1d(train_idx, val_idx).size:
        raise ValueError("train and val splits overlap")
    y = np.asarray(labels, dtype=np.float64)
    rng = np.random.default_rng(cfg.seed)
    adam = Adam(cfg.lr)
    plateau = PlateauScheduler(cfg.lr, patience=cfg.plateau_patience,
                               min_lr=cfg.min_lr, min_delta=cfg.min_delta)
    # any strict val improvement resets the stopper; the 1e-4 threshold
    # applies only to the scheduler
    stopper = EarlyStopping(patience=cfg.early_patience)
    best_params = [p.copy() for p in model.params()]
    history: list[HistoryRow] = []

    for epoch in range(cfg.epochs):
        perm = train_idx[rng.permutation(train_idx.size)]
        seen = 0
        loss_sum = 0.0
        for start in range(0, perm.size, cfg.batch_size):
            batch = perm[start:start + cfg.batch_size]
            model.zero_grad()
            if model.uses_graph:
                logits = model.forward(x, graph)
                loss, g = bce_with_logits(logits[batch], y[batch], cfg.pos_weight)
                d_full = np.zeros(logits.size, dtype=np.float64)
                d_full[batch] = g
                model.backward(d_full, graph)
            else:
                logits = model.forward(x[batch])
                loss, g = bce_with_logits(logits, y[batch], cfg.pos_weight)
                model.backward(g)
            if not np.isfinite(loss):
                raise RuntimeError(f"training diverged at epoch {epoch} "
                                   "(non-finite loss)")
            adam.lr = plateau.lr
            adam.step(model.params(), model.grads())
            loss_sum += loss * batch.size
            seen += batch.size

        if model.uses_graph:
            val_logits = model.forward(x, graph)[val_idx]
        else:
            val_logits = model.forward(x[val_idx])
        val_loss, _ = bce_with_logits(val_logits, y[val_idx], cfg.pos_weight)
        if not np.isfinite(val_loss):
            raise RuntimeError(f"training diverged at epoch {epoch} "
                               "(non-finite validation loss)")
        val_acc = float(np.mean((sigmoid(val_logits) >= 0.5) == (y[val_idx] == 1.0)))
        history.append(HistoryRow(epoch, loss_sum / seen, val_loss, val_acc,
                                  plateau.lr))
        stop = stopper.update(val_loss, epoch)
        if stopper.best_epoch == epoch:
            best_params = [p.copy() for p in model.params()]
        plateau.step(val_loss)
        if stop:
            break

    for p, best in zip(model.params(), best_params):
        p[...] = best
    return history


def gradient_check(model, x: np.ndarray, labels: np.ndarray,
                   graph: PostGraph | None = None, h: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    Elements where both gradients are below 1e-8 in magnitude count as
    exact (dead paths through zeroed weights).
    """
    y = np.asarray(labels, dtype=np.float64)

    def loss_fn() -> float:
        if model.uses_graph:
            logits = model.forward(x, graph)
        else:
            logits = model.forward(x)
        loss, _ = bce_with_logits(logits, y)
        return loss

    model.zero_grad()
    if model.uses_graph:
        logits = model.forward(x, graph)
        _, g = bce_with_logits(logits, y)
        model.backward(g, graph)
    else:
        logits = model.forward(x)
        _, g = bce_with_logits(logits, y)
        model.backward(g)
    analytic = [arr.copy() for arr in model.grads()]

    worst = 0.0
    for p, ga in zip(model.params(), analytic):
        flat = p.reshape(-1)
        gflat = ga.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            lp = loss_fn()
            flat[i] = orig - h
            lm = loss_fn()
            flat[i] = orig
            fd = (lp - lm) / (2.0 * h)
            a = gflat[i]
            if abs(a) < 1e-8 and abs(fd) < 1e-8:
                continue
            err = abs(a - fd) / max(abs(a), abs(fd), 1e-6)
            if err > worst:
                worst = err
    return worst


def write_history(path: str | Path, rows: Sequence[HistoryRow]) -> None:
    """Per-epoch training trace as CSV; floats use repr for exactness."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("epoch,train_loss,val_loss,val_acc,lr\n")
        for r in rows:
            fh.write(f"{r.epoch},{r.train_loss!r},{r.val_loss!r},"
                     f"{r.val_acc!r},{r.lr!r}\n")


def save_model(path: str | Path, model, kind: str, meta: dict | None = None) -> None:
    """Write a TGM1 checkpoint plus a JSON sidecar describing the model."""
    path = Path(path)
    save_checkpoint(path, model.params())
    doc = {"kind": kind, "config": _config_dict(model)}
    if meta:
        doc.update(meta)
    with open(str(path) + ".meta", "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _config_dict(model) -> dict:
    return asdict(model.config)


def load_tweetgage(path: str | Path) -> TweetGageModel:
    """Rebuild a TweetGage model from checkpoint + sidecar metadata."""
    path = Path(path)
    with open(str(path) + ".meta", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("kind") != "tweetgage":
        raise ValueError(f"{path}: checkpoint kind {doc.get('kind')!r}, "
                         "expected 'tweetgage'")
    model = TweetGageModel(ModelConfig(**doc["config"]))
    _load_params(model, path)
    return model


def _load_params(model, path: Path) -> None:
    tensors = load_checkpoint(path)
    params = model.params()
    if len(tensors) != len(params):
        raise ValueError(f"{path}: {len(tensors)} tensors, model expects "
                         f"{len(params)}")
    for p, t in zip(params, tensors):
        src = t.reshape(p.shape) if t.size == p.size else None
        if src is None:
            raise ValueError(f"{path}: tensor size {t.size} does not fit "
                             f"parameter shape {p.shape}")
        p[...] = src
