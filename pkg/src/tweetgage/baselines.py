"""Non-graph baselines: MLP, 1-D CNN over embeddings, linear probe.

All three expose the same forward/backward/params surface as the graph
model, so the shared training loop and gradient checker drive them
unchanged. The linear probe stands in for encoder fine-tuning: it trains
a single dense layer over frozen embedding vectors.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .evaluation import EvalReport, Split, evaluate_scores
from .model import TrainConfig, fit_model, load_tweetgage, save_model
from .nn import Conv1d, Dense, Gelu, load_checkpoint, sigmoid


@dataclass
class MlpConfig:
    n_features: int
    hidden: int = 32
    lr: float = 1e-2
    seed: int = 0


class MlpModel:
    """Two 32-unit dense layers with GELU, then a logit."""

    uses_graph = False

    def __init__(self, config: MlpConfig):
        self.config = config
        rng = np.random.default_rng(config.seed)
        self.l1 = Dense(config.n_features, config.hidden, rng)
        self.a1 = Gelu()
        self.l2 = Dense(config.hidden, config.hidden, rng)
        self.a2 = Gelu()
        self.out = Dense(config.hidden, 1, rng)

    def forward(self, x: np.ndarray, graph=None) -> np.ndarray:
        h = self.a1.forward(self.l1.forward(np.asarray(x, dtype=np.float64)))
        h = self.a2.forward(self.l2.forward(h))
        return self.out.forward(h)[:, 0]

    def backward(self, d_logits: np.ndarray, graph=None) -> None:
        d = self.out.backward(np.asarray(d_logits).reshape(-1, 1))
        d = self.l2.backward(self.a2.backward(d))
        self.l1.backward(self.a1.backward(d))

    def predict(self, x: np.ndarray, graph=None) -> np.ndarray:
        return sigmoid(self.forward(x))

    def zero_grad(self) -> None:
        for layer in (self.l1, self.l2, self.out):
            layer.zero_grad()

    def params(self) -> list[np.ndarray]:
        return self.l1.params() + self.l2.params() + self.out.params()

    def grads(self) -> list[np.ndarray]:
        return self.l1.grads() + self.l2.grads() + self.out.grads()


@dataclass
class CnnConfig:
    dim: int
    channels: tuple[int, int] = (8, 16)
    kernel: int = 3
    lr: float = 0.1
    seed: int = 0


class Cnn1dModel:
    """Two valid-padding 1-D convolutions over the embedding axis."""

    uses_graph = False

    def __init__(self, config: CnnConfig):
        k = config.kernel
        min_dim = 2 * (k - 1) + 1
        if config.dim < min_dim:
            raise ValueError(f"embedding dim {config.dim} too short for two "
                             f"kernel-{k} convolutions (need >= {min_dim})")
        self.config = config
        rng = np.random.default_rng(config.seed)
        c1, c2 = config.channels
        self.conv1 = Conv1d(1, c1, k, rng)
        self.a1 = Gelu()
        self.conv2 = Conv1d(c1, c2, k, rng)
        self.a2 = Gelu()
        flat = (config.dim - 2 * (k - 1)) * c2
        self.out = Dense(flat, 1, rng)

    def forward(self, x: np.ndarray, graph=None) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[1] != self.config.dim:
            raise ValueError(f"expected {self.config.dim}-dim rows, "
                             f"got {x.shape[1]}")
        h = self.a1.forward(self.conv1.forward(x[:, :, None]))
        h = self.a2.forward(self.conv2.forward(h))
        self._conv_shape = h.shape
        return self.out.forward(h.reshape(x.shape[0], -1))[:, 0]

    def backward(self, d_logits: np.ndarray, graph=None) -> None:
        d = self.out.backward(np.asarray(d_logits).reshape(-1, 1))
        d = d.reshape(self._conv_shape)
        d = self.conv2.backward(self.a2.backward(d))
        self.conv1.backward(self.a1.backward(d))

    def predict(self, x: np.ndarray, graph=None) -> np.ndarray:
        return sigmoid(self.forward(x))

    def zero_grad(self) -> None:
        for layer in (self.conv1, self.conv2, self.out):
            layer.zero_grad()

    def params(self) -> list[np.ndarray]:
        return self.conv1.params() + self.conv2.params() + self.out.params()

    def grads(self) -> list[np.ndarray]:
        return self.conv1.grads() + self.conv2.grads() + self.out.grads()


@dataclass
class ProbeConfig:
    dim: int
    lr: float = 1e-4
    seed: int = 0


class LinearProbe:
    """Single dense layer over frozen embeddings."""

    uses_graph = False

    def __init__(self, config: ProbeConfig):
        self.config = config
        rng = np.random.default_rng(config.seed)
        self.out = Dense(config.dim, 1, rng)

    def forward(self, x: np.ndarray, graph=None) -> np.ndarray:
        return self.out.forward(np.asarray(x, dtype=np.float64))[:, 0]

    def backward(self, d_logits: np.ndarray, graph=None) -> None:
        self.out.backward(np.asarray(d_logits).reshape(-1, 1))

    def predict(self, x: np.ndarray, graph=None) -> np.ndarray:
        return sigmoid(self.forward(x))

    def zero_grad(self) -> None:
        self.out.zero_grad()

    def params(self) -> list[np.ndarray]:
        return self.out.params()

    def grads(self) -> list[np.ndarray]:
        return self.out.grads()


def _train_baseline(model, x: np.ndarray, labels: np.ndarray, split: Split,
                    cfg: TrainConfig, kind: str):
    t0 = time.perf_counter()
    history = fit_model(model, x, labels, split.train, split.val, cfg)
    prob = model.predict(np.asarray(x, dtype=np.float64)[split.test])
    report = evaluate_scores(prob, np.asarray(labels)[split.test],
                             config={"kind": kind})
    report.runtime = time.perf_counter() - t0
    return model, report, history


def train_mlp(x: np.ndarray, labels: np.ndarray, split: Split, seed: int = 0,
              hidden: int = 32, lr: float = 1e-2, batch_size: int = 256,
              epochs: int = 200):
    model = MlpModel(MlpConfig(n_features=x.shape[1], hidden=hidden, lr=lr,
                               seed=seed))
    cfg = TrainConfig(lr=lr, batch_size=batch_size, epochs=epochs, seed=seed)
    return _train_baseline(model, x, labels, split, cfg, "mlp")


def train_cnn1d(emb: np.ndarray, labels: np.ndarray, split: Split,
                seed: int = 0, lr: float = 0.1, batch_size: int = 256,
                epochs: int = 200):
    model = Cnn1dModel(CnnConfig(dim=emb.shape[1], lr=lr, seed=seed))
    cfg = TrainConfig(lr=lr, batch_size=batch_size, epochs=epochs, seed=seed)
    return _train_baseline(model, emb, labels, split, cfg, "cnn1d")


def train_linear_probe(emb: np.ndarray, labels: np.ndarray, split: Split,
                       seed: int = 0, lr: float = 1e-4, batch_size: int = 256,
                       epochs: int = 200):
    model = LinearProbe(ProbeConfig(dim=emb.shape[1], lr=lr, seed=seed))
    cfg = TrainConfig(lr=lr, batch_size=batch_size, epochs=epochs, seed=seed)
    return _train_baseline(model, emb, labels, split, cfg, "linear-probe")


BASELINE_KINDS = ("mlp", "cnn1d", "linear-probe")


def save_baseline(path: str | Path, model, kind: str) -> None:
    save_model(path, model, kind)


def load_any_model(path: str | Path):
    """Load a checkpoint of any kind, dispatching on the sidecar metadata."""
    path = Path(path)
    with open(str(path) + ".meta", encoding="utf-8") as fh:
        doc = json.load(fh)
    kind = doc.get("kind")
    if kind == "tweetgage":
        return load_tweetgage(path)
    cfg = doc["config"]
    if kind == "mlp":
        model = MlpModel(MlpConfig(**cfg))
    elif kind == "cnn1d":
        cfg["channels"] = tuple(cfg["channels"])
        model = Cnn1dModel(CnnConfig(**cfg))
    elif kind == "linear-probe":
        model = LinearProbe(ProbeConfig(**cfg))
    else:
        raise ValueError(f"{path}: unknown model kind {kind!r}")
    tensors = load_checkpoint(path)
    params = model.params()
    if len(tensors) != len(params):
        raise ValueError(f"{path}: {len(tensors)} tensors, model expects "
                         f"{len(params)}")
    for p, t in zip(params, tensors):
        if t.size != p.size:
            raise ValueError(f"{path}: tensor size {t.size} does not fit "
                             f"parameter shape {p.shape}")
        p[...] = t.reshape(p.shape)
    return model
