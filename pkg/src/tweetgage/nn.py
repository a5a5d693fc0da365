"""Minimal dense neural-network kernel with hand-written backward passes.

Tensors are row-major float64 numpy arrays. Layers cache forward inputs
and accumulate parameter gradients in buffers of matching shape; trainers
call ``zero_grad`` between steps. 64-bit floats keep training deterministic
and make finite-difference gradient checks tight.
"""

from __future__ import annotations

import math
import struct
from pathlib import Path
from typing import Sequence

import numpy as np

TGM_MAGIC = b"TGM1"

_GELU_C = math.sqrt(2.0 / math.pi)
_GELU_A = 0.044715


def gelu(x: np.ndarray) -> np.ndarray:
    """tanh-approximation GELU: 0.5*x*(1 + tanh(c*(x + a*x^3)))."""
    x = np.asarray(x, dtype=np.float64)
    return 0.5 * x * (1.0 + np.tanh(_GELU_C * (x + _GELU_A * x**3)))


def gelu_grad(x: np.ndarray) -> np.ndarray:
    """Derivative of the tanh-approximation GELU."""
    x = np.asarray(x, dtype=np.float64)
    u = _GELU_C * (x + _GELU_A * x**3)
    t = np.tanh(u)
    sech2 = 1.0 - t * t
    return 0.5 * (1.0 + t) + 0.5 * x * sech2 * _GELU_C * (1.0 + 3.0 * _GELU_A * x**2)


def sigmoid(z: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def bce_with_logits(logits: np.ndarray, labels: np.ndarray,
                    pos_weight: float | None = None) -> tuple[float, np.ndarray]:
    """Mean binary cross-entropy on raw logits, with its gradient.

    Uses the log-sum-exp form log(1 + exp(-|z|)) + max(z, 0) - z*y, which
    never overflows. Gradient is (sigmoid(z) - y) / n, optionally with a
    positive-class weight.
    """
    z = np.asarray(logits, dtype=np.float64).reshape(-1)
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    if z.shape != y.shape:
        raise ValueError(f"shape mismatch: logits {z.shape}, labels {y.shape}")
    n = z.size
    per = np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))
    g = sigmoid(z) - y
    if pos_weight is not None:
        w = np.where(y == 1.0, pos_weight, 1.0)
        per = per * w
        g = g * w
    return float(per.sum() / n), g / n


def glorot_uniform(n_in: int, n_out: int, rng: np.random.Generator) -> np.ndarray:
    limit = math.sqrt(6.0 / (n_in + n_out))
    return rng.uniform(-limit, limit, size=(n_in, n_out))


class Dense:
    """Affine layer X @ W + b with cached input and gradient buffers."""

    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator):
        self.W = glorot_uniform(n_in, n_out, rng)
        self.b = np.zeros(n_out, dtype=np.float64)
        self.dW = np.zeros_like(self.W)
        self.db = np.zeros_like(self.b)
        self._x: np.ndarray | None = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.shape[1] != self.W.shape[0]:
            raise ValueError(
                f"shape mismatch: input has {x.shape[1]} columns, layer expects "
                f"{self.W.shape[0]}")
        self._x = x
        return x @ self.W + self.b

    def backward(self, d_out: np.ndarray) -> np.ndarray:
        self.dW += self._x.T @ d_out
        self.db += d_out.sum(axis=0)
        return d_out @ self.W.T

    def zero_grad(self) -> None:
        self.dW[...] = 0.0
        self.db[...] = 0.0

    def params(self) -> list[np.ndarray]:
        return [self.W, self.b]

    def grads(self) -> list[np.ndarray]:
        return [self.dW, self.db]


class Gelu:
    """Elementwise GELU with cached pre-activation."""

    def __init__(self):
        self._x: np.ndarray | None = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._x = x
        return gelu(x)

    def backward(self, d_out: np.ndarray) -> np.ndarray:
        return d_out * gelu_grad(self._x)


class Conv1d:
    """1-D convolution over (batch, length, channels), stride 1, no padding."""

    def __init__(self, in_ch: int, out_ch: int, kernel: int,
                 rng: np.random.Generator):
        fan_in = kernel * in_ch
        limit = math.sqrt(6.0 / (fan_in + out_ch))
        self.W = rng.uniform(-limit, limit, size=(kernel, in_ch, out_ch))
        self.b = np.zeros(out_ch, dtype=np.float64)
        self.dW = np.zeros_like(self.W)
        self.db = np.zeros_like(self.b)
        self.kernel = kernel
        self._x: np.ndarray | None = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 3 or x.shape[2] != self.W.shape[1]:
            raise ValueError(f"expected (n, L, {self.W.shape[1]}) input, got {x.shape}")
        if x.shape[1] < self.kernel:
            raise ValueError("input length shorter than kernel")
        self._x = x
        k = self.kernel
        length = x.shape[1] - k + 1
        # windows: (n, L', k, in_ch)
        windows = np.lib.stride_tricks.sliding_window_view(x, k, axis=1)
        windows = windows.transpose(0, 1, 3, 2)
        cols = windows.reshape(x.shape[0], length, k * x.shape[2])
        w = self.W.reshape(k * x.shape[2], -1)
        return cols @ w + self.b

    def backward(self, d_out: np.ndarray) -> np.ndarray:
        x = self._x
        k = self.kernel
        n, length, _ = d_out.shape
        windows = np.lib.stride_tricks.sliding_window_view(x, k, axis=1)
        windows = windows.transpose(0, 1, 3, 2)
        cols = windows.reshape(n, length, k * x.shape[2])
        flat_cols = cols.reshape(n * length, -1)
        flat_dout = d_out.reshape(n * length, -1)
        self.dW += (flat_cols.T @ flat_dout).reshape(self.W.shape)
        self.db += flat_dout.sum(axis=0)
        d_cols = (flat_dout @ self.W.reshape(k * x.shape[2], -1).T)
        d_cols = d_cols.reshape(n, length, k, x.shape[2])
        dx = np.zeros_like(x)
        for off in range(k):
            dx[:, off:off + length, :] += d_cols[:, :, off, :]
        return dx

    def zero_grad(self) -> None:
        self.dW[...] = 0.0
        self.db[...] = 0.0

    def params(self) -> list[np.ndarray]:
        return [self.W, self.b]

    def grads(self) -> list[np.ndarray]:
        return [self.dW, self.db]


class Adam:
    """Adam with bias correction; updates parameter arrays in place."""

    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m: list[np.ndarray] | None = None
        self._v: list[np.ndarray] | None = None

    def step(self, params: Sequence[np.ndarray], grads: Sequence[np.ndarray]) -> None:
        if self._m is None:
            self._m = [np.zeros_like(p) for p in params]
            self._v = [np.zeros_like(p) for p in params]
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1**self.t
        c2 = 1.0 - b2**self.t
        for p, g, m, v in zip(params, grads, self._m, self._v):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


class PlateauScheduler:
    """Multiply lr by 0.1 after `patience` consecutive non-improving metrics.

    Improvement means the metric drops by at least `min_delta` below the
    best seen so far; the wait counter resets on improvement or reduction.
    """

    def __init__(self, lr: float, patience: int = 5, factor: float = 0.1,
                 min_lr: float = 1e-6, min_delta: float = 1e-4):
        self.lr = lr
        self.patience = patience
        self.factor = factor
        self.min_lr = min_lr
        self.min_delta = min_delta
        self.best = math.inf
        self.wait = 0

    def step(self, metric: float) -> float:
        if metric < self.best - self.min_delta:
            self.best = metric
            self.wait = 0
        else:
            self.wait += 1
            if self.wait >= self.patience:
                self.lr = max(self.lr * self.factor, self.min_lr)
                self.wait = 0
        return self.lr


def early_stop(best_so_far: float, current: float, wait: int, patience: int,
               min_delta: float = 0.0) -> tuple[bool, float, int]:
    """One early-stopping decision for a lower-is-better metric.

    Returns (stop, new_best, new_wait); stop becomes True after `patience`
    consecutive non-improving evaluations. Unlike the plateau scheduler,
    any strict improvement resets the counter.
    """
    if current < best_so_far - min_delta:
        return False, current, 0
    wait += 1
    return wait >= patience, best_so_far, wait


class EarlyStopping:
    """Stateful wrapper over :func:`early_stop`; tracks the best epoch."""

    def __init__(self, patience: int = 10, min_delta: float = 0.0):
        self.patience = patience
        self.min_delta = min_delta
        self.best = math.inf
        self.best_epoch = -1
        self.wait = 0

    def update(self, metric: float, epoch: int) -> bool:
        improved = metric < self.best - self.min_delta
        stop, self.best, self.wait = early_stop(
            self.best, metric, self.wait, self.patience, self.min_delta)
        if improved:
            self.best_epoch = epoch
        return stop


def save_checkpoint(path: str | Path, tensors: Sequence[np.ndarray]) -> None:
    """Write tensors as a TGM1 checkpoint (shapes + float64 payloads, LE)."""
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sI", TGM_MAGIC, len(tensors)))
        for t in tensors:
            arr = np.ascontiguousarray(t, dtype="<f8")
            if arr.ndim == 1:
                rows, cols = 1, arr.shape[0]
            elif arr.ndim == 2:
                rows, cols = arr.shape
            else:
                # higher-rank tensors (conv kernels) fold their leading axes
                rows, cols = arr.size // arr.shape[-1], arr.shape[-1]
            fh.write(struct.pack("<II", rows, cols))
            fh.write(arr.tobytes())


def load_checkpoint(path: str | Path) -> list[np.ndarray]:
    """Read a TGM1 checkpoint; 1-D tensors come back with shape (1, n)."""
    with open(path, "rb") as fh:
        header = fh.read(8)
        if len(header) != 8:
            raise ValueError(f"{path}: truncated TGM1 header")
        magic, count = struct.unpack("<4sI", header)
        if magic != TGM_MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        tensors = []
        for _ in range(count):
            rows, cols = struct.unpack("<II", fh.read(8))
            payload = np.frombuffer(fh.read(rows * cols * 8), dtype="<f8")
            if payload.size != rows * cols:
                raise ValueError(f"{path}: truncated tensor payload")
            tensors.append(payload.reshape(rows, cols).astype(np.float64))
    return tensors
