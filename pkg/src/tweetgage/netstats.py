"""Centrality measures, class-split distribution summaries, KS tests, and
the feature correlation matrix.

Shortest-path centralities (closeness, betweenness) treat the graph as
unweighted: shared-hashtag counts are similarities, not distances. Weighted
degree and eigenvector centrality do use the weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .postgraph import PostGraph


@dataclass(frozen=True, slots=True)
class KsResult:
    statistic: float
    p_value: float


@dataclass(frozen=True, slots=True)
class ClassSplitSummary:
    """Per-class mean/std (population) plus the two-sample KS test."""

    mean0: float
    std0: float
    mean1: float
    std1: float
    ks: KsResult


@dataclass(frozen=True, slots=True)
class CentralityTable:
    weighted_degree: np.ndarray
    closeness: np.ndarray
    betweenness: np.ndarray
    eigenvector: np.ndarray
    eigenvector_converged: bool


def weighted_degree(graph: PostGraph) -> np.ndarray:
    """Sum of incident edge weights per node."""
    out = np.zeros(graph.n_nodes, dtype=np.float64)
    src = np.repeat(np.arange(graph.n_nodes), graph.degrees())
    np.add.at(out, src, graph.weights.astype(np.float64))
    return out


def _bfs_distances(graph: PostGraph, source: int) -> np.ndarray:
    """Unweighted hop distances from one source; -1 for unreachable."""
    indptr, indices = graph.indptr, graph.indices
    dist = np.full(graph.n_nodes, -1, dtype=np.int64)
    dist[source] = 0
    frontier = np.array([source], dtype=np.int64)
    d = 0
    while frontier.size:
        starts = indptr[frontier]
        counts = indptr[frontier + 1] - starts
        if counts.sum() == 0:
            break
        nbrs = indices[np.concatenate(
            [np.arange(s, s + c) for s, c in zip(starts, counts)])]
        nxt = np.unique(nbrs[dist[nbrs] < 0])
        dist[nxt] = d + 1
        frontier = nxt
        d += 1
    return dist


def closeness(graph: PostGraph) -> np.ndarray:
    """Component-scaled closeness over unweighted shortest paths.

    For a node with r reachable peers at total distance S:
    (r / S) * (r / (n - 1)); 0 for isolated nodes. The second factor keeps
    values comparable across components of a disconnected graph.
    """
    n = graph.n_nodes
    out = np.zeros(n, dtype=np.float64)
    if n <= 1:
        return out
    for v in range(n):
        dist = _bfs_distances(graph, v)
        reachable = dist > 0
        r = int(reachable.sum())
        s = int(dist[reachable].sum())
        if s > 0:
            out[v] = (r / s) * (r / (n - 1))
    return out


def betweenness(graph: PostGraph) -> np.ndarray:
    """Brandes betweenness over unweighted shortest paths.

    Normalized by (n-1)(n-2)/2; all zeros for n < 3. Per-source passes are
    level-synchronous over the CSR edge list so the inner loops vectorize.
    """
    n = graph.n_nodes
    out = np.zeros(n, dtype=np.float64)
    if n < 3 or graph.indices.size == 0:
        return out
    indptr, indices = graph.indptr, graph.indices
    src = np.repeat(np.arange(n, dtype=np.int64), graph.degrees())
    dst = indices.astype(np.int64)
    for s in range(n):
        dist = _bfs_distances(graph, s)
        max_d = int(dist.max())
        if max_d <= 0:
            continue
        # Directed edges that lie on some shortest path from s.
        on_path = (dist[src] >= 0) & (dist[dst] == dist[src] + 1)
        e_src = src[on_path]
        e_dst = dst[on_path]
        e_level = dist[e_src]
        sigma = np.zeros(n, dtype=np.float64)
        sigma[s] = 1.0
        for d in range(max_d):
            m = e_level == d
            np.add.at(sigma, e_dst[m], sigma[e_src[m]])
        delta = np.zeros(n, dtype=np.float64)
        for d in range(max_d - 1, -1, -1):
            m = e_level == d
            contrib = (sigma[e_src[m]] / sigma[e_dst[m]]) * (1.0 + delta[e_dst[m]])
            np.add.at(delta, e_src[m], contrib)
        delta[s] = 0.0
        out += delta
    # Each unordered pair was counted from both endpoints.
    out /= 2.0
    out /= (n - 1) * (n - 2) / 2.0
    return out


def eigenvector(graph: PostGraph, tol: float = 1e-8,
                max_iter: int = 1000) -> tuple[np.ndarray, bool]:
    """Power iteration on the weighted adjacency; (values, converged).

    Uniform start, L2 normalization each step, convergence when the max
    absolute change drops below ``tol``. The iteration actually runs on
    A + I, which has the same eigenvectors but a strictly dominant top
    eigenvalue even on bipartite graphs, where plain power iteration
    oscillates forever. Returns absolute values; a graph with no edges
    yields all zeros.
    """
    n = graph.n_nodes
    if n == 0:
        return np.zeros(0, dtype=np.float64), True
    if graph.n_edges == 0:
        return np.zeros(n, dtype=np.float64), True
    mat = graph.agg_matrix(weighted=True)
    v = np.full(n, 1.0 / math.sqrt(n), dtype=np.float64)
    for _ in range(max_iter):
        nxt = mat @ v + v
        nxt /= np.linalg.norm(nxt)
        if np.max(np.abs(nxt - v)) < tol:
            return np.abs(nxt), True
        v = nxt
    return np.abs(v), False


def centrality_table(graph: PostGraph) -> CentralityTable:
    eig, converged = eigenvector(graph)
    return CentralityTable(
        weighted_degree=weighted_degree(graph),
        closeness=closeness(graph),
        betweenness=betweenness(graph),
        eigenvector=eig,
        eigenvector_converged=converged,
    )


def _kolmogorov_sf(lam: float) -> float:
    """2 * sum_{k>=1} (-1)^(k-1) exp(-2 k^2 lam^2), clamped to [0, 1]."""
    if lam <= 0.0:
        return 1.0
    total = 0.0
    sign = 1.0
    for k in range(1, 100001):
        term = math.exp(-2.0 * (k * lam) ** 2)
        total += sign * term
        if term < 1e-18:
            break
        sign = -sign
    return min(1.0, max(0.0, 2.0 * total))


def ks_two_sample(a: Sequence[float], b: Sequence[float]) -> KsResult:
    """Two-sample Kolmogorov-Smirnov test.

    D is the sup gap between the two empirical CDFs; the p-value uses the
    asymptotic Kolmogorov series with the standard small-sample correction
    lambda = (sqrt(n_e) + 0.12 + 0.11 / sqrt(n_e)) * D.
    """
    xa = np.sort(np.asarray(a, dtype=np.float64))
    xb = np.sort(np.asarray(b, dtype=np.float64))
    if xa.size == 0 or xb.size == 0:
        raise ValueError("both samples must be non-empty")
    merged = np.concatenate([xa, xb])
    cdf_a = np.searchsorted(xa, merged, side="right") / xa.size
    cdf_b = np.searchsorted(xb, merged, side="right") / xb.size
    d = float(np.max(np.abs(cdf_a - cdf_b)))
    if d == 0.0:
        return KsResult(0.0, 1.0)
    n_eff = xa.size * xb.size / (xa.size + xb.size)
    lam = (math.sqrt(n_eff) + 0.12 + 0.11 / math.sqrt(n_eff)) * d
    return KsResult(d, _kolmogorov_sf(lam))


def class_split_summary(values: Sequence[float],
                        labels: Sequence[int]) -> ClassSplitSummary:
    """Mean/std per engagement class plus the KS test between the classes."""
    vals = np.asarray(values, dtype=np.float64)
    labs = np.asarray(labels)
    if vals.shape != labs.shape:
        raise ValueError("values and labels must have equal length")
    g0 = vals[labs == 0]
    g1 = vals[labs == 1]
    if g0.size == 0 or g1.size == 0:
        raise ValueError("both classes must be present")
    return ClassSplitSummary(
        mean0=float(g0.mean()), std0=float(g0.std()),
        mean1=float(g1.mean()), std1=float(g1.std()),
        ks=ks_two_sample(g0, g1),
    )


def correlation_matrix(columns: Mapping[str, Sequence[float]]
                       ) -> tuple[list[str], np.ndarray]:
    """Pearson correlations for named per-node columns.

    Zero-variance columns correlate 0 with everything else and 1 with
    themselves. Returns (names, matrix).
    """
    names = list(columns)
    if len(names) < 2:
        raise ValueError("need at least two columns")
    arrays = [np.asarray(columns[name], dtype=np.float64) for name in names]
    length = arrays[0].size
    if length < 2:
        raise ValueError("columns must have length >= 2")
    for name, arr in zip(names, arrays):
        if arr.size != length:
            raise ValueError(f"column {name!r} length {arr.size} != {length}")
    x = np.vstack(arrays)
    x = x - x.mean(axis=1, keepdims=True)
    std = x.std(axis=1)
    k = len(names)
    out = np.eye(k)
    for i in range(k):
        for j in range(i + 1, k):
            if std[i] == 0.0 or std[j] == 0.0:
                c = 0.0
            else:
                c = float((x[i] @ x[j]) / (length * std[i] * std[j]))
                c = min(1.0, max(-1.0, c))
            out[i, j] = out[j, i] = c
    return names, out


def loglog_histogram(values: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """Distinct value -> count pairs for log-log distribution plots.

    Binning is left to the consumer; this emits the raw pairs.
    """
    vals = np.asarray(values, dtype=np.float64)
    uniq, counts = np.unique(vals, return_counts=True)
    return uniq, counts
