"""Post graph construction and structural statistics.

Nodes are corpus row indices. An undirected edge joins two posts that share
at least one hashtag and were published strictly less than ``delta`` seconds
apart; the edge weight is the number of shared hashtags.

Construction uses an inverted index (hashtag -> time-sorted posts) with a
sliding window of width delta per hashtag. Each shared hashtag contributes
+1 to its pair, which yields exactly |h_i ∩ h_j| because per-post hashtags
are a set. The worst case is quadratic in the population of a single hot
hashtag inside one window; that is accepted at the intended corpus scale.
"""

from __future__ import annotations

import struct
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .ingest import TweetRecord

PGR_MAGIC = b"PGR1"


@dataclass
class PostGraph:
    """Undirected weighted graph in CSR form; treat as immutable."""

    n_nodes: int
    delta_seconds: int
    indptr: np.ndarray    # int64, len n_nodes + 1
    indices: np.ndarray   # int32, neighbor node ids
    weights: np.ndarray   # int32, shared-hashtag counts
    _agg_cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n_edges(self) -> int:
        return int(self.indices.size) // 2

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def neighbors(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """(neighbor ids, edge weights) of node i."""
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return self.indices[lo:hi], self.weights[lo:hi]

    def adjacency(self) -> list[list[tuple[int, int]]]:
        """Per-node list of (neighbor, weight) pairs."""
        out = []
        for i in range(self.n_nodes):
            nbr, w = self.neighbors(i)
            out.append(list(zip(nbr.tolist(), w.tolist())))
        return out

    def edge_array(self) -> np.ndarray:
        """(n_edges, 3) array of (u, v, w) with u < v, sorted by (u, v)."""
        src = np.repeat(np.arange(self.n_nodes, dtype=np.int64), self.degrees())
        mask = src < self.indices
        edges = np.column_stack([
            src[mask],
            self.indices[mask].astype(np.int64),
            self.weights[mask].astype(np.int64),
        ])
        return edges  # CSR order is already sorted by (u, v)

    def agg_matrix(self, weighted: bool = False) -> sp.csr_matrix:
        """Sparse n x n matrix for neighbor aggregation (symmetric)."""
        key = bool(weighted)
        if key not in self._agg_cache:
            data = self.weights.astype(np.float64) if weighted \
                else np.ones(self.indices.size, dtype=np.float64)
            mat = sp.csr_matrix(
                (data, self.indices.astype(np.int64), self.indptr),
                shape=(self.n_nodes, self.n_nodes),
            )
            self._agg_cache[key] = mat
        return self._agg_cache[key]


@dataclass(frozen=True, slots=True)
class GraphStats:
    n_nodes: int
    n_edges: int
    density: float
    n_connected_components: int
    max_component_size: int

    def as_dict(self) -> dict:
        return {
            "n_nodes": self.n_nodes,
            "n_edges": self.n_edges,
            "density": self.density,
            "n_connected_components": self.n_connected_components,
            "max_component_size": self.max_component_size,
        }


def _graph_from_pair_counts(n: int, pair_counts: dict[int, int],
                            delta_seconds: int) -> PostGraph:
    """CSR graph from a map keyed by u * n + v (u < v)."""
    m = len(pair_counts)
    us = np.empty(m, dtype=np.int64)
    vs = np.empty(m, dtype=np.int64)
    ws = np.empty(m, dtype=np.int64)
    for k, (key, w) in enumerate(pair_counts.items()):
        us[k] = key // n
        vs[k] = key % n
        ws[k] = w
    # Symmetrize, then sort by (src, dst) to get canonical CSR order.
    src = np.concatenate([us, vs])
    dst = np.concatenate([vs, us])
    w2 = np.concatenate([ws, ws])
    order = np.lexsort((dst, src))
    src, dst, w2 = src[order], dst[order], w2[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, src + 1, 1)
    np.cumsum(indptr, out=indptr)
    return PostGraph(
        n_nodes=n,
        delta_seconds=int(delta_seconds),
        indptr=indptr,
        indices=dst.astype(np.int32),
        weights=w2.astype(np.int32),
    )


def build_graph(records: Sequence[TweetRecord], delta_seconds: int) -> PostGraph:
    """Build the shared-hashtag post graph for a time threshold in seconds.

    Edges require |t_i - t_j| < delta_seconds (strict); equal timestamps
    are connected. Node i is corpus row i.
    """
    if not records:
        raise ValueError("records must be non-empty")
    if delta_seconds <= 0:
        raise ValueError("delta_seconds must be > 0")
    n = len(records)
    index: dict[str, list[tuple[int, int]]] = defaultdict(list)
    for i, rec in enumerate(records):
        for tag in rec.hashtags:
            index[tag].append((rec.timestamp, i))
    pair_counts: dict[int, int] = defaultdict(int)
    for posts in index.values():
        posts.sort()
        left = 0
        for right in range(len(posts)):
            t_r, i_r = posts[right]
            while t_r - posts[left][0] >= delta_seconds:
                left += 1
            for k in range(left, right):
                i_l = posts[k][1]
                if i_l < i_r:
                    pair_counts[i_l * n + i_r] += 1
                else:
                    pair_counts[i_r * n + i_l] += 1
    return _graph_from_pair_counts(n, pair_counts, delta_seconds)


def connected_components(graph: PostGraph) -> np.ndarray:
    """Component id per node; ids assigned in order of first visit."""
    n = graph.n_nodes
    comp = np.full(n, -1, dtype=np.int64)
    indptr, indices = graph.indptr, graph.indices
    next_id = 0
    for start in range(n):
        if comp[start] >= 0:
            continue
        comp[start] = next_id
        stack = [start]
        while stack:
            v = stack.pop()
            for u in indices[indptr[v]:indptr[v + 1]]:
                if comp[u] < 0:
                    comp[u] = next_id
                    stack.append(int(u))
        next_id += 1
    return comp


def graph_stats(graph: PostGraph) -> GraphStats:
    """Node/edge counts, density, and connected-component summary."""
    n = graph.n_nodes
    m = graph.n_edges
    density = 0.0 if n < 2 else 2.0 * m / (n * (n - 1))
    comp = connected_components(graph)
    if n:
        sizes = np.bincount(comp)
        n_comp = int(sizes.size)
        max_size = int(sizes.max())
    else:
        n_comp, max_size = 0, 0
    return GraphStats(n, m, density, n_comp, max_size)


def write_pgr(graph: PostGraph, path: str | Path) -> None:
    """Persist as the PGR1 binary edge list (u < v, little-endian u32)."""
    edges = graph.edge_array()
    header = struct.pack("<4sIII", PGR_MAGIC, graph.n_nodes,
                         edges.shape[0], graph.delta_seconds)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(edges.astype("<u4").tobytes())


def read_pgr(path: str | Path) -> PostGraph:
    """Load a PGR1 file written by :func:`write_pgr`."""
    with open(path, "rb") as fh:
        header = fh.read(16)
        if len(header) != 16:
            raise ValueError(f"{path}: truncated PGR1 header")
        magic, n_nodes, n_edges, delta = struct.unpack("<4sIII", header)
        if magic != PGR_MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        payload = np.frombuffer(fh.read(), dtype="<u4")
    if payload.size != 3 * n_edges:
        raise ValueError(
            f"{path}: expected {3 * n_edges} edge words, found {payload.size}")
    edges = payload.reshape(n_edges, 3).astype(np.int64)
    if n_edges and not np.all(edges[:, 0] < edges[:, 1]):
        raise ValueError(f"{path}: edge list violates u < v")
    pair_counts = {
        int(u) * n_nodes + int(v): int(w) for u, v, w in edges
    }
    return _graph_from_pair_counts(n_nodes, pair_counts, delta)
