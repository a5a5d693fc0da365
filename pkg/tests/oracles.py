"""Brute-force reference implementations used by the test suite.

Everything here trades speed for obviousness: quadratic loops, explicit
path enumeration, dense linear algebra, high-precision series. Nothing
imports the implementations under test beyond plain data containers.
"""

import math

import mpmath
import numpy as np


# ---------------------------------------------------------------------------
# graph construction

def brute_force_edges(records, delta_seconds):
    """O(n^2) edge map {(i, j): weight} with i < j.

    Edge iff the posts share >= 1 hashtag and |t_i - t_j| < delta (strict).
    Weight = number of shared hashtags.
    """
    edges = {}
    n = len(records)
    for i in range(n):
        for j in range(i + 1, n):
            if abs(records[i].timestamp - records[j].timestamp) >= delta_seconds:
                continue
            shared = records[i].hashtags & records[j].hashtags
            if shared:
                edges[(i, j)] = len(shared)
    return edges


def graph_edge_map(graph):
    """Edge map {(i, j): weight} with i < j pulled out of a PostGraph."""
    out = {}
    for u, v, w in graph.edge_array():
        out[(int(u), int(v))] = int(w)
    return out


def adjacency_lists(n, edges):
    """Plain neighbor lists [(j, w), ...] from an {(i, j): w} edge map."""
    adj = [[] for _ in range(n)]
    for (u, v), w in edges.items():
        adj[u].append((v, w))
        adj[v].append((u, w))
    for row in adj:
        row.sort()
    return adj


def random_edge_map(n, p, seed, max_weight=4):
    """Random undirected weighted graph as an edge map."""
    rng = np.random.default_rng(seed)
    edges = {}
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < p:
                edges[(i, j)] = int(rng.integers(1, max_weight + 1))
    return edges


# ---------------------------------------------------------------------------
# centralities

def floyd_warshall(n, edges):
    """Unweighted all-pairs distances; inf where unreachable."""
    dist = np.full((n, n), np.inf)
    np.fill_diagonal(dist, 0.0)
    for (u, v) in edges:
        dist[u, v] = 1.0
        dist[v, u] = 1.0
    for k in range(n):
        dist = np.minimum(dist, dist[:, k:k + 1] + dist[k:k + 1, :])
    return dist


def closeness_oracle(n, edges):
    """Component-scaled closeness from a Floyd-Warshall distance matrix."""
    if n == 0:
        return np.zeros(0)
    dist = floyd_warshall(n, edges)
    out = np.zeros(n)
    for v in range(n):
        reach = np.isfinite(dist[v]) & (np.arange(n) != v)
        r = int(reach.sum())
        s = dist[v][reach].sum()
        if s > 0 and n > 1:
            out[v] = (r / s) * (r / (n - 1))
    return out


def _all_shortest_paths(adj, dist, s, t):
    """Every shortest s-t path as node tuples, by DFS over the distance DAG."""
    paths = []
    stack = [(s, (s,))]
    while stack:
        node, path = stack.pop()
        if node == t:
            paths.append(path)
            continue
        for nxt, _w in adj[node]:
            if dist[s][nxt] == dist[s][node] + 1 and dist[nxt][t] == dist[s][t] - dist[s][node] - 1:
                stack.append((nxt, path + (nxt,)))
    return paths


def betweenness_oracle(n, edges):
    """Normalized betweenness by explicit enumeration of all shortest paths."""
    out = np.zeros(n)
    if n < 3:
        return out
    dist = floyd_warshall(n, edges)
    adj = adjacency_lists(n, edges)
    for s in range(n):
        for t in range(s + 1, n):
            if not np.isfinite(dist[s][t]) or dist[s][t] == 0:
                continue
            paths = _all_shortest_paths(adj, dist, s, t)
            for path in paths:
                for v in path[1:-1]:
                    out[v] += 1.0 / len(paths)
    return out / ((n - 1) * (n - 2) / 2.0)


def eigenvector_oracle(n, edges):
    """Dense eigendecomposition of the weighted adjacency; abs of top vector."""
    a = np.zeros((n, n))
    for (u, v), w in edges.items():
        a[u, v] = w
        a[v, u] = w
    vals, vecs = np.linalg.eigh(a)
    top = np.abs(vecs[:, int(np.argmax(vals))])
    norm = np.linalg.norm(top)
    return top / norm if norm > 0 else top


# ---------------------------------------------------------------------------
# KS test

def ks_statistic_oracle(a, b):
    """sup |F_a - F_b| scanned over the merged sample grid."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    grid = np.concatenate([a, b])
    best = 0.0
    for x in grid:
        fa = np.sum(a <= x) / a.size
        fb = np.sum(b <= x) / b.size
        best = max(best, abs(fa - fb))
    return best


def ks_pvalue_oracle(d, n_a, n_b, dps=60, terms=200):
    """Asymptotic two-sided p-value evaluated with mpmath at high precision."""
    with mpmath.workdps(dps):
        ne = mpmath.mpf(n_a) * n_b / (n_a + n_b)
        lam = (mpmath.sqrt(ne) + mpmath.mpf("0.12")
               + mpmath.mpf("0.11") / mpmath.sqrt(ne)) * d
        total = mpmath.mpf(0)
        for k in range(1, terms + 1):
            total += (-1) ** (k - 1) * mpmath.e ** (-2 * k * k * lam * lam)
        p = 2 * total
        return float(min(max(p, mpmath.mpf(0)), mpmath.mpf(1)))


# ---------------------------------------------------------------------------
# metrics

def confusion_metrics_oracle(prob, labels, threshold=0.5):
    """Macro precision/recall/F1 + accuracy by explicit counting."""
    pred = [1 if p >= threshold else 0 for p in prob]
    acc = sum(1 for p, y in zip(pred, labels) if p == y) / len(labels)
    precs, recs = [], []
    for cls in (0, 1):
        tp = sum(1 for p, y in zip(pred, labels) if p == cls and y == cls)
        fp = sum(1 for p, y in zip(pred, labels) if p == cls and y != cls)
        fn = sum(1 for p, y in zip(pred, labels) if p != cls and y == cls)
        precs.append(tp / (tp + fp) if tp + fp else 0.0)
        recs.append(tp / (tp + fn) if tp + fn else 0.0)
    prec = sum(precs) / 2.0
    rec = sum(recs) / 2.0
    f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
    return acc, prec, rec, f1


def auc_roc_oracle(scores, labels):
    """Pairwise ranking probability with half credit for ties, O(n^2)."""
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    total = 0.0
    for sp in pos:
        for sn in neg:
            if sp > sn:
                total += 1.0
            elif sp == sn:
                total += 0.5
    return total / (len(pos) * len(neg))


def auc_pr_oracle(scores, labels):
    """Average precision stepped at distinct score thresholds, descending."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    n_pos = int(np.sum(labels == 1))
    ap = 0.0
    prev_recall = 0.0
    for thr in sorted(set(scores.tolist()), reverse=True):
        taken = scores >= thr
        tp = int(np.sum(labels[taken] == 1))
        precision = tp / int(taken.sum())
        recall = tp / n_pos
        ap += (recall - prev_recall) * precision
        prev_recall = recall
    return ap


# ---------------------------------------------------------------------------
# neural network pieces

def gelu_scalar(x):
    c = math.sqrt(2.0 / math.pi)
    return 0.5 * x * (1.0 + math.tanh(c * (x + 0.044715 * x ** 3)))


def dense_scalar(x_row, w, b):
    """One dense row: x_row @ w + b with explicit loops."""
    out = []
    for j in range(w.shape[1]):
        acc = b[j]
        for i in range(w.shape[0]):
            acc += x_row[i] * w[i, j]
        out.append(acc)
    return out


def sage_oracle(h, adj, w, b, weighted=False):
    """Per-node double loop: GELU(dense([h_i || sum_j h_j]))."""
    n, d = h.shape
    out = np.zeros((n, w.shape[1]))
    for i in range(n):
        agg = np.zeros(d)
        for j, wt in adj[i]:
            agg += (wt if weighted else 1.0) * h[j]
        z = dense_scalar(np.concatenate([h[i], agg]), w, b)
        out[i] = [gelu_scalar(v) for v in z]
    return out


def forward_oracle(x, adj, sage_params, head_params, out_params, weighted=False):
    """Full model forward independent of the library implementation.

    sage_params: list of (W, b) per SAGE layer; head/out: (W, b) tuples.
    """
    h = x
    for w, b in sage_params:
        h = sage_oracle(h, adj, w, b, weighted=weighted)
    hw, hb = head_params
    h = np.array([[gelu_scalar(v) for v in dense_scalar(row, hw, hb)] for row in h])
    ow, ob = out_params
    logits = np.array([dense_scalar(row, ow, ob) for row in h])
    return logits[:, 0]


def bce_oracle(logits, labels):
    """Mean binary cross-entropy from logits, via mpmath for stability."""
    total = mpmath.mpf(0)
    for z, y in zip(logits, labels):
        p = 1 / (1 + mpmath.e ** (-mpmath.mpf(z)))
        total += -(y * mpmath.log(p) + (1 - y) * mpmath.log(1 - p))
    return float(total / len(logits))


def adam_scalar_oracle(grads, lr, beta1=0.9, beta2=0.999, eps=1e-8, theta0=0.0):
    """Scalar Adam recurrence over a gradient sequence; returns iterates."""
    m = v = 0.0
    theta = theta0
    out = []
    for t, g in enumerate(grads, start=1):
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        mh = m / (1 - beta1 ** t)
        vh = v / (1 - beta2 ** t)
        theta = theta - lr * mh / (math.sqrt(vh) + eps)
        out.append(theta)
    return out


def finite_difference_grads(f, params, h=1e-5):
    """Central differences of scalar f() w.r.t. a list of ndarray params."""
    grads = [np.zeros_like(p) for p in params]
    for p, g in zip(params, grads):
        flat = p.ravel()
        gflat = g.ravel()
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + h
            f_hi = f()
            flat[k] = orig - h
            f_lo = f()
            flat[k] = orig
            gflat[k] = (f_hi - f_lo) / (2 * h)
    return grads


def grad_compare(analytic, numeric, rel_floor=1e-6, dead=1e-8):
    """Max relative error, skipping dead paths where both are ~0."""
    worst = 0.0
    for a, f in zip(analytic, numeric):
        for av, fv in zip(a.ravel(), f.ravel()):
            if abs(av) < dead and abs(fv) < dead:
                continue
            err = abs(av - fv) / max(abs(av), abs(fv), rel_floor)
            worst = max(worst, err)
    return worst


# ---------------------------------------------------------------------------
# PCA

def pca_oracle(matrix, k):
    """Eigendecomposition of the covariance of column-standardized data.

    Returns (components (k x d), explained variance ratios (k,)).
    """
    x = np.asarray(matrix, dtype=float)
    mu = x.mean(axis=0)
    sd = x.std(axis=0)
    sd[sd == 0] = 1.0
    z = (x - mu) / sd
    cov = z.T @ z / (z.shape[0] - 1)
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(vals)[::-1]
    vals = vals[order]
    vecs = vecs[:, order]
    ratios = vals[:k] / vals.sum()
    return vecs[:, :k].T, ratios
