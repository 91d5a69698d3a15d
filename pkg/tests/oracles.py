"""Independent brute-force oracles used to freeze/verify expected values.

Everything here recomputes results from first principles (path enumeration,
all-pairs distances, pairwise counting, scalar loops, finite differences)
and must stay independent of the library's own algorithms.
"""

from __future__ import annotations

import math

import numpy as np

from asymdetect.gcn import forward, masked_bce
from asymdetect.graphs import Graph

INF = math.inf


def all_pairs_distances(g: Graph) -> np.ndarray:
    """Floyd-Warshall over the dense hop-count matrix."""
    n = g.n
    dist = np.full((n, n), INF)
    np.fill_diagonal(dist, 0.0)
    for u, v in g.edge_array():
        dist[u, v] = dist[v, u] = 1.0
    for k in range(n):
        dist = np.minimum(dist, dist[:, k:k + 1] + dist[k:k + 1, :])
    return dist


def _shortest_paths_from(g: Graph, source: int):
    """BFS distances and predecessor lists on the shortest-path DAG."""
    dist = {source: 0}
    preds: dict[int, list[int]] = {v: [] for v in range(g.n)}
    frontier = [source]
    while frontier:
        nxt = []
        for v in frontier:
            for w in g.neighbors_of(v):
                w = int(w)
                if w not in dist:
                    dist[w] = dist[v] + 1
                    nxt.append(w)
                if dist[w] == dist[v] + 1:
                    preds[w].append(v)
        frontier = nxt
    return dist, preds


def _enumerate_paths(preds, source, target):
    """All shortest source->target paths, as node tuples."""
    if target == source:
        return [(source,)]
    out = []
    for p in preds[target]:
        for prefix in _enumerate_paths(preds, source, p):
            out.append(prefix + (target,))
    return out


def enumeration_betweenness(g: Graph, pair_nodes=None) -> np.ndarray:
    """Betweenness by literally enumerating every shortest path between
    unordered pairs drawn from `pair_nodes` (default: all nodes), crediting
    interior nodes with (paths through v) / (total paths)."""
    nodes = sorted(int(v) for v in (range(g.n) if pair_nodes is None else pair_nodes))
    scores = np.zeros(g.n)
    for i, x in enumerate(nodes):
        dist, preds = _shortest_paths_from(g, x)
        for y in nodes[i + 1:]:
            if y == x or y not in dist:
                continue
            paths = _enumerate_paths(preds, x, y)
            through = np.zeros(g.n)
            for path in paths:
                for v in path[1:-1]:
                    through[v] += 1.0
            scores += through / len(paths)
    return scores


def pairwise_auc(scores, labels) -> float | None:
    """O(P*N) pair counting; ties contribute 0.5."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels).astype(bool)
    pos = scores[labels]
    neg = scores[~labels]
    if pos.size == 0 or neg.size == 0:
        return None
    wins = 0.0
    for p in pos:
        for q in neg:
            if p > q:
                wins += 1.0
            elif p == q:
                wins += 0.5
    return wins / (pos.size * neg.size)


def scalar_masked_bce(scores, labels, mask, clamp=1e-7) -> float:
    total, count = 0.0, 0
    for s, y, m in zip(scores, labels, mask):
        if not m:
            continue
        s = min(max(float(s), clamp), 1.0 - clamp)
        total += -(y * math.log(s) + (1.0 - y) * math.log(1.0 - s))
        count += 1
    return total / count


def fd_gradients(model, adj, X, labels, mask, h=1e-5) -> dict[str, np.ndarray]:
    """Central finite differences of masked_bce(forward(...)) over every
    parameter coordinate."""
    out = {}
    for name, p in model.params().items():
        fd = np.zeros_like(p)
        it = np.nditer(p, flags=["multi_index"])
        while not it.finished:
            idx = it.multi_index
            orig = p[idx]
            p[idx] = orig + h
            lp = masked_bce(forward(model, adj, X)[0], labels, mask)
            p[idx] = orig - h
            lm = masked_bce(forward(model, adj, X)[0], labels, mask)
            p[idx] = orig
            fd[idx] = (lp - lm) / (2.0 * h)
            it.iternext()
        out[name] = fd
    return out


def reference_features(g: Graph, observed) -> np.ndarray:
    """Straight-line recomputation of the full n x 8 feature matrix from
    all-pairs distances and path enumeration."""
    obs = set(int(v) for v in observed)
    dist = all_pairs_distances(g)
    n = g.n
    out = np.zeros((n, 8))
    for v in range(n):
        out[v, 0] = 1.0 if v in obs else 0.0
        out[v, 1] = len(g.neighbors_of(v))
        ring = {}
        for k in (1, 2, 3):
            ring[k] = {u for u in range(n) if dist[v, u] == k}
            if ring[k]:
                out[v, 1 + k] = len(ring[k] & obs) / len(ring[k])
        near = ring[1] | ring[2]
        if near:
            out[v, 5] = len(near & obs) / len(near)
    out[:, 6] = enumeration_betweenness(g)
    out[:, 7] = enumeration_betweenness(g, pair_nodes=obs)
    return out
