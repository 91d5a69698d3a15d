"""Undirected simple graphs in compressed adjacency form, random-network
generators (Barabási-Albert, Watts-Strogatz), BFS machinery, and the two
betweenness centrality variants used as node features and as the ranking
baseline.

Betweenness follows Brandes (2001), "A faster algorithm for betweenness
centrality", restricted here to unweighted graphs. Scores are unnormalized
sums over unordered node pairs with endpoints excluded; the observed variant
restricts both endpoints of every pair to a given node set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .rng import check_seed, generator

UNREACHED = -1


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph over dense node ids 0..n-1, stored as CSR.

    ``neighbors[offsets[v]:offsets[v+1]]`` is the sorted neighbour list of v.
    Instances are immutable after construction and safe to share across
    threads and processes.
    """

    n: int
    offsets: np.ndarray
    neighbors: np.ndarray

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("graph needs at least one node")
        if self.offsets.shape != (self.n + 1,):
            raise ValueError("offsets must have length n+1")
        self.offsets.flags.writeable = False
        self.neighbors.flags.writeable = False

    @classmethod
    def from_edges(cls, n: int, edges) -> "Graph":
        """Build a graph from an iterable of (u, v) pairs.

        Rejects self-loops, duplicate edges (in either orientation), and
        endpoints outside 0..n-1.
        """
        if n < 1:
            raise ValueError("graph needs at least one node")
        arr = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges,
                         dtype=np.int64).reshape(-1, 2)
        if arr.size:
            if arr.min() < 0 or arr.max() >= n:
                raise ValueError("edge endpoint out of range")
            if (arr[:, 0] == arr[:, 1]).any():
                raise ValueError("self-loops are not allowed")
        und = np.sort(arr, axis=1)
        uniq = np.unique(und, axis=0)
        if uniq.shape[0] != und.shape[0]:
            raise ValueError("duplicate edges are not allowed")
        heads = np.concatenate([uniq[:, 0], uniq[:, 1]])
        tails = np.concatenate([uniq[:, 1], uniq[:, 0]])
        order = np.lexsort((tails, heads))
        heads, tails = heads[order], tails[order]
        offsets = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(heads, minlength=n), out=offsets[1:])
        return cls(n=n, offsets=offsets, neighbors=tails)

    @property
    def num_edges(self) -> int:
        return self.neighbors.size // 2

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.offsets)

    def neighbors_of(self, v: int) -> np.ndarray:
        return self.neighbors[self.offsets[v]:self.offsets[v + 1]]

    def edge_array(self) -> np.ndarray:
        """All edges as an (m, 2) array with u < v, sorted lexicographically."""
        rows = np.repeat(np.arange(self.n, dtype=np.int64), self.degrees)
        keep = rows < self.neighbors
        return np.column_stack([rows[keep], self.neighbors[keep]])


@dataclass(frozen=True)
class GenParamsBA:
    """Barabási-Albert parameters: each arriving node attaches m edges."""

    n: int
    m: int
    seed: int

    def __post_init__(self):
        if not 1 <= self.m < self.n:
            raise ValueError(f"BA requires 1 <= m < n, got m={self.m}, n={self.n}")
        check_seed(self.seed)


@dataclass(frozen=True)
class GenParamsWS:
    """Watts-Strogatz parameters: ring degree k (even), rewiring probability p."""

    n: int
    k: int
    p: float
    seed: int

    def __post_init__(self):
        if self.k % 2 != 0:
            raise ValueError("WS ring degree k must be even")
        if not 0 < self.k < self.n:
            raise ValueError(f"WS requires 0 < k < n, got k={self.k}, n={self.n}")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("rewiring probability must be in [0, 1]")
        check_seed(self.seed)


def generate_ba(params: GenParamsBA) -> Graph:
    """Preferential-attachment graph with exactly m*(n-m) edges.

    Construction: m isolated seed nodes; the first arriving node connects to
    all of them; every later node draws m distinct targets from the
    repeated-endpoint urn (resampling on duplicates). Always connected.
    """
    n, m = params.n, params.m
    rng = generator(params.seed)
    edges = [(m, t) for t in range(m)]
    # Urn holds one entry per edge endpoint, so draws are degree-proportional.
    urn = list(range(m)) + [m] * m
    for source in range(m + 1, n):
        targets: set[int] = set()
        while len(targets) < m:
            t = urn[int(rng.integers(len(urn)))]
            targets.add(t)
        for t in targets:
            edges.append((source, t))
        urn.extend(targets)
        urn.extend([source] * m)
    return Graph.from_edges(n, edges)


_WS_MAX_RETRIES = 100


def generate_ws(params: GenParamsWS) -> Graph:
    """Small-world graph with exactly n*k/2 edges, resampled until connected.

    Ring lattice joining each node to its k/2 nearest neighbours per side;
    each ring edge is rewired with probability p, keeping the lower endpoint
    and drawing a fresh non-self, non-duplicate target (rewiring is skipped
    when no legal target exists). Disconnected draws retry with seed+1, up
    to 100 attempts.
    """
    for attempt in range(_WS_MAX_RETRIES):
        g = _ws_once(params.n, params.k, params.p, (params.seed + attempt) % 2**64)
        if is_connected(g):
            return g
    raise RuntimeError(
        f"Watts-Strogatz sampling produced no connected graph in "
        f"{_WS_MAX_RETRIES} attempts (n={params.n}, k={params.k}, p={params.p})"
    )


def _ws_once(n: int, k: int, p: float, seed: int) -> Graph:
    rng = generator(seed)
    adj: list[set[int]] = [set() for _ in range(n)]
    half = k // 2
    for j in range(1, half + 1):
        for i in range(n):
            adj[i].add((i + j) % n)
            adj[(i + j) % n].add(i)
    for j in range(1, half + 1):
        for i in range(n):
            if rng.random() >= p:
                continue
            if len(adj[i]) >= n - 1:
                continue  # node saturated, no legal rewiring target
            v = (i + j) % n
            w = int(rng.integers(n))
            while w == i or w in adj[i]:
                w = int(rng.integers(n))
            adj[i].discard(v)
            adj[v].discard(i)
            adj[i].add(w)
            adj[w].add(i)
    edges = [(u, v) for u in range(n) for v in adj[u] if u < v]
    return Graph.from_edges(n, edges)


@njit(cache=True)
def _bfs_fill(offsets, neighbors, source, max_depth, dist):
    n = offsets.shape[0] - 1
    order = np.empty(n, np.int64)
    dist[source] = 0
    order[0] = source
    head, tail = 0, 1
    while head < tail:
        v = order[head]
        head += 1
        d1 = dist[v] + 1
        if max_depth >= 0 and d1 > max_depth:
            continue
        for j in range(offsets[v], offsets[v + 1]):
            w = neighbors[j]
            if dist[w] < 0:
                dist[w] = d1
                order[tail] = w
                tail += 1
    return tail


def bfs_distances(g: Graph, source: int, max_depth: int | None = None) -> np.ndarray:
    """Hop distances from `source`; unreached (or beyond max_depth) = -1."""
    if not 0 <= source < g.n:
        raise ValueError(f"source {source} out of range for n={g.n}")
    dist = np.full(g.n, UNREACHED, dtype=np.int64)
    _bfs_fill(g.offsets, g.neighbors, source, -1 if max_depth is None else max_depth, dist)
    return dist


def is_connected(g: Graph) -> bool:
    dist = np.full(g.n, UNREACHED, dtype=np.int64)
    reached = _bfs_fill(g.offsets, g.neighbors, 0, -1, dist)
    return reached == g.n


@njit(cache=True)
def _brandes(offsets, neighbors, sources, is_target, out):
    """Brandes dependency accumulation over ordered (source, target) pairs.

    Targets are the nodes flagged in `is_target`; each popped node w credits
    its predecessors with sigma(v)/sigma(w) * (1_{w target} + delta(w)).
    Caller halves the result to convert ordered pairs to unordered.
    """
    n = offsets.shape[0] - 1
    dist = np.empty(n, np.int64)
    sigma = np.empty(n, np.float64)
    delta = np.empty(n, np.float64)
    order = np.empty(n, np.int64)
    for si in range(sources.shape[0]):
        s = sources[si]
        for i in range(n):
            dist[i] = -1
            sigma[i] = 0.0
            delta[i] = 0.0
        dist[s] = 0
        sigma[s] = 1.0
        order[0] = s
        head, tail = 0, 1
        while head < tail:
            v = order[head]
            head += 1
            d1 = dist[v] + 1
            for j in range(offsets[v], offsets[v + 1]):
                w = neighbors[j]
                if dist[w] < 0:
                    dist[w] = d1
                    order[tail] = w
                    tail += 1
                if dist[w] == d1:
                    sigma[w] += sigma[v]
        # Nodes come off in non-increasing distance; index 0 is s itself.
        for idx in range(tail - 1, 0, -1):
            w = order[idx]
            coeff = delta[w] + (1.0 if is_target[w] else 0.0)
            coeff /= sigma[w]
            dp = dist[w] - 1
            for j in range(offsets[w], offsets[w + 1]):
                v = neighbors[j]
                if dist[v] == dp:
                    delta[v] += sigma[v] * coeff
            out[w] += delta[w]
    return out


def betweenness(g: Graph) -> np.ndarray:
    """Unnormalized betweenness over unordered pairs, endpoints excluded."""
    out = np.zeros(g.n, dtype=np.float64)
    sources = np.arange(g.n, dtype=np.int64)
    is_target = np.ones(g.n, dtype=np.bool_)
    _brandes(g.offsets, g.neighbors, sources, is_target, out)
    out *= 0.5
    return out


def observed_betweenness(g: Graph, observed) -> np.ndarray:
    """Betweenness restricted to shortest paths between observed node pairs.

    For each v sums sigma(x,y|v)/sigma(x,y) over unordered pairs {x,y} of
    observed nodes with x,y != v. Empty or singleton observed sets yield
    all zeros.
    """
    obs = np.unique(np.asarray(list(observed) if isinstance(observed, (set, frozenset))
                               else observed, dtype=np.int64).reshape(-1))
    out = np.zeros(g.n, dtype=np.float64)
    if obs.size == 0:
        return out
    if obs.min() < 0 or obs.max() >= g.n:
        raise ValueError("observed node id out of range")
    is_target = np.zeros(g.n, dtype=np.bool_)
    is_target[obs] = True
    _brandes(g.offsets, g.neighbors, obs, is_target, out)
    out *= 0.5
    return out
