"""Per-node features computed from a graph and its observed infected set,
plus the per-instance z-score normalization applied before model input.

Column order is fixed:

    0  infection_observation   1 if the node is observed infected, else 0
    1  degree
    2  contact_1               |N_1(v) ∩ O| / |N_1(v)|
    3  contact_2               |N_2(v) ∩ O| / |N_2(v)|
    4  contact_3               |N_3(v) ∩ O| / |N_3(v)|
    5  neighbourhood_contact_2 |N_{<=2}(v) ∩ O| / |N_{<=2}(v)|
    6  betweenness
    7  observed_betweenness

N_k(v) is the set of nodes at hop distance exactly k from v; empty
neighbourhoods contribute 0. Normalization z-scores columns 1..7 with the
population standard deviation over the instance's nodes; the binary column 0
is left untouched and constant columns map to all zeros.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .graphs import Graph, betweenness, observed_betweenness

FEATURE_COLUMNS = (
    "infection_observation",
    "degree",
    "contact_1",
    "contact_2",
    "contact_3",
    "neighbourhood_contact_2",
    "betweenness",
    "observed_betweenness",
)

# Row-block size for the sparse neighbourhood expansion; bounds memory on
# graphs with hubs without changing results.
_CHUNK_ROWS = 2048


@dataclass
class FeatureMatrix:
    """n x 8 feature matrix in the fixed column order above."""

    values: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        if self.values.ndim != 2 or self.values.shape[1] != len(FEATURE_COLUMNS):
            raise ValueError(f"feature matrix must be n x {len(FEATURE_COLUMNS)}")


def _adjacency(g: Graph) -> sp.csr_matrix:
    data = np.ones(g.neighbors.size, dtype=np.float64)
    return sp.csr_matrix((data, g.neighbors, g.offsets), shape=(g.n, g.n))


def _binarize(m: sp.csr_matrix) -> sp.csr_matrix:
    m.data.fill(1.0)
    return m


def _observed_mask(g: Graph, observed) -> np.ndarray:
    obs = np.asarray(list(observed) if isinstance(observed, (set, frozenset))
                     else observed, dtype=np.int64).reshape(-1)
    mask = np.zeros(g.n, dtype=bool)
    if obs.size:
        if obs.min() < 0 or obs.max() >= g.n:
            raise ValueError("observed node id out of range")
        mask[obs] = True
    return mask


def _layer_counts(g: Graph, obs_vec: np.ndarray, max_k: int):
    """Sizes of the exact-distance-k neighbourhoods and their overlap with
    the observed set, for k = 1..max_k. Exact via boolean frontier algebra
    on the sparse adjacency, processed in row blocks."""
    adj = _adjacency(g)
    sizes = [g.degrees.astype(np.float64)]
    overlaps = [adj @ obs_vec]
    if max_k == 1:
        return sizes, overlaps
    n = g.n
    n2 = np.zeros(n)
    n2o = np.zeros(n)
    n3 = np.zeros(n)
    n3o = np.zeros(n)
    for start in range(0, n, _CHUNK_ROWS):
        rows = np.arange(start, min(start + _CHUNK_ROWS, n))
        a_r = adj[rows]
        eye_r = sp.csr_matrix(
            (np.ones(rows.size), rows, np.arange(rows.size + 1)), shape=(rows.size, n))
        p2 = _binarize(a_r @ adj)
        f2 = p2 - p2.multiply(a_r) - p2.multiply(eye_r)
        f2.eliminate_zeros()
        n2[rows] = f2.getnnz(axis=1)
        n2o[rows] = f2 @ obs_vec
        if max_k >= 3:
            p3 = _binarize(f2 @ adj)
            seen = a_r + eye_r + f2  # disjoint supports, still 0/1-valued
            f3 = p3 - p3.multiply(seen)
            f3.eliminate_zeros()
            n3[rows] = f3.getnnz(axis=1)
            n3o[rows] = f3 @ obs_vec
    sizes.append(n2)
    overlaps.append(n2o)
    if max_k >= 3:
        sizes.append(n3)
        overlaps.append(n3o)
    return sizes, overlaps


def _safe_ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    out = np.zeros_like(num, dtype=np.float64)
    np.divide(num, den, out=out, where=den > 0)
    return out


def contact_k(g: Graph, observed, k: int) -> np.ndarray:
    """Fraction of each node's exact-distance-k neighbourhood that is
    observed infected; 0 where the neighbourhood is empty."""
    if k not in (1, 2, 3):
        raise ValueError("contact feature defined for k in {1, 2, 3}")
    obs_vec = _observed_mask(g, observed).astype(np.float64)
    sizes, overlaps = _layer_counts(g, obs_vec, k)
    return _safe_ratio(overlaps[k - 1], sizes[k - 1])


def neighbourhood_contact_2(g: Graph, observed) -> np.ndarray:
    """Observed fraction of the distance-<=2 neighbourhood (v excluded)."""
    obs_vec = _observed_mask(g, observed).astype(np.float64)
    sizes, overlaps = _layer_counts(g, obs_vec, 2)
    return _safe_ratio(overlaps[0] + overlaps[1], sizes[0] + sizes[1])


def compute_features(g: Graph, observed) -> FeatureMatrix:
    """Raw n x 8 feature matrix for one instance."""
    obs_mask = _observed_mask(g, observed)
    obs_vec = obs_mask.astype(np.float64)
    sizes, overlaps = _layer_counts(g, obs_vec, 3)
    cols = np.empty((g.n, len(FEATURE_COLUMNS)), dtype=np.float64)
    cols[:, 0] = obs_vec
    cols[:, 1] = g.degrees
    cols[:, 2] = _safe_ratio(overlaps[0], sizes[0])
    cols[:, 3] = _safe_ratio(overlaps[1], sizes[1])
    cols[:, 4] = _safe_ratio(overlaps[2], sizes[2])
    cols[:, 5] = _safe_ratio(overlaps[0] + overlaps[1], sizes[0] + sizes[1])
    cols[:, 6] = betweenness(g)
    cols[:, 7] = observed_betweenness(g, np.flatnonzero(obs_mask))
    return FeatureMatrix(values=cols, normalized=False)


def normalize_features(raw: FeatureMatrix) -> FeatureMatrix:
    """Z-score columns 1..7 to zero mean and unit population variance within
    the instance; the binary column 0 passes through, constant columns
    become all zeros."""
    if raw.normalized:
        raise ValueError("feature matrix is already normalized")
    vals = raw.values.copy()
    for c in range(1, vals.shape[1]):
        col = vals[:, c]
        mu = col.mean()
        sd = np.sqrt(np.mean((col - mu) ** 2))
        # Relative threshold: a numerically-constant column must not blow up
        # into +-1 noise through division by a ~1e-17 std.
        if sd <= 1e-12 * max(1.0, abs(mu)):
            vals[:, c] = 0.0
        else:
            vals[:, c] = (col - mu) / sd
    return FeatureMatrix(values=vals, normalized=True)
