"""AUC and top-k% precision over the evaluation pool, the observed-betweenness
baseline scorer, and dataset-level aggregation.

The evaluation pool of an instance is every node not observed as infected;
within it the positives are the asymptomatic nodes. AUC uses the
Mann-Whitney formulation (ties count 0.5); top-k takes k = 1% of the pool,
rounded half away from zero with a floor of one node.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .epidemic import EpidemicInstance
from .graphs import observed_betweenness

TOP_K_FRACTION = 0.01


def _tied_ranks(x: np.ndarray) -> np.ndarray:
    """1-based ranks with ties averaged."""
    order = np.argsort(x, kind="stable")
    sorted_x = x[order]
    ranks = np.empty(x.size, dtype=np.float64)
    # Boundaries of runs of equal values in the sorted order.
    boundary = np.flatnonzero(np.diff(sorted_x)) + 1
    starts = np.concatenate([[0], boundary])
    ends = np.concatenate([boundary, [x.size]])
    for s, e in zip(starts, ends):
        ranks[order[s:e]] = 0.5 * (s + e + 1)
    return ranks


def auc(scores: np.ndarray, labels: np.ndarray, pool: np.ndarray) -> float | None:
    """Probability a random positive outranks a random negative within the
    pool; ties count 0.5. Returns None when the pool is single-class."""
    pool = np.asarray(pool, dtype=bool)
    s = np.asarray(scores, dtype=np.float64)[pool]
    y = np.asarray(labels)[pool].astype(bool)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        return None
    ranks = _tied_ranks(s)
    u = ranks[y].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def _round_half_away(x: float) -> int:
    return int(np.floor(x + 0.5))


def top_k_precision(scores: np.ndarray, labels: np.ndarray, pool: np.ndarray,
                    fraction: float = TOP_K_FRACTION) -> float:
    """Fraction of positives among the k highest-scored pool nodes, with
    k = max(1, round(fraction * |pool|)) and score ties broken by ascending
    node id."""
    pool = np.asarray(pool, dtype=bool)
    pool_ids = np.flatnonzero(pool)
    if pool_ids.size == 0:
        raise ValueError("top-k precision needs a nonempty pool")
    k = max(1, _round_half_away(fraction * pool_ids.size))
    s = np.asarray(scores, dtype=np.float64)[pool_ids]
    top = np.lexsort((pool_ids, -s))[:k]
    y = np.asarray(labels)[pool_ids]
    return float(np.mean(y[top] != 0))


def baseline_scores(instance: EpidemicInstance) -> np.ndarray:
    """Observed betweenness used directly as a ranking score."""
    return observed_betweenness(instance.graph, instance.observed)


@dataclass
class InstanceMetrics:
    index: int
    auc: float | None
    top_k_precision: float
    pool_size: int
    k: int


@dataclass
class EvalReport:
    """Per-instance metrics plus mean / population-std aggregates.

    Instances whose pool is single-class have no AUC; they are excluded from
    the AUC aggregate and surfaced through `auc_undefined`.
    """

    instances: list[InstanceMetrics]
    fraction: float = TOP_K_FRACTION

    def _agg(self, values: list[float]) -> dict:
        if not values:
            return {"mean": None, "std": None, "count": 0}
        arr = np.asarray(values, dtype=np.float64)
        return {"mean": float(arr.mean()), "std": float(arr.std()),
                "count": int(arr.size)}

    def aggregate(self) -> dict:
        aucs = [r.auc for r in self.instances if r.auc is not None]
        topks = [r.top_k_precision for r in self.instances]
        out = {"instances": len(self.instances), "fraction": self.fraction,
               "auc": self._agg(aucs), "top_k_precision": self._agg(topks)}
        out["auc"]["undefined_count"] = len(self.instances) - len(aucs)
        return out

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["instance_id", "auc", "top_k_precision",
                             "pool_size", "k"])
            for r in self.instances:
                writer.writerow([r.index,
                                 "" if r.auc is None else repr(r.auc),
                                 repr(r.top_k_precision), r.pool_size, r.k])

    def write_aggregate_json(self, path, extra: dict | None = None) -> None:
        payload = dict(extra or {})
        payload.update(self.aggregate())
        Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def evaluate_scored(instances, per_instance_scores, fraction: float = TOP_K_FRACTION,
                    ) -> EvalReport:
    """Build an EvalReport from precomputed score vectors (one per instance)."""
    rows = []
    for idx, (instance, scores) in enumerate(zip(instances, per_instance_scores)):
        pool = instance.pool_mask()
        labels = instance.infected_mask()
        pool_size = int(pool.sum())
        k = max(1, _round_half_away(fraction * pool_size))
        rows.append(InstanceMetrics(
            index=idx,
            auc=auc(scores, labels, pool),
            top_k_precision=top_k_precision(scores, labels, pool, fraction),
            pool_size=pool_size,
            k=k,
        ))
    return EvalReport(instances=rows, fraction=fraction)


def evaluate(score_fn, instances, fraction: float = TOP_K_FRACTION) -> EvalReport:
    """Score every instance with `score_fn(instance)` and aggregate."""
    instances = list(instances)
    if not instances:
        raise ValueError("evaluation needs a nonempty dataset")
    return evaluate_scored(instances, (score_fn(i) for i in instances), fraction)
