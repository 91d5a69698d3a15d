"""Deterministic dataset generation and the on-disk instance format.

A dataset is a directory holding `manifest.json` (config echo, instance
count, file hashes) and `instances.jsonl` with one record per line:

    {"schema": 1, "index": i, "config": {...}, "source": s, "beta": b,
     "t_h": t, "edges": [u0, v0, u1, v1, ...], "infected": [...],
     "observed": [...]}

Edges are flattened (u, v) pairs with u < v in lexicographic order; infected
and observed ids are sorted ascending. Instance i derives all its randomness
from the per-instance sub-seed split(master_seed, i), so datasets are
reproducible byte-for-byte and instances use disjoint RNG streams.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import Iterator

import numpy as np

from . import rng as rngmod
from .epidemic import BETA_CHOICES, STOP_FRACTION, EpidemicInstance, generate_instance
from .graphs import Graph

SCHEMA_VERSION = 1
MANIFEST_NAME = "manifest.json"
INSTANCES_NAME = "instances.jsonl"


class DatasetFormatError(ValueError):
    """A dataset file is missing, truncated, or violates the record schema."""


@dataclass(frozen=True)
class DatasetConfig:
    model: str
    n: int
    instance_count: int
    theta: float
    m: int = 4
    k: int = 8
    p: float = 0.3
    beta_choices: tuple = BETA_CHOICES
    stop_fraction: float = STOP_FRACTION
    seed: int = 0

    def __post_init__(self):
        if self.model not in ("ba", "ws"):
            raise ValueError(f"unknown network model {self.model!r}")
        if self.instance_count < 1:
            raise ValueError("instance_count must be >= 1")
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError("theta must be in [0, 1]")
        if not 0.0 < self.stop_fraction <= 1.0:
            raise ValueError("stop_fraction must be in (0, 1]")
        if not self.beta_choices or not all(0.0 <= b <= 1.0 for b in self.beta_choices):
            raise ValueError("beta_choices must be probabilities")
        object.__setattr__(self, "beta_choices", tuple(float(b) for b in self.beta_choices))
        rngmod.check_seed(self.seed)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["beta_choices"] = list(self.beta_choices)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetConfig":
        d = dict(d)
        d["beta_choices"] = tuple(d.get("beta_choices", BETA_CHOICES))
        return cls(**d)


def build_instance(cfg: DatasetConfig, index: int) -> EpidemicInstance:
    """Instance `index` of the dataset, from its dedicated sub-seed."""
    return generate_instance(
        cfg.model, cfg.n, cfg.theta, rngmod.instance_seed(cfg.seed, index),
        m=cfg.m, k=cfg.k, p=cfg.p, beta_choices=cfg.beta_choices,
        stop_fraction=cfg.stop_fraction)


def record_dict(cfg: DatasetConfig, index: int, instance: EpidemicInstance) -> dict:
    return {
        "schema": SCHEMA_VERSION,
        "index": index,
        "config": cfg.to_dict(),
        "source": int(instance.source),
        "beta": instance.beta,
        "t_h": int(instance.t_h),
        "edges": instance.graph.edge_array().ravel().tolist(),
        "infected": instance.infected.tolist(),
        "observed": instance.observed.tolist(),
    }


def _record_line(args) -> str:
    cfg, index = args
    rec = record_dict(cfg, index, build_instance(cfg, index))
    return json.dumps(rec, separators=(",", ":"))


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def generate_dataset(cfg: DatasetConfig, out_path, jobs: int = 1) -> dict:
    """Write `instances.jsonl` and `manifest.json` under `out_path`; returns
    the manifest. Generation parallelizes over instances; output bytes are
    independent of `jobs`."""
    out_dir = Path(out_path)
    out_dir.mkdir(parents=True, exist_ok=True)
    instances_path = out_dir / INSTANCES_NAME
    work = [(cfg, i) for i in range(cfg.instance_count)]
    try:
        with open(instances_path, "w") as fh:
            if jobs > 1:
                with ProcessPoolExecutor(max_workers=jobs) as pool:
                    for line in pool.map(_record_line, work, chunksize=4):
                        fh.write(line + "\n")
            else:
                for item in work:
                    fh.write(_record_line(item) + "\n")
    except OSError as exc:
        raise OSError(f"failed writing dataset to {instances_path}: {exc}") from exc
    manifest = {
        "schema": SCHEMA_VERSION,
        "config": cfg.to_dict(),
        "instance_count": cfg.instance_count,
        "files": [{
            "name": INSTANCES_NAME,
            "sha256": _sha256(instances_path),
            "instances": cfg.instance_count,
        }],
    }
    (out_dir / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2) + "\n")
    return manifest


def read_manifest(path) -> dict:
    manifest_path = Path(path) / MANIFEST_NAME
    if not manifest_path.exists():
        raise DatasetFormatError(f"{manifest_path}: manifest not found")
    manifest = json.loads(manifest_path.read_text())
    if manifest.get("schema") != SCHEMA_VERSION:
        raise DatasetFormatError(
            f"{manifest_path}: schema {manifest.get('schema')!r} not supported "
            f"(expected {SCHEMA_VERSION})")
    return manifest


def _instance_from_record(rec: dict, where: str) -> EpidemicInstance:
    try:
        cfg = DatasetConfig.from_dict(rec["config"])
        edges = np.asarray(rec["edges"], dtype=np.int64).reshape(-1, 2)
        g = Graph.from_edges(cfg.n, edges)
        instance = EpidemicInstance(
            graph=g, source=rec["source"], beta=rec["beta"], t_h=rec["t_h"],
            infected=np.asarray(rec["infected"], dtype=np.int64),
            observed=np.asarray(rec["observed"], dtype=np.int64),
            theta=cfg.theta)
    except (KeyError, TypeError, ValueError) as exc:
        raise DatasetFormatError(f"{where}: invalid record: {exc}") from exc
    if instance.infected.size < math.ceil(cfg.stop_fraction * cfg.n):
        raise DatasetFormatError(
            f"{where}: infected count {instance.infected.size} below the "
            f"stop rule {cfg.stop_fraction} * {cfg.n}")
    return instance


def read_records(path) -> Iterator[dict]:
    """Stream raw record dicts, validating schema and line integrity."""
    read_manifest(path)
    instances_path = Path(path) / INSTANCES_NAME
    if not instances_path.exists():
        raise DatasetFormatError(f"{instances_path}: instance file not found")
    with open(instances_path) as fh:
        for lineno, line in enumerate(fh, start=1):
            where = f"{instances_path}:{lineno}"
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetFormatError(f"{where}: corrupt record: {exc}") from exc
            if rec.get("schema") != SCHEMA_VERSION:
                raise DatasetFormatError(
                    f"{where}: record schema {rec.get('schema')!r} not supported")
            if rec.get("index") != lineno - 1:
                raise DatasetFormatError(
                    f"{where}: index {rec.get('index')!r} out of order")
            yield rec


def read_dataset(path) -> Iterator[EpidemicInstance]:
    """Stream validated EpidemicInstance objects with bounded memory."""
    instances_path = Path(path) / INSTANCES_NAME
    for rec in read_records(path):
        yield _instance_from_record(rec, f"{instances_path}:{rec['index'] + 1}")
