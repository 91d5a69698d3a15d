"""Two-layer graph convolutional network with hand-written forward and
backward passes, binary cross-entropy masked to unobserved nodes, Adam, and
validation-based model selection.

Forward pass:  scores = sigmoid(A_hat @ relu(A_hat @ X @ W1 + b1) @ w2 + b2)
with A_hat the symmetrically renormalized adjacency with self-loops,
A_hat = D~^{-1/2} (A + I) D~^{-1/2}.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import rng as rngmod
from .epidemic import EpidemicInstance
from .features import FEATURE_COLUMNS, FeatureMatrix, compute_features, normalize_features
from .graphs import Graph
from .metrics import auc

CHECKPOINT_SCHEMA = 1

# BCE probability clamp; keeps log() finite at saturated scores.
_CLAMP = 1e-7

_PARAM_NAMES = ("w1", "b1", "w2", "b2")


@dataclass
class GcnModel:
    """Parameters of the two-layer GCN. `w2` is the single output column."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray  # 0-d array

    @classmethod
    def init(cls, in_dim: int = len(FEATURE_COLUMNS), hidden: int = 128,
             seed: int = 0) -> "GcnModel":
        """Glorot-uniform weights, zero biases, seeded."""
        rng = rngmod.generator(seed)
        lim1 = np.sqrt(6.0 / (in_dim + hidden))
        lim2 = np.sqrt(6.0 / (hidden + 1))
        return cls(
            w1=rng.uniform(-lim1, lim1, size=(in_dim, hidden)),
            b1=np.zeros(hidden),
            w2=rng.uniform(-lim2, lim2, size=hidden),
            b2=np.zeros(()),
        )

    @property
    def in_dim(self) -> int:
        return self.w1.shape[0]

    @property
    def hidden(self) -> int:
        return self.w1.shape[1]

    def params(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in _PARAM_NAMES}

    def copy(self) -> "GcnModel":
        return GcnModel(**{k: v.copy() for k, v in self.params().items()})


@dataclass
class AdamState:
    """First/second moment accumulators shaped like the model, plus step count."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0

    @classmethod
    def init_like(cls, model: GcnModel) -> "AdamState":
        return cls(m={k: np.zeros_like(p) for k, p in model.params().items()},
                   v={k: np.zeros_like(p) for k, p in model.params().items()})


@dataclass
class TrainConfig:
    epochs: int = 1000
    lr: float = 1e-3
    batch_size: int = 128
    validation_every: int = 50
    validation_fraction: float = 0.1
    hidden: int = 128
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if min(self.epochs, self.batch_size, self.validation_every, self.hidden) < 1:
            raise ValueError("epochs, batch_size, validation_every, hidden must be >= 1")
        if self.lr <= 0 or self.eps <= 0:
            raise ValueError("lr and eps must be positive")
        if not 0.0 < self.validation_fraction < 1.0:
            raise ValueError("validation_fraction must be in (0, 1)")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("Adam betas must be in [0, 1)")
        rngmod.check_seed(self.seed)


def normalize_adjacency(g: Graph) -> sp.csr_matrix:
    """Symmetric renormalized adjacency with self-loops."""
    deg = g.degrees + 1.0
    d = 1.0 / np.sqrt(deg)
    rows = np.concatenate([np.repeat(np.arange(g.n, dtype=np.int64), g.degrees),
                           np.arange(g.n, dtype=np.int64)])
    cols = np.concatenate([g.neighbors, np.arange(g.n, dtype=np.int64)])
    data = d[rows] * d[cols]
    return sp.csr_matrix((data, (rows, cols)), shape=(g.n, g.n))


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def forward(model: GcnModel, adj: sp.csr_matrix, X) -> tuple[np.ndarray, dict]:
    """Node scores in (0, 1) plus the cache needed by `backward`."""
    x = X.values if isinstance(X, FeatureMatrix) else np.asarray(X, dtype=np.float64)
    n = adj.shape[0]
    if x.shape != (n, model.in_dim):
        raise ValueError(f"feature matrix shape {x.shape} does not match "
                         f"(n={n}, in_dim={model.in_dim})")
    z = adj @ x
    pre = z @ model.w1 + model.b1
    h = np.maximum(pre, 0.0)
    msg = adj @ h
    logits = msg @ model.w2 + model.b2
    scores = _sigmoid(logits)
    cache = {"adj": adj, "z": z, "pre": pre, "msg": msg, "scores": scores,
             "w2": model.w2}
    return scores, cache


def masked_bce(scores: np.ndarray, labels: np.ndarray, mask: np.ndarray) -> float:
    """Mean binary cross-entropy over the masked nodes, probabilities clamped
    to [1e-7, 1 - 1e-7]."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ValueError("masked BCE needs a nonempty mask")
    s = np.clip(scores[mask], _CLAMP, 1.0 - _CLAMP)
    y = np.asarray(labels, dtype=np.float64)[mask]
    return float(-np.mean(y * np.log(s) + (1.0 - y) * np.log(1.0 - s)))


def backward(cache: dict, labels: np.ndarray, mask: np.ndarray,
             scale: float | None = None) -> dict[str, np.ndarray]:
    """Exact gradients of masked_bce(forward(...)) w.r.t. the parameters.

    `scale` overrides the default 1/|mask| weighting so several graphs can
    share one batch-level normalizer.
    """
    mask = np.asarray(mask, dtype=bool)
    if scale is None:
        count = int(mask.sum())
        if count == 0:
            raise ValueError("masked BCE needs a nonempty mask")
        scale = 1.0 / count
    y = np.asarray(labels, dtype=np.float64)
    dlogits = np.zeros_like(cache["scores"])
    dlogits[mask] = (cache["scores"][mask] - y[mask]) * scale
    db2 = dlogits.sum()
    dw2 = cache["msg"].T @ dlogits
    dmsg = np.outer(dlogits, cache["w2"])
    dh = cache["adj"] @ dmsg  # adj is symmetric
    dpre = dh * (cache["pre"] > 0.0)
    dw1 = cache["z"].T @ dpre
    db1 = dpre.sum(axis=0)
    return {"w1": dw1, "b1": db1, "w2": dw2, "b2": np.asarray(db2)}


def adam_step(model: GcnModel, grads: dict[str, np.ndarray], state: AdamState,
              lr: float, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> tuple[GcnModel, AdamState]:
    """Standard bias-corrected Adam update, applied in place."""
    state.step += 1
    t = state.step
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    for name, p in model.params().items():
        g = grads[name]
        state.m[name] = beta1 * state.m[name] + (1.0 - beta1) * g
        state.v[name] = beta2 * state.v[name] + (1.0 - beta2) * g * g
        p -= lr * (state.m[name] / c1) / (np.sqrt(state.v[name] / c2) + eps)
    return model, state


@dataclass
class TrainingExample:
    """One instance prepared for training: propagation matrix, normalized
    features, infection labels, and the unobserved-node loss mask."""

    adj: sp.csr_matrix
    features: np.ndarray
    labels: np.ndarray
    mask: np.ndarray


def prepare_example(instance: EpidemicInstance) -> TrainingExample:
    feats = normalize_features(compute_features(instance.graph, instance.observed))
    return TrainingExample(
        adj=normalize_adjacency(instance.graph),
        features=feats.values,
        labels=instance.infected_mask().astype(np.float64),
        mask=instance.pool_mask(),
    )


def score_instance(model: GcnModel, instance: EpidemicInstance) -> np.ndarray:
    """Scores for a raw instance (features computed on the fly)."""
    example = prepare_example(instance)
    scores, _ = forward(model, example.adj, example.features)
    return scores


def _mean_validation_auc(model: GcnModel, examples: list[TrainingExample]) -> float | None:
    vals = []
    for ex in examples:
        scores, _ = forward(model, ex.adj, ex.features)
        a = auc(scores, ex.labels, ex.mask)
        if a is not None:
            vals.append(a)
    return float(np.mean(vals)) if vals else None


def train(examples: list[TrainingExample], config: TrainConfig,
          ) -> tuple[GcnModel, dict]:
    """Train on shuffled mini-batches of graphs; keep the parameter snapshot
    with the best validation AUC (ties resolved to the earliest).

    Batch loss is the BCE summed over every masked node of every graph in
    the batch, divided by the total masked-node count. Validation runs every
    `validation_every` epochs and after the final epoch.
    """
    if len(examples) < 2:
        raise ValueError("training needs at least 2 instances")
    in_dim = examples[0].features.shape[1]

    split_rng = rngmod.generator(rngmod.role_seed(config.seed, "split"))
    order = split_rng.permutation(len(examples))
    n_val = min(max(1, round(config.validation_fraction * len(examples))),
                len(examples) - 1)
    val_idx, train_idx = order[:n_val], order[n_val:]
    val_examples = [examples[i] for i in val_idx]
    train_examples = [examples[i] for i in train_idx]

    model = GcnModel.init(in_dim=in_dim, hidden=config.hidden,
                          seed=rngmod.role_seed(config.seed, "init"))
    state = AdamState.init_like(model)
    shuffle_rng = rngmod.generator(rngmod.role_seed(config.seed, "shuffle"))

    loss_history: list[float] = []
    val_history: list[tuple[int, float]] = []
    best_auc = -np.inf
    best_epoch: int | None = None
    best_model = model.copy()

    for epoch in range(1, config.epochs + 1):
        perm = shuffle_rng.permutation(len(train_examples))
        epoch_loss_sum = 0.0
        epoch_mask_total = 0
        for start in range(0, len(perm), config.batch_size):
            batch = [train_examples[i] for i in perm[start:start + config.batch_size]]
            total_masked = sum(int(ex.mask.sum()) for ex in batch)
            scale = 1.0 / total_masked
            grads = {k: np.zeros_like(p) for k, p in model.params().items()}
            batch_loss = 0.0
            for ex in batch:
                scores, cache = forward(model, ex.adj, ex.features)
                batch_loss += masked_bce(scores, ex.labels, ex.mask) * int(ex.mask.sum())
                g = backward(cache, ex.labels, ex.mask, scale=scale)
                for k in grads:
                    grads[k] += g[k]
            adam_step(model, grads, state, config.lr,
                      beta1=config.beta1, beta2=config.beta2, eps=config.eps)
            epoch_loss_sum += batch_loss
            epoch_mask_total += total_masked
        loss_history.append(epoch_loss_sum / epoch_mask_total)

        if epoch % config.validation_every == 0 or epoch == config.epochs:
            val_auc = _mean_validation_auc(model, val_examples)
            if val_auc is not None:
                val_history.append((epoch, val_auc))
                if val_auc > best_auc:
                    best_auc = val_auc
                    best_epoch = epoch
                    best_model = model.copy()

    if best_epoch is None:
        # No instance ever had a two-class validation pool; fall back to the
        # final parameters.
        best_model = model.copy()
    history = {"train_loss": loss_history, "validation": val_history,
               "best_epoch": best_epoch}
    return best_model, history


def save_checkpoint(path, model: GcnModel, config: TrainConfig, history: dict) -> None:
    """Versioned JSON checkpoint with fixed field order (schema, shapes,
    feature columns, params, config, history)."""
    payload = {
        "schema": CHECKPOINT_SCHEMA,
        "kind": "gcn-checkpoint",
        "in_dim": model.in_dim,
        "hidden": model.hidden,
        "feature_columns": list(FEATURE_COLUMNS),
        "params": {
            "w1": model.w1.tolist(),
            "b1": model.b1.tolist(),
            "w2": model.w2.tolist(),
            "b2": float(model.b2),
        },
        "train_config": {
            "epochs": config.epochs, "lr": config.lr,
            "batch_size": config.batch_size,
            "validation_every": config.validation_every,
            "validation_fraction": config.validation_fraction,
            "hidden": config.hidden, "beta1": config.beta1,
            "beta2": config.beta2, "eps": config.eps, "seed": config.seed,
        },
        "history": {
            "train_loss": history.get("train_loss", []),
            "validation": [[int(e), float(a)] for e, a in history.get("validation", [])],
            "best_epoch": history.get("best_epoch"),
        },
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def load_checkpoint(path) -> tuple[GcnModel, dict]:
    payload = json.loads(Path(path).read_text())
    if payload.get("schema") != CHECKPOINT_SCHEMA or payload.get("kind") != "gcn-checkpoint":
        raise ValueError(f"{path}: not a recognized checkpoint")
    if tuple(payload["feature_columns"]) != FEATURE_COLUMNS:
        raise ValueError(f"{path}: checkpoint feature schema does not match "
                         f"this build's feature columns")
    params = payload["params"]
    model = GcnModel(
        w1=np.asarray(params["w1"], dtype=np.float64),
        b1=np.asarray(params["b1"], dtype=np.float64),
        w2=np.asarray(params["w2"], dtype=np.float64),
        b2=np.asarray(params["b2"], dtype=np.float64),
    )
    if model.w1.shape != (payload["in_dim"], payload["hidden"]):
        raise ValueError(f"{path}: parameter shapes disagree with header")
    return model, payload
