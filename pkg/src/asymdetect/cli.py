"""Command-line front end for the full pipeline:

    asymdetect generate  --model ws --nodes 3000 --instances 1000 \
                         --theta 0.9 --seed 1 --out data/ws3k-t90
    asymdetect train     --dataset data/ws3k-t90 --out runs/model
    asymdetect eval      --dataset data/ws3k-t50 --checkpoint runs/model/checkpoint.json \
                         --baseline --out runs/eval
    asymdetect report    --inputs runs/eval/*-aggregate.json --out table.csv

Every run emits a `run_manifest.json` (command, config echo, seed, output
hashes, wall-clock runtime) sufficient to re-run it identically. When --out
is omitted for train/eval/report, outputs go to a timestamped directory
under $ASYMDETECT_OUT (default ./runs).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .dataset import (DatasetConfig, DatasetFormatError, generate_dataset,
                      read_dataset, read_manifest, _sha256)
from .features import FEATURE_COLUMNS
from .gcn import (TrainConfig, load_checkpoint, prepare_example, save_checkpoint,
                  score_instance, train)
from .metrics import TOP_K_FRACTION, baseline_scores, evaluate_scored

OUT_ENV_VAR = "ASYMDETECT_OUT"


def _default_out(command: str) -> Path:
    root = Path(os.environ.get(OUT_ENV_VAR, "runs"))
    stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%SZ")
    return root / f"{stamp}-{command}"


def _write_run_manifest(out_dir: Path, command: str, config: dict, seed: int | None,
                        outputs: list[Path], started: float) -> None:
    manifest = {
        "command": command,
        "config": config,
        "seed": seed,
        "outputs": {p.name: _sha256(p) for p in outputs if p.exists()},
        "runtime_seconds": round(time.time() - started, 3),
        "started_at": datetime.fromtimestamp(started, timezone.utc).isoformat(),
    }
    (out_dir / "run_manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def _cmd_generate(args) -> int:
    started = time.time()
    cfg = DatasetConfig(
        model=args.model, n=args.nodes, instance_count=args.instances,
        theta=args.theta, m=args.m, k=args.k, p=args.p,
        beta_choices=tuple(float(b) for b in args.beta_choices.split(",")),
        stop_fraction=args.stop_fraction, seed=args.seed)
    out_dir = Path(args.out)
    generate_dataset(cfg, out_dir, jobs=args.jobs)
    _write_run_manifest(out_dir, "generate", cfg.to_dict(), args.seed,
                        [out_dir / "instances.jsonl", out_dir / "manifest.json"],
                        started)
    print(f"wrote {cfg.instance_count} instances to {out_dir}")
    return 0


def _prepare_worker(instance):
    return prepare_example(instance)


def _prepare_examples(dataset_path: str, jobs: int):
    instances = list(read_dataset(dataset_path))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return instances, list(pool.map(_prepare_worker, instances, chunksize=1))
    return instances, [prepare_example(i) for i in instances]


def _cmd_train(args) -> int:
    started = time.time()
    config = TrainConfig(
        epochs=args.epochs, lr=args.lr, batch_size=args.batch_size,
        validation_every=args.val_every, validation_fraction=args.val_fraction,
        hidden=args.hidden, seed=args.seed)
    out_dir = Path(args.out) if args.out else _default_out("train")
    out_dir.mkdir(parents=True, exist_ok=True)
    _, examples = _prepare_examples(args.dataset, args.jobs)
    model, history = train(examples, config)
    ckpt_path = out_dir / "checkpoint.json"
    save_checkpoint(ckpt_path, model, config, history)
    hist_path = out_dir / "history.csv"
    val_by_epoch = dict(history["validation"])
    with open(hist_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "validation_auc"])
        for epoch, loss in enumerate(history["train_loss"], start=1):
            writer.writerow([epoch, repr(loss),
                             repr(val_by_epoch[epoch]) if epoch in val_by_epoch else ""])
    _write_run_manifest(out_dir, "train",
                        {"dataset": str(args.dataset),
                         "epochs": config.epochs, "lr": config.lr,
                         "batch_size": config.batch_size,
                         "validation_every": config.validation_every,
                         "validation_fraction": config.validation_fraction,
                         "hidden": config.hidden},
                        args.seed, [ckpt_path, hist_path], started)
    best = history["best_epoch"]
    print(f"trained {config.epochs} epochs; best validation epoch: {best}; "
          f"checkpoint: {ckpt_path}")
    return 0


def _score_model_worker(args):
    instance, ckpt_path = args
    from .gcn import load_checkpoint as _load
    model, _ = _load(ckpt_path)
    return score_instance(model, instance)


def _eval_one_dataset(dataset_path: Path, args, out_dir: Path) -> list[dict]:
    manifest = read_manifest(dataset_path)
    ds_cfg = manifest["config"]
    instances = list(read_dataset(dataset_path))
    name = dataset_path.name or "dataset"
    methods: list[tuple[str, list[np.ndarray]]] = []
    if args.checkpoint:
        model, payload = load_checkpoint(args.checkpoint)
        if model.in_dim != len(FEATURE_COLUMNS):
            raise ValueError("checkpoint input width does not match the feature schema")
        if args.jobs > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                scores = list(pool.map(_score_model_worker,
                                       [(i, args.checkpoint) for i in instances],
                                       chunksize=1))
        else:
            scores = [score_instance(model, i) for i in instances]
        methods.append(("gnn", scores))
    if args.baseline:
        methods.append(("baseline", [baseline_scores(i) for i in instances]))
    if args.dump_features:
        from .gcn import prepare_example as _prep
        dump_dir = Path(args.dump_features)
        dump_dir.mkdir(parents=True, exist_ok=True)
        for idx, inst in enumerate(instances):
            ex = _prep(inst)
            with open(dump_dir / f"{name}-features-{idx}.csv", "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["node_id", *FEATURE_COLUMNS])
                for v in range(inst.graph.n):
                    writer.writerow([v, *[repr(x) for x in ex.features[v]]])
    rows = []
    for method, scores in methods:
        report = evaluate_scored(instances, scores, fraction=args.fraction)
        extra = {"method": method, "dataset": str(dataset_path),
                 "model": ds_cfg["model"], "n": ds_cfg["n"], "theta": ds_cfg["theta"]}
        report.write_csv(out_dir / f"{name}-{method}-instances.csv")
        report.write_aggregate_json(out_dir / f"{name}-{method}-aggregate.json",
                                    extra=extra)
        agg = report.aggregate()
        rows.append({**extra, **agg})
        auc_mean = agg["auc"]["mean"]
        print(f"{name} [{method}] auc_mean="
              f"{'n/a' if auc_mean is None else f'{auc_mean:.4f}'} "
              f"topk_mean={agg['top_k_precision']['mean']:.4f} "
              f"({agg['instances']} instances)")
    return rows


def _cmd_eval(args) -> int:
    started = time.time()
    if not args.checkpoint and not args.baseline:
        raise ValueError("nothing to evaluate: pass --checkpoint and/or --baseline")
    out_dir = Path(args.out) if args.out else _default_out("eval")
    out_dir.mkdir(parents=True, exist_ok=True)
    root = Path(args.dataset)
    if args.sweep:
        datasets = sorted(p.parent for p in root.glob("*/manifest.json"))
        if not datasets:
            raise DatasetFormatError(f"{root}: no dataset directories found for sweep")
    else:
        datasets = [root]
    all_rows = []
    for ds in datasets:
        all_rows.extend(_eval_one_dataset(ds, args, out_dir))
    if args.sweep:
        sweep_path = out_dir / "sweep.csv"
        with open(sweep_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["dataset", "method", "model", "n", "theta",
                             "auc_mean", "auc_std", "auc_undefined",
                             "topk_mean", "topk_std", "instances"])
            for r in all_rows:
                writer.writerow([
                    r["dataset"], r["method"], r["model"], r["n"], r["theta"],
                    r["auc"]["mean"], r["auc"]["std"], r["auc"]["undefined_count"],
                    r["top_k_precision"]["mean"], r["top_k_precision"]["std"],
                    r["instances"]])
    outputs = sorted(p for p in out_dir.iterdir() if p.name != "run_manifest.json")
    _write_run_manifest(out_dir, "eval",
                        {"dataset": str(args.dataset), "checkpoint": args.checkpoint,
                         "baseline": args.baseline, "fraction": args.fraction,
                         "sweep": args.sweep},
                        None, outputs, started)
    return 0


def _format_cell(metric: dict) -> str:
    if metric["mean"] is None:
        return "n/a"
    return f"{metric['mean']:.4f} ± {metric['std']:.4f}"


def _cmd_report(args) -> int:
    started = time.time()
    aggregates = []
    for path in args.inputs:
        payload = json.loads(Path(path).read_text())
        for key in ("method", "n", "theta", "auc", "top_k_precision", "fraction"):
            if key not in payload:
                raise ValueError(f"{path}: aggregate missing field {key!r}")
        aggregates.append(payload)
    fractions = {a["fraction"] for a in aggregates}
    if len(fractions) != 1:
        raise ValueError(f"inconsistent metric sets: top-k fractions {sorted(fractions)}")
    methods = sorted({a["method"] for a in aggregates})
    cells: dict[tuple, dict] = {}
    for a in aggregates:
        for metric_name, metric_key in (("auc", "auc"), ("top_k", "top_k_precision")):
            key = (a["n"], a["theta"], metric_name)
            cells.setdefault(key, {})[a["method"]] = _format_cell(a[metric_key])
    keys = sorted(cells)
    out_path = Path(args.out) if args.out else _default_out("report").with_suffix(".csv")
    out_path.parent.mkdir(parents=True, exist_ok=True)
    if args.format == "markdown":
        lines = ["| n | theta_eval | metric | " + " | ".join(methods) + " |",
                 "|---" * (3 + len(methods)) + "|"]
        for n, theta, metric in keys:
            row = cells[(n, theta, metric)]
            lines.append(f"| {n} | {theta} | {metric} | "
                         + " | ".join(row.get(m, "n/a") for m in methods) + " |")
        out_path.write_text("\n".join(lines) + "\n")
    else:
        with open(out_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["n", "theta_eval", "metric", *methods])
            for n, theta, metric in keys:
                row = cells[(n, theta, metric)]
                writer.writerow([n, theta, metric,
                                 *[row.get(m, "n/a") for m in methods]])
    _write_run_manifest(out_path.parent, "report",
                        {"inputs": [str(p) for p in args.inputs],
                         "format": args.format},
                        None, [out_path], started)
    print(f"wrote report to {out_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="asymdetect",
        description="SI-epidemic asymptomatic-node identification pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("generate", help="generate an epidemic snapshot dataset")
    p_gen.add_argument("--model", choices=("ba", "ws"), required=True)
    p_gen.add_argument("--nodes", type=int, required=True)
    p_gen.add_argument("--instances", type=int, required=True)
    p_gen.add_argument("--theta", type=float, required=True,
                       help="observation probability for infected nodes")
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out", required=True)
    p_gen.add_argument("--m", type=int, default=4, help="BA attachment edges")
    p_gen.add_argument("--k", type=int, default=8, help="WS ring degree")
    p_gen.add_argument("--p", type=float, default=0.3, help="WS rewiring probability")
    p_gen.add_argument("--beta-choices", default="0.1,0.3,0.5")
    p_gen.add_argument("--stop-fraction", type=float, default=0.2)
    p_gen.add_argument("--jobs", type=int, default=1)
    p_gen.set_defaults(func=_cmd_generate)

    p_train = sub.add_parser("train", help="train the GCN on a dataset")
    p_train.add_argument("--dataset", required=True)
    p_train.add_argument("--out", default=None)
    p_train.add_argument("--epochs", type=int, default=1000)
    p_train.add_argument("--lr", type=float, default=1e-3)
    p_train.add_argument("--hidden", type=int, default=128)
    p_train.add_argument("--batch-size", type=int, default=128)
    p_train.add_argument("--val-fraction", type=float, default=0.1)
    p_train.add_argument("--val-every", type=int, default=50)
    p_train.add_argument("--seed", type=int, default=0)
    p_train.add_argument("--jobs", type=int, default=1)
    p_train.set_defaults(func=_cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint and/or the baseline")
    p_eval.add_argument("--dataset", required=True,
                        help="dataset directory (with --sweep: parent of several)")
    p_eval.add_argument("--checkpoint", default=None)
    p_eval.add_argument("--baseline", action="store_true",
                        help="also rank by observed betweenness")
    p_eval.add_argument("--out", default=None)
    p_eval.add_argument("--fraction", type=float, default=TOP_K_FRACTION)
    p_eval.add_argument("--sweep", action="store_true")
    p_eval.add_argument("--jobs", type=int, default=1)
    p_eval.add_argument("--dump-features", default=None,
                        help="directory for per-instance feature CSV dumps")
    p_eval.set_defaults(func=_cmd_eval)

    p_rep = sub.add_parser("report", help="join aggregates into a comparison table")
    p_rep.add_argument("--inputs", nargs="+", required=True)
    p_rep.add_argument("--out", default=None)
    p_rep.add_argument("--format", choices=("csv", "markdown"), default="csv")
    p_rep.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, DatasetFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    raise SystemExit(main())
