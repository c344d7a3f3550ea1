"""Command-line entry point: synth, train, eval, and sweep.

Result payloads are JSON (one run) or CSV (sweep rows); schemas are
documented in docs/formats.md and pinned by golden tests. All randomness
flows from --seed, which is expanded into independent split, corruption,
and init seeds, so repeated invocations are byte-identical apart from
wall-time fields.

Exit codes: 0 success, 2 bad flags, 3 data or checkpoint errors,
4 numerical abort during training.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__, metrics
from .data_io import GraphFileError, load_graph, save_graph, synth_planted_anomaly
from .graph import EVAL, GraphError, SplitError, make_split
from .models import CheckpointError, build_model, load_checkpoint, model_forward, save_checkpoint
from .training import (
    CorruptionConfig,
    NumericalAbortError,
    TrainConfig,
    corrupt_features,
    derive_seeds,
    train,
)

SPLIT_FRACTIONS = (0.4, 0.2, 0.4)
SWEEP_CSV_HEADER = ["ratio", "model", "seed", "auc", "recall_at_k", "status",
                    "epochs", "wall_ms"]


def _add_model_flags(p, with_training=True):
    p.add_argument("--model", choices=("fgc", "mlp", "sage"), default="fgc")
    p.add_argument("--hidden", type=int, default=64)
    p.add_argument("--depth", type=int, default=1)
    if with_training:
        p.add_argument("--lr", type=float, default=1e-3)
        p.add_argument("--epochs", type=int, default=300)
        p.add_argument("--patience", type=int, default=30)


def _add_corruption_flags(p):
    p.add_argument("--dropout-ratio", type=float, default=0.0,
                   help="fraction of feature entries (or rows) zeroed, in [0,1)")
    p.add_argument("--granularity", choices=("entry", "node"), default="entry")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fgccomp")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a planted-anomaly dataset file")
    p_synth.add_argument("--n", type=int, default=2000)
    p_synth.add_argument("--d", type=int, default=16)
    p_synth.add_argument("--anomaly-frac", type=float, default=0.1)
    p_synth.add_argument("--homophily", type=float, default=0.8)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--out", required=True)

    p_train = sub.add_parser("train", help="train one model and write a result file")
    p_train.add_argument("--data", required=True)
    _add_model_flags(p_train)
    _add_corruption_flags(p_train)
    p_train.add_argument("--seed", type=int, default=0)
    p_train.add_argument("--out", required=True)
    p_train.add_argument("--k", type=int, default=None,
                         help="Recall@K cutoff; default: positives in the test mask")
    p_train.add_argument("--checkpoint-out", default=None)
    p_train.add_argument("--quiet", action="store_true",
                         help="suppress the per-epoch log lines")

    p_eval = sub.add_parser("eval", help="score a checkpoint on a dataset")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--data", required=True)
    p_eval.add_argument("--split-seed", type=int, required=True,
                        help="the --seed the checkpoint was trained with")
    _add_model_flags(p_eval, with_training=False)
    _add_corruption_flags(p_eval)
    p_eval.add_argument("--k", type=int, default=None)
    p_eval.add_argument("--dump-scores", default=None,
                        help="write the full per-node score vector to this path")

    p_sweep = sub.add_parser("sweep", help="robustness sweep over corruption ratios")
    p_sweep.add_argument("--data", required=True)
    p_sweep.add_argument("--ratios", default="20,30,40,50",
                         help="comma list of dropout percentages")
    p_sweep.add_argument("--models", default="fgc,mlp",
                         help="comma list drawn from fgc,mlp,sage")
    p_sweep.add_argument("--seeds", default="0,1,2")
    p_sweep.add_argument("--hidden", type=int, default=64)
    p_sweep.add_argument("--depth", type=int, default=1)
    p_sweep.add_argument("--lr", type=float, default=1e-3)
    p_sweep.add_argument("--epochs", type=int, default=300)
    p_sweep.add_argument("--patience", type=int, default=30)
    p_sweep.add_argument("--granularity", choices=("entry", "node"), default="entry")
    p_sweep.add_argument("--jobs", type=int, default=1)
    p_sweep.add_argument("--out", required=True)
    return parser


def _train_once(data_path, model_kind, hidden, depth, lr, epochs, patience,
                ratio, granularity, seed, log_fn=None):
    g = load_graph(data_path)
    seeds = derive_seeds(seed)
    g = corrupt_features(g, CorruptionConfig(ratio, granularity, seeds["corrupt"]))
    split = make_split(g, SPLIT_FRACTIONS, seeds["split"])
    model = build_model(model_kind, g.feature_dim, hidden, depth, seeds["init"])
    tc = TrainConfig(lr=lr, max_epochs=epochs, patience=patience, seed=seed,
                     hidden=hidden, depth=depth)
    result = train(model, g, split, tc, log_fn=log_fn)
    return g, split, model, result


def cmd_synth(args) -> int:
    g, _ = synth_planted_anomaly(args.n, args.d, args.anomaly_frac,
                                 args.homophily, args.seed)
    save_graph(g, args.out)
    print(f"wrote {args.out}: {g.num_nodes} nodes, {g.num_edge_slots // 2} edges, "
          f"{g.feature_dim} features, anomaly rate {g.labels.mean():.4f}")
    return 0


def cmd_train(args) -> int:
    log_fn = None if args.quiet else (
        lambda rec: print(json.dumps(rec, sort_keys=True), flush=True))
    g, split, model, result = _train_once(
        args.data, args.model, args.hidden, args.depth, args.lr, args.epochs,
        args.patience, args.dropout_ratio, args.granularity, args.seed,
        log_fn=log_fn)
    k = args.k
    if k is not None:
        test_labels = g.labels[split.test_mask]
        logits = model_forward(model, g, split, EVAL).value[:, 0]
        result.test_recall_at_k = metrics.recall_at_k(
            logits[split.test_mask], test_labels, k)
        result.k = k
    payload = {
        "schema": "fgccomp-run-v1",
        "data": args.data,
        "model": args.model,
        "seed": args.seed,
        "dropout_ratio": args.dropout_ratio,
        "granularity": args.granularity,
        "config": result.config,
        "best_val_auc": result.best_val_auc,
        "test_auc": result.test_auc,
        "test_recall_at_k": result.test_recall_at_k,
        "k": result.k,
        "epochs_run": result.epochs_run,
        "wall_time_s": result.wall_time_s,
    }
    with open(args.out, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if args.checkpoint_out:
        save_checkpoint(model, args.checkpoint_out)
    return 0


def cmd_eval(args) -> int:
    g = load_graph(args.data)
    seeds = derive_seeds(args.split_seed)
    g = corrupt_features(g, CorruptionConfig(args.dropout_ratio, args.granularity,
                                             seeds["corrupt"]))
    split = make_split(g, SPLIT_FRACTIONS, seeds["split"])
    model = build_model(args.model, g.feature_dim, args.hidden, args.depth,
                        seeds["init"])
    load_checkpoint(model, args.checkpoint)
    logits = model_forward(model, g, split, EVAL).value[:, 0]
    if args.dump_scores:
        np.savetxt(args.dump_scores, logits)
    test_labels = g.labels[split.test_mask]
    test_scores = logits[split.test_mask]
    k = args.k if args.k is not None else metrics.default_k(test_labels)
    print(f"test_auc {metrics.roc_auc(test_scores, test_labels):.17g}")
    print(f"test_recall_at_k {metrics.recall_at_k(test_scores, test_labels, k):.17g} k={k}")
    return 0


def _sweep_cell(cell):
    data_path, ratio_pct, model_kind, seed, hidden, depth, lr, epochs, patience, granularity = cell
    try:
        _, _, _, result = _train_once(
            data_path, model_kind, hidden, depth, lr, epochs, patience,
            ratio_pct / 100.0, granularity, seed, log_fn=None)
        return [ratio_pct, model_kind, seed, f"{result.test_auc:.6f}",
                f"{result.test_recall_at_k:.6f}", "ok", result.epochs_run,
                round(result.wall_time_s * 1e3)]
    except Exception as exc:  # a failed cell must not kill the sweep
        return [ratio_pct, model_kind, seed, "", "", f"error:{type(exc).__name__}",
                0, 0]


def _parse_num_list(text, cast):
    try:
        return [cast(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad list {text!r}")


def cmd_sweep(args) -> int:
    ratios = _parse_num_list(args.ratios, float)
    seeds = _parse_num_list(args.seeds, int)
    models = [m.strip() for m in args.models.split(",") if m.strip()]
    for m in models:
        if m not in ("fgc", "mlp", "sage"):
            raise GraphFileError(f"unknown model {m!r} in --models")
    cells = [(args.data, ratio, model, seed, args.hidden, args.depth, args.lr,
              args.epochs, args.patience, args.granularity)
             for ratio in ratios for model in models for seed in seeds]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_sweep_cell, cells))
    else:
        rows = [_sweep_cell(cell) for cell in cells]
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_CSV_HEADER)
        writer.writerows(rows)
    print(f"wrote {args.out}: {len(rows)} rows")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"synth": cmd_synth, "train": cmd_train, "eval": cmd_eval,
               "sweep": cmd_sweep}[args.command]
    try:
        return handler(args)
    except (GraphFileError, GraphError, SplitError, CheckpointError, OSError,
            ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except NumericalAbortError as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
