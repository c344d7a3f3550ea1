"""Corruption harness and the full-batch training loop with early stopping.

Missing attributes are simulated by zeroing feature entries (or whole
rows) once per run; the corrupted matrix is the dataset for training and
evaluation alike. Training minimizes sigmoid cross-entropy over the
train-mask nodes only, tracks validation AUC in evaluation mode, and
restores the best checkpoint before reporting test metrics.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import metrics, ndops
from .graph import EVAL, TRAIN, Graph, Split, with_features
from .models import model_forward
from .ndops import Tape, bce_with_logits, take_rows

MIN_AUC_IMPROVEMENT = 1e-6


class NumericalAbortError(RuntimeError):
    """Training hit a non-finite loss; carries the epoch and culprit."""

    def __init__(self, epoch: int, detail: str):
        super().__init__(f"non-finite loss at epoch {epoch}: {detail}")
        self.epoch = epoch
        self.detail = detail


@dataclass(frozen=True)
class CorruptionConfig:
    ratio: float
    granularity: str = "entry"  # entry | node
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.ratio < 1.0:
            raise ValueError("corruption ratio must lie in [0, 1)")
        if self.granularity not in ("entry", "node"):
            raise ValueError("granularity must be 'entry' or 'node'")


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    max_epochs: int = 300
    patience: int = 30
    seed: int = 0
    hidden: int = 64
    depth: int = 1

    def __post_init__(self):
        if not 0.0 < self.lr < 1.0:
            raise ValueError("lr must lie in (0, 1)")
        if self.patience > self.max_epochs:
            raise ValueError("patience must not exceed max_epochs")


@dataclass
class RunResult:
    best_val_auc: float
    test_auc: float
    test_recall_at_k: float
    k: int
    epochs_run: int
    wall_time_s: float
    config: dict = field(default_factory=dict)


def derive_seeds(master: int) -> dict:
    """Independent integer seeds for the run's three random consumers."""
    state = np.random.SeedSequence(master).generate_state(3)
    return {"split": int(state[0]), "corrupt": int(state[1]), "init": int(state[2])}


def corrupt_features(g: Graph, cfg: CorruptionConfig) -> Graph:
    """Zero a seeded random subset of feature entries or whole rows.

    The mask is sampled once from the config seed; a zero ratio returns
    the input graph untouched.
    """
    if cfg.ratio == 0.0:
        return g
    rng = np.random.default_rng(cfg.seed)
    feats = np.array(g.features)
    if cfg.granularity == "entry":
        drop = rng.random(feats.shape) < cfg.ratio
    else:
        drop = (rng.random(feats.shape[0]) < cfg.ratio)[:, None]
    feats[np.broadcast_to(drop, feats.shape)] = 0.0
    return with_features(g, feats)


@dataclass
class EarlyStopState:
    patience: int
    best: float = -np.inf
    stale: int = 0


def early_stop_update(state: EarlyStopState, val_auc: float) -> bool:
    """Update the stall counter; return True when training should stop.

    Only an improvement of at least MIN_AUC_IMPROVEMENT resets the
    counter. Patience zero stops after the first validation pass.
    """
    if val_auc > state.best + MIN_AUC_IMPROVEMENT:
        state.best = val_auc
        state.stale = 0
    else:
        state.stale += 1
    return state.stale >= state.patience


def _val_auc(model, g, split) -> float:
    logits = model_forward(model, g, split, EVAL).value[:, 0]
    return metrics.roc_auc(logits[split.val_mask], g.labels[split.val_mask])


def train(model, g: Graph, split: Split, tc: TrainConfig, log_fn=None) -> RunResult:
    """Full-batch Adam training with early stopping on validation AUC.

    Per epoch: train-mode forward, cross-entropy over train nodes only,
    backward, Adam step, then an evaluation-mode validation AUC. The
    parameters of the best validation epoch are restored at the end and
    test metrics are computed in evaluation mode.
    """
    train_idx = np.flatnonzero(split.train_mask)
    y_train = g.labels[train_idx].astype(np.float64)
    if y_train.size == 0 or len(set(y_train.tolist())) < 2:
        raise ValueError("train mask must contain both classes")

    params = model.parameters()
    state = EarlyStopState(patience=tc.patience)
    best_snapshot = [p.value.copy() for p in params]
    started = time.perf_counter()
    epochs_run = 0
    for epoch in range(1, tc.max_epochs + 1):
        epoch_start = time.perf_counter()
        tape = Tape()
        logits = model_forward(model, g, split, TRAIN, tape=tape)
        loss = bce_with_logits(tape, take_rows(tape, logits, train_idx), y_train)
        loss_val = float(loss.value[0, 0])
        if not np.isfinite(loss_val):
            bad = [p.name for p in params if not np.isfinite(p.value).all()]
            detail = f"non-finite parameter blocks: {bad}" if bad else "parameters finite"
            raise NumericalAbortError(epoch, detail)
        tape.backward(loss)
        ndops.adam_step(params, lr=tc.lr, beta1=tc.beta1, beta2=tc.beta2, eps=tc.eps)

        val_auc = _val_auc(model, g, split)
        epochs_run = epoch
        if val_auc > state.best + MIN_AUC_IMPROVEMENT:
            best_snapshot = [p.value.copy() for p in params]
        stop = early_stop_update(state, val_auc)
        if log_fn is not None:
            log_fn({"epoch": epoch, "train_loss": loss_val, "val_auc": val_auc,
                    "elapsed_ms": (time.perf_counter() - epoch_start) * 1e3})
        if stop:
            break

    for p, snap in zip(params, best_snapshot):
        p.value = snap
    test_logits = model_forward(model, g, split, EVAL).value[:, 0]
    test_scores = test_logits[split.test_mask]
    test_labels = g.labels[split.test_mask]
    k = metrics.default_k(test_labels)
    return RunResult(
        best_val_auc=float(state.best),
        test_auc=metrics.roc_auc(test_scores, test_labels),
        test_recall_at_k=metrics.recall_at_k(test_scores, test_labels, k),
        k=k,
        epochs_run=epochs_run,
        wall_time_s=time.perf_counter() - started,
        config=asdict(tc),
    )
