"""Subject-specific training: mini-batch Adam with validation checkpointing,
stratified 5-fold cross-validation, and metric aggregation.

Per fold: test = the fold, validation = stratified 20% of the rest,
training = the remainder. Normalization stats and class weights are fit on
the training split only; the checkpoint is the parameters of the epoch
with minimum validation loss. Per-job seeds derive from
(config seed, subject, fold) through numpy's SeedSequence, so folds and
subjects are independent, reorderable jobs.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset, class_weights, normalize, val_split
from .errors import InvalidConfigError
from .nn import (
    ArchSpec,
    ModelParams,
    adam_step,
    backward,
    forward,
    init_adam,
    init_model,
    weighted_cross_entropy,
)

N_CLASSES = 3


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 32
    lr: float = 0.001
    epochs: int = 200
    k_folds: int = 5
    val_fraction: float = 0.2
    seed: int = 0
    arch: ArchSpec = field(default_factory=ArchSpec)
    checkpoint_metric: str = "val_loss"
    # Optional plateau cutoff: stop once val loss has not improved for this
    # many epochs. None = always run all epochs.
    early_stop_patience: int | None = None

    def __post_init__(self):
        if self.batch_size < 1 or self.epochs < 1 or self.k_folds < 2:
            raise InvalidConfigError("batch_size/epochs >= 1 and k_folds >= 2 required")
        if self.lr <= 0:
            raise InvalidConfigError(f"lr must be > 0, got {self.lr}")
        if not (0.0 < self.val_fraction < 1.0):
            raise InvalidConfigError(f"val_fraction {self.val_fraction} outside (0, 1)")
        if self.checkpoint_metric != "val_loss":
            raise InvalidConfigError("only val_loss checkpointing is supported")
        if self.early_stop_patience is not None and self.early_stop_patience < 1:
            raise InvalidConfigError("early_stop_patience must be >= 1 or None")


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    confusion: np.ndarray  # (K, K) counts, rows = true class
    confusion_normalized: np.ndarray
    precision: np.ndarray
    recall: np.ndarray

    def to_json(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "confusion": self.confusion.tolist(),
            "confusion_normalized": self.confusion_normalized.tolist(),
            "precision": self.precision.tolist(),
            "recall": self.recall.tolist(),
        }


@dataclass
class FoldResult:
    fold: int
    params: ModelParams
    history: list[dict]
    best_epoch: int
    best_val_loss: float
    stopped_epoch: int
    norm_stats: dict
    train_idx: np.ndarray
    val_idx: np.ndarray
    test_idx: np.ndarray
    metrics: Metrics


@dataclass
class CrossValResult:
    subject_id: str
    folds: list[FoldResult]
    mean_accuracy: float
    pooled_confusion: np.ndarray
    pooled_normalized: np.ndarray


def metrics_from_predictions(y_true, y_pred, n_classes: int = N_CLASSES) -> Metrics:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(confusion, (y_true, y_pred), 1)
    return _metrics_from_confusion(confusion)


def _metrics_from_confusion(confusion: np.ndarray) -> Metrics:
    total = confusion.sum()
    accuracy = float(np.trace(confusion) / total) if total else 0.0
    row_sums = confusion.sum(axis=1, keepdims=True)
    col_sums = confusion.sum(axis=0)
    normalized = np.divide(
        confusion, row_sums, out=np.zeros(confusion.shape), where=row_sums > 0
    )
    diag = np.diag(confusion).astype(np.float64)
    recall = np.divide(diag, row_sums[:, 0], out=np.zeros_like(diag), where=row_sums[:, 0] > 0)
    precision = np.divide(diag, col_sums, out=np.zeros_like(diag), where=col_sums > 0)
    return Metrics(
        accuracy=accuracy,
        confusion=confusion,
        confusion_normalized=normalized,
        precision=precision,
        recall=recall,
    )


def evaluate(params: ModelParams, dataset: Dataset, indices=None) -> Metrics:
    """Eval-mode inference over a dataset (or an index subset of it)."""
    if indices is None:
        indices = np.arange(len(dataset))
    indices = np.asarray(indices)
    specs = dataset.spectrograms[indices].astype(np.float32)
    preds = _predict_batched(params, specs)
    return metrics_from_predictions(dataset.labels[indices], preds, params.arch.n_classes)


def _predict_batched(params: ModelParams, specs: np.ndarray, batch: int = 256) -> np.ndarray:
    out = []
    for i in range(0, specs.shape[0], batch):
        logits, _ = forward(params, specs[i : i + batch], train=False)
        out.append(np.argmax(logits, axis=-1))
    return np.concatenate(out) if out else np.empty(0, dtype=np.int64)


def _eval_loss_and_acc(params, specs, labels, weights, batch: int = 256):
    losses, hits, n = 0.0, 0, specs.shape[0]
    w_total = 0.0
    for i in range(0, n, batch):
        logits, _ = forward(params, specs[i : i + batch], train=False)
        w = np.asarray(weights)[labels[i : i + batch]]
        loss, _ = weighted_cross_entropy(logits, labels[i : i + batch], weights)
        losses += loss * w.sum()
        w_total += w.sum()
        hits += int((np.argmax(logits, axis=-1) == labels[i : i + batch]).sum())
    return losses / w_total, hits / n


def _job_seed(seed: int, subject_id: str, fold: int) -> np.random.SeedSequence:
    return np.random.SeedSequence((seed, zlib.crc32(subject_id.encode()), fold))


def fold_split(dataset: Dataset, fold: int, cfg: TrainConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(train, val, test) indices for one fold of a single-subject dataset."""
    test_idx = np.flatnonzero(dataset.fold_ids == fold)
    rest = np.flatnonzero(dataset.fold_ids != fold)
    if test_idx.size == 0 or rest.size == 0:
        raise InvalidConfigError(f"fold {fold} leaves an empty split")
    subject = dataset.subject_ids[int(test_idx[0])]
    ss = _job_seed(cfg.seed, subject, fold)
    split_seed = int(ss.generate_state(2, np.uint64)[1] >> 1)
    train_idx, val_idx = val_split(rest, dataset.labels, cfg.val_fraction, seed=split_seed)
    return train_idx, val_idx, test_idx


def train_one(
    dataset: Dataset,
    fold: int,
    cfg: TrainConfig,
    audit: list | None = None,
) -> FoldResult:
    """Train one fold of a single-subject dataset and pick the best epoch.

    History records per-epoch train/val loss and accuracy; the returned
    parameters are a copy taken at the minimum-validation-loss epoch.
    """
    subjects = set(dataset.subject_ids)
    if len(subjects) != 1:
        raise InvalidConfigError(f"train_one expects a single-subject dataset, got {sorted(subjects)}")
    subject = next(iter(subjects))

    train_idx, val_idx, test_idx = fold_split(dataset, fold, cfg)
    norm_ds, stats = normalize(dataset, fit_on=train_idx)

    counts = np.bincount(norm_ds.labels[train_idx], minlength=cfg.arch.n_classes)
    weights = class_weights(counts)

    ss = _job_seed(cfg.seed, subject, fold)
    init_seed, shuffle_seed, dropout_seed = (
        int(s) for s in ss.generate_state(5, np.uint64)[2:5]
    )
    params = init_model(cfg.arch, seed=init_seed)
    state = init_adam(params)
    shuffle_rng = np.random.default_rng(shuffle_seed)
    dropout_rng = np.random.default_rng(dropout_seed)

    train_specs = norm_ds.spectrograms[train_idx].astype(np.float32)
    train_labels = norm_ds.labels[train_idx].astype(np.int64)
    val_specs = norm_ds.spectrograms[val_idx].astype(np.float32)
    val_labels = norm_ds.labels[val_idx].astype(np.int64)

    grad_indices: set[int] = set()
    history: list[dict] = []
    best_epoch, best_val_loss, best_params = -1, np.inf, None

    for epoch in range(cfg.epochs):
        order = shuffle_rng.permutation(train_idx.size)
        epoch_loss, epoch_w = 0.0, 0.0
        hits = 0
        for i in range(0, order.size, cfg.batch_size):
            sel = order[i : i + cfg.batch_size]
            grad_indices.update(int(j) for j in train_idx[sel])
            x = train_specs[sel]
            y = train_labels[sel]
            logits, cache = forward(params, x, train=True, dropout_rng=dropout_rng)
            loss, dlogits = weighted_cross_entropy(logits, y, weights)
            grads = backward(params, cache, dlogits)
            adam_step(params, grads, state, lr=cfg.lr)
            w_batch = float(np.asarray(weights)[y].sum())
            epoch_loss += loss * w_batch
            epoch_w += w_batch
            hits += int((np.argmax(logits, axis=-1) == y).sum())
        val_loss, val_acc = _eval_loss_and_acc(params, val_specs, val_labels, weights)
        history.append(
            {
                "epoch": epoch,
                "train_loss": epoch_loss / epoch_w,
                "train_accuracy": hits / train_idx.size,
                "val_loss": val_loss,
                "val_accuracy": val_acc,
            }
        )
        if val_loss < best_val_loss:
            best_val_loss, best_epoch = val_loss, epoch
            best_params = params.copy()
        if (
            cfg.early_stop_patience is not None
            and epoch - best_epoch >= cfg.early_stop_patience
        ):
            break

    if audit is not None:
        audit.append(
            {
                "subject": subject,
                "fold": fold,
                "train_indices": set(int(i) for i in train_idx),
                "val_indices": set(int(i) for i in val_idx),
                "test_indices": set(int(i) for i in test_idx),
                "grad_indices": grad_indices,
                "norm_fit_indices": set(int(i) for i in train_idx),
            }
        )
    return FoldResult(
        fold=fold,
        params=best_params,
        history=history,
        best_epoch=best_epoch,
        best_val_loss=best_val_loss,
        stopped_epoch=history[-1]["epoch"],
        norm_stats=stats,
        train_idx=train_idx,
        val_idx=val_idx,
        test_idx=test_idx,
        metrics=evaluate(best_params, norm_ds, indices=test_idx),
    )


def evaluate_with_stats(params: ModelParams, dataset: Dataset, stats: dict, indices) -> Metrics:
    """Evaluate on raw (unnormalized) data using stored normalization stats."""
    indices = np.asarray(indices)
    specs = dataset.spectrograms[indices].astype(np.float64)
    for subject, (mean, std) in stats.items():
        sel = np.flatnonzero(np.asarray(dataset.subject_ids)[indices] == subject)
        specs[sel] = (specs[sel] - mean) / std
    preds = _predict_batched(params, specs.astype(np.float32))
    return metrics_from_predictions(dataset.labels[indices], preds, params.arch.n_classes)


def cross_validate(dataset: Dataset, cfg: TrainConfig, audit: list | None = None) -> CrossValResult:
    """Rotate every fold through the test slot for one subject's dataset.

    Mean accuracy is the unweighted mean of fold accuracies; the pooled
    confusion sums fold confusions before row normalization.
    """
    subjects = set(dataset.subject_ids)
    if len(subjects) != 1:
        raise InvalidConfigError("cross_validate expects a single-subject dataset")
    folds = []
    for fold in range(cfg.k_folds):
        folds.append(train_one(dataset, fold, cfg, audit=audit))
    pooled = np.sum([f.metrics.confusion for f in folds], axis=0)
    pooled_metrics = _metrics_from_confusion(pooled)
    return CrossValResult(
        subject_id=next(iter(subjects)),
        folds=folds,
        mean_accuracy=float(np.mean([f.metrics.accuracy for f in folds])),
        pooled_confusion=pooled,
        pooled_normalized=pooled_metrics.confusion_normalized,
    )


def aggregate_subjects(results: list[CrossValResult]) -> dict:
    """Corpus-level aggregation over per-subject cross-validations.

    Headline accuracy = unweighted mean of per-subject mean accuracies;
    pooled-segment accuracy and the pooled normalized confusion are
    reported alongside.
    """
    if not results:
        raise InvalidConfigError("no per-subject results to aggregate")
    pooled = np.sum([r.pooled_confusion for r in results], axis=0)
    pooled_metrics = _metrics_from_confusion(pooled)
    return {
        "mean_of_subject_means": float(np.mean([r.mean_accuracy for r in results])),
        "pooled_accuracy": pooled_metrics.accuracy,
        "pooled_confusion": pooled,
        "pooled_normalized": pooled_metrics.confusion_normalized,
        "per_subject": {r.subject_id: r.mean_accuracy for r in results},
    }
