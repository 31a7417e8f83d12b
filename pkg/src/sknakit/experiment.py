"""Corpus-scale experiment driver: synthesize, preprocess, cross-validate.

Subjects are independent jobs (per-subject seeds fixed up front), so the
corpus can run across worker processes; results are identical for any job
count. Worker processes pin their math libraries to one thread each so
jobs do not fight over cores.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from multiprocessing import get_context

import numpy as np

from .dataset import build_dataset
from .synth import SynthConfig, corpus_configs, synth_recording
from .trainer import CrossValResult, TrainConfig, cross_validate


@dataclass
class SubjectRun:
    subject_id: str
    mean_accuracy: float
    pooled_confusion: np.ndarray
    best_epochs: list[int]
    stopped_epochs: list[int]
    fold_accuracies: list[float]
    audit: list[dict]


def _single_thread_env() -> None:
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = "1"


def run_subject(synth_cfg: SynthConfig, train_cfg: TrainConfig, dataset_seed: int,
                with_audit: bool = False) -> SubjectRun:
    """Full pipeline for one subject: recording -> dataset -> k-fold CV."""
    rec = synth_recording(synth_cfg)
    ds = build_dataset([rec], k_folds=train_cfg.k_folds, seed=dataset_seed)
    audit: list[dict] = []
    result: CrossValResult = cross_validate(ds, train_cfg, audit=audit if with_audit else None)
    return SubjectRun(
        subject_id=synth_cfg.subject_id,
        mean_accuracy=result.mean_accuracy,
        pooled_confusion=result.pooled_confusion,
        best_epochs=[f.best_epoch for f in result.folds],
        stopped_epochs=[f.stopped_epoch for f in result.folds],
        fold_accuracies=[f.metrics.accuracy for f in result.folds],
        audit=audit,
    )


def run_corpus(
    n_subjects: int,
    seed: int,
    train_cfg: TrainConfig,
    base: SynthConfig | None = None,
    jobs: int = 1,
    with_audit: bool = False,
) -> dict:
    """Run the whole synthetic corpus; returns the aggregate summary.

    The per-subject dataset seed derives from the corpus seed so the
    pipeline is reproducible end to end from one integer.
    """
    configs = corpus_configs(n_subjects, seed, base)
    args = [(cfg, train_cfg, seed, with_audit) for cfg in configs]
    if jobs <= 1:
        runs = [run_subject(*a) for a in args]
    else:
        # Pin worker math libraries to one thread: the env must be in place
        # before the children load them, so set it in the parent around the
        # spawn (the parent's already-initialized pools are unaffected).
        saved = {
            k: os.environ.get(k)
            for k in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")
        }
        _single_thread_env()
        try:
            ctx = get_context("spawn")
            with ProcessPoolExecutor(
                max_workers=jobs, mp_context=ctx, initializer=_single_thread_env
            ) as pool:
                runs = list(pool.map(_run_subject_star, args))
        finally:
            for k, v in saved.items():
                if v is None:
                    os.environ.pop(k, None)
                else:
                    os.environ[k] = v
    return summarize(runs)


def _run_subject_star(packed) -> SubjectRun:
    return run_subject(*packed)


def summarize(runs: list[SubjectRun]) -> dict:
    pooled = np.sum([r.pooled_confusion for r in runs], axis=0)
    row_sums = pooled.sum(axis=1, keepdims=True)
    normalized = np.divide(pooled, row_sums, out=np.zeros(pooled.shape), where=row_sums > 0)
    return {
        "mean_of_subject_means": float(np.mean([r.mean_accuracy for r in runs])),
        "pooled_accuracy": float(np.trace(pooled) / pooled.sum()),
        "pooled_confusion": pooled,
        "pooled_normalized": normalized,
        "per_subject": {r.subject_id: r.mean_accuracy for r in runs},
        "best_epochs": [e for r in runs for e in r.best_epochs],
        "stopped_epochs": [e for r in runs for e in r.stopped_epochs],
        "runs": runs,
    }
