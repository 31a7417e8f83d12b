"""Turn recordings into labeled, normalized spectrogram datasets.

Pipeline: band-pass filter each channel (500-1000 Hz, zero phase), cut
1-second windows aligned to phase starts, label each window by its phase
and by overlap with flexion windows, then spectrogram the classifier
classes and split per subject into stratified folds.

Labels:
    BASELINE     baseline-phase window
    STROOP       stress-phase window without flexing
    STROOP_FLEX  stress-phase window overlapping a flexion window by > 25%
    REST_FLEX    post-task window overlapping a flexion window (pure muscle
                 noise; analysis only, never in the classifier dataset)

Post-task windows without flexing carry no usable class and are dropped.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import IntEnum
from pathlib import Path

import numpy as np

from . import dsp
from .container import read_container, write_container
from .errors import (
    InvalidConfigError,
    NotFoundError,
    ShapeError,
    StratificationError,
)
from .recording import BASELINE_PHASES, STROOP_PHASES, Phase, Recording

MAGIC = b"SKNADS\x00\x00"
VERSION = 1


class SegmentLabel(IntEnum):
    BASELINE = 0
    STROOP = 1
    STROOP_FLEX = 2
    REST_FLEX = 3


CLASSIFIER_LABELS = (SegmentLabel.BASELINE, SegmentLabel.STROOP, SegmentLabel.STROOP_FLEX)


@dataclass(frozen=True)
class LabelRules:
    """Constants of the flexion-window labeling rule.

    A flexion annotated at t owns the window
    [t - annotation_error_s, t + annotation_error_s + flex_length_s];
    a segment overlapping any such window by more than overlap_threshold
    of its own length is a flexing segment.
    """

    annotation_error_s: float = 0.5
    flex_length_s: float = 0.5
    overlap_threshold: float = 0.25

    def __post_init__(self):
        if self.annotation_error_s < 0 or self.flex_length_s < 0:
            raise InvalidConfigError("annotation error and flex length must be >= 0")
        if not (0.0 < self.overlap_threshold < 1.0):
            raise InvalidConfigError(
                f"overlap_threshold {self.overlap_threshold} outside (0, 1)"
            )


@dataclass(frozen=True)
class Segment:
    """One unlabeled window cut from a channel."""

    channel: int
    t_start_s: float
    samples: np.ndarray


@dataclass(frozen=True)
class LabeledSegment:
    subject_id: str
    channel: int
    t_start_s: float
    samples: np.ndarray
    label: SegmentLabel


def phase_spans(rec: Recording) -> dict[Phase, tuple[float, float]]:
    starts = rec.phase_starts()
    spans = {}
    for i, a in enumerate(starts):
        t_end = starts[i + 1].time_s if i + 1 < len(starts) else rec.duration_s
        spans[a.phase] = (a.time_s, t_end)
    return spans


def segment_channel(
    rec: Recording,
    channel: int,
    window_s: float = 1.0,
    samples: np.ndarray | None = None,
) -> list[Segment]:
    """Cut consecutive non-overlapping windows aligned to each phase start.

    Trailing partial windows inside a phase are dropped, so no window ever
    straddles a phase boundary. `samples` overrides the raw channel (the
    dataset builder passes the filtered waveform).
    """
    if window_s <= 0:
        raise InvalidConfigError(f"window_s must be > 0, got {window_s}")
    data = rec.channel(channel) if samples is None else np.asarray(samples)
    if data.shape != (rec.n_samples,):
        raise ShapeError(f"samples shape {data.shape} != ({rec.n_samples},)")
    win = int(round(window_s * rec.sample_rate_hz))
    out = []
    for t0, t1 in phase_spans(rec).values():
        i = int(round(t0 * rec.sample_rate_hz))
        end = int(round(t1 * rec.sample_rate_hz))
        while i + win <= end:
            out.append(
                Segment(
                    channel=channel,
                    t_start_s=i / rec.sample_rate_hz,
                    samples=data[i : i + win],
                )
            )
            i += win
    return out


def flexion_window(event_time_s: float, rules: LabelRules) -> tuple[float, float]:
    """Time window owned by one flexion annotation (not clamped)."""
    return (
        event_time_s - rules.annotation_error_s,
        event_time_s + rules.annotation_error_s + rules.flex_length_s,
    )


def _overlap(a0: float, a1: float, b0: float, b1: float) -> float:
    return max(0.0, min(a1, b1) - max(a0, b0))


def label_segments(
    segments: list[Segment],
    rec: Recording,
    rules: LabelRules,
    window_s: float = 1.0,
) -> tuple[list[LabeledSegment], dict]:
    """Assign labels by phase and flexion-window overlap.

    Only flexions annotated on a segment's own channel count. Returns the
    labeled segments plus drop counters: segments outside any annotated
    phase, and post-task segments without flexing.
    """
    spans = phase_spans(rec)
    eps = 1e-9
    flex_windows: dict[int, list[tuple[float, float]]] = {}
    for a in rec.flexions():
        w_lo, w_hi = flexion_window(a.time_s, rules)
        flex_windows.setdefault(a.channel, []).append(
            (max(0.0, w_lo), min(rec.duration_s, w_hi))
        )

    labeled = []
    stats = {"no_phase": 0, "rest_without_flex": 0}
    for seg in segments:
        s0, s1 = seg.t_start_s, seg.t_start_s + window_s
        phase = next(
            (p for p, (t0, t1) in spans.items() if t0 - eps <= s0 and s1 <= t1 + eps),
            None,
        )
        if phase is None:
            stats["no_phase"] += 1
            continue
        flexing = any(
            _overlap(s0, s1, w0, w1) > rules.overlap_threshold * window_s
            for w0, w1 in flex_windows.get(seg.channel, ())
        )
        if phase in BASELINE_PHASES:
            label = SegmentLabel.BASELINE
        elif phase in STROOP_PHASES:
            label = SegmentLabel.STROOP_FLEX if flexing else SegmentLabel.STROOP
        else:
            if not flexing:
                stats["rest_without_flex"] += 1
                continue
            label = SegmentLabel.REST_FLEX
        labeled.append(
            LabeledSegment(
                subject_id=rec.subject_id,
                channel=seg.channel,
                t_start_s=seg.t_start_s,
                samples=seg.samples,
                label=label,
            )
        )
    return labeled, stats


def extract_labeled_segments(
    rec: Recording,
    rules: LabelRules | None = None,
    filter_spec: dsp.FilterSpec | None = None,
    window_s: float = 1.0,
) -> tuple[list[LabeledSegment], dict]:
    """Filter every channel to the SKNA band, segment, and label."""
    rules = rules if rules is not None else LabelRules()
    if filter_spec is None:
        filter_spec = dsp.design_bandpass(rec.sample_rate_hz)
    segments = []
    for ch in range(rec.n_channels):
        filtered = dsp.filter_zero_phase(rec.channel(ch), filter_spec)
        segments.extend(segment_channel(rec, ch, window_s, samples=filtered))
    return label_segments(segments, rec, rules, window_s)


# ---------------------------------------------------------------------------
# Class weights and splits
# ---------------------------------------------------------------------------

def class_weights(counts) -> np.ndarray:
    """Weights inversely proportional to class frequency, mean weight 1.

    w_c = N / (K * n_c) with N total samples over K classes.
    """
    counts = np.asarray(counts, dtype=np.float64)
    if counts.ndim != 1 or counts.size == 0:
        raise InvalidConfigError("counts must be a non-empty 1-D sequence")
    if np.any(counts <= 0):
        raise InvalidConfigError(f"all class counts must be > 0, got {counts.tolist()}")
    return counts.sum() / (counts.size * counts)


def split_folds(labels, k: int = 5, seed: int = 0) -> np.ndarray:
    """Stratified k-fold assignment: per class, shuffled round-robin dealing.

    Fold sizes per class differ by at most one; identical seeds give
    identical assignments.
    """
    labels = np.asarray(labels)
    if k < 2:
        raise InvalidConfigError(f"k must be >= 2, got {k}")
    rng = np.random.default_rng(seed)
    fold_ids = np.full(labels.shape[0], -1, dtype=np.int16)
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        if idx.size < k:
            raise StratificationError(
                f"class {cls} has {idx.size} samples, fewer than k={k}"
            )
        rng.shuffle(idx)
        fold_ids[idx] = np.arange(idx.size) % k
    return fold_ids


def val_split(
    train_indices, labels, fraction: float = 0.2, seed: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """Split indices into stratified (train, val), deterministic under seed."""
    if not (0.0 < fraction < 1.0):
        raise InvalidConfigError(f"fraction {fraction} outside (0, 1)")
    train_indices = np.asarray(train_indices)
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    val_parts, train_parts = [], []
    for cls in np.unique(labels[train_indices]):
        idx = train_indices[labels[train_indices] == cls]
        rng.shuffle(idx)
        n_val = int(round(fraction * idx.size))
        n_val = min(max(n_val, 1 if idx.size > 1 else 0), idx.size - 1)
        val_parts.append(idx[:n_val])
        train_parts.append(idx[n_val:])
    return np.sort(np.concatenate(train_parts)), np.sort(np.concatenate(val_parts))


# ---------------------------------------------------------------------------
# Dataset container
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Dataset:
    """Stacked spectrograms with labels, per-subject fold ids, and provenance."""

    spectrograms: np.ndarray  # (n, n_bins, n_frames) float32, dB
    labels: np.ndarray  # (n,) int8, SegmentLabel values
    subject_ids: tuple[str, ...]
    fold_ids: np.ndarray  # (n,) int16
    channels: np.ndarray  # (n,) int8
    t_starts: np.ndarray  # (n,) float32
    freq_axis_hz: np.ndarray
    time_axis_s: np.ndarray
    norm_stats: dict | None = None

    def __post_init__(self):
        n = self.spectrograms.shape[0]
        if not (
            len(self.subject_ids) == n
            and self.labels.shape == (n,)
            and self.fold_ids.shape == (n,)
            and self.channels.shape == (n,)
            and self.t_starts.shape == (n,)
        ):
            raise ShapeError("dataset field lengths disagree")
        for name in ("spectrograms", "labels", "fold_ids", "channels", "t_starts"):
            getattr(self, name).setflags(write=False)
        object.__setattr__(self, "subject_ids", tuple(self.subject_ids))

    def __len__(self) -> int:
        return self.spectrograms.shape[0]

    @property
    def subjects(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for s in self.subject_ids:
            seen.setdefault(s)
        return tuple(seen)

    def class_counts(self) -> dict[SegmentLabel, int]:
        return {
            label: int(np.sum(self.labels == label.value)) for label in CLASSIFIER_LABELS
        }

    def subject_indices(self, subject_id: str) -> np.ndarray:
        idx = np.flatnonzero(np.asarray(self.subject_ids) == subject_id)
        if idx.size == 0:
            raise NotFoundError(f"subject {subject_id!r} not in dataset")
        return idx

    def select(self, indices) -> "Dataset":
        indices = np.asarray(indices)
        return Dataset(
            spectrograms=self.spectrograms[indices],
            labels=self.labels[indices],
            subject_ids=tuple(self.subject_ids[i] for i in indices),
            fold_ids=self.fold_ids[indices],
            channels=self.channels[indices],
            t_starts=self.t_starts[indices],
            freq_axis_hz=self.freq_axis_hz,
            time_axis_s=self.time_axis_s,
            norm_stats=self.norm_stats,
        )


def build_dataset(
    recordings: list[Recording],
    rules: LabelRules | None = None,
    k_folds: int = 5,
    seed: int = 0,
) -> Dataset:
    """Classifier dataset from recordings: spectrograms of all BASELINE /
    STROOP / STROOP_FLEX segments (both channels pooled), stratified
    k-fold assignment per subject."""
    rules = rules if rules is not None else LabelRules()
    specs, labels, subjects, channels, t_starts = [], [], [], [], []
    freq_axis = time_axis = None
    for rec in sorted(recordings, key=lambda r: r.subject_id):
        labeled, _ = extract_labeled_segments(rec, rules)
        for seg in labeled:
            if seg.label not in CLASSIFIER_LABELS:
                continue
            sg = dsp.spectrogram(seg.samples, rec.sample_rate_hz)
            if freq_axis is None:
                freq_axis, time_axis = sg.freq_axis_hz, sg.time_axis_s
            specs.append(sg.power.astype(np.float32))
            labels.append(int(seg.label))
            subjects.append(seg.subject_id)
            channels.append(seg.channel)
            t_starts.append(seg.t_start_s)
    if not specs:
        raise InvalidConfigError("no classifier segments produced from recordings")

    labels = np.asarray(labels, dtype=np.int8)
    subjects_arr = np.asarray(subjects)
    fold_ids = np.full(len(specs), -1, dtype=np.int16)
    fold_seeds = np.random.SeedSequence(seed).spawn(len(set(subjects)))
    for sub_seed, subject in zip(fold_seeds, sorted(set(subjects))):
        idx = np.flatnonzero(subjects_arr == subject)
        fold_ids[idx] = split_folds(
            labels[idx], k=k_folds, seed=int(sub_seed.generate_state(1, np.uint64)[0] >> 1)
        )
    return Dataset(
        spectrograms=np.stack(specs),
        labels=labels,
        subject_ids=tuple(subjects),
        fold_ids=fold_ids,
        channels=np.asarray(channels, dtype=np.int8),
        t_starts=np.asarray(t_starts, dtype=np.float32),
        freq_axis_hz=freq_axis,
        time_axis_s=time_axis,
    )


def normalize(dataset: Dataset, fit_on) -> tuple[Dataset, dict]:
    """Per-subject z-score of spectrogram values, stats fit on fit_on only.

    Every subject in the dataset must contribute at least one fit index;
    the same stats are applied to that subject's non-fit items, so held-out
    statistics are not forced to zero mean.
    """
    fit_on = np.asarray(fit_on)
    subjects_arr = np.asarray(dataset.subject_ids)
    fit_subjects = set(subjects_arr[fit_on])
    stats: dict[str, tuple[float, float]] = {}
    normalized = dataset.spectrograms.astype(np.float32).copy()
    for subject in dataset.subjects:
        if subject not in fit_subjects:
            raise InvalidConfigError(f"subject {subject!r} has no items in fit_on")
        sub_idx = dataset.subject_indices(subject)
        fit_idx = np.intersect1d(sub_idx, fit_on)
        values = dataset.spectrograms[fit_idx].astype(np.float64)
        mean, std = float(values.mean()), float(values.std())
        if std <= 0.0:
            raise InvalidConfigError(f"subject {subject!r} has zero-variance spectrograms")
        stats[subject] = (mean, std)
        normalized[sub_idx] = ((dataset.spectrograms[sub_idx] - mean) / std).astype(
            np.float32
        )
    return replace(dataset, spectrograms=normalized, norm_stats=stats), stats


# ---------------------------------------------------------------------------
# .sknads I/O
# ---------------------------------------------------------------------------

def save_dataset(dataset: Dataset, path) -> None:
    meta = {
        "shape": list(dataset.spectrograms.shape),
        "labels": dataset.labels.tolist(),
        "subject_ids": list(dataset.subject_ids),
        "fold_ids": dataset.fold_ids.tolist(),
        "channels": dataset.channels.tolist(),
        "t_starts": [float(t) for t in dataset.t_starts],
        "freq_axis_hz": [float(f) for f in dataset.freq_axis_hz],
        "time_axis_s": [float(t) for t in dataset.time_axis_s],
        "norm_stats": dataset.norm_stats,
        "class_counts": {label.name: n for label, n in dataset.class_counts().items()},
    }
    blob = np.ascontiguousarray(dataset.spectrograms, dtype="<f4").tobytes()
    write_container(path, MAGIC, VERSION, meta, blob)


def load_dataset(path) -> Dataset:
    meta, blob = read_container(Path(path), MAGIC, VERSION)
    shape = tuple(meta["shape"])
    specs = np.frombuffer(blob, dtype="<f4")
    if specs.size != int(np.prod(shape)):
        raise ShapeError(f"{path}: blob holds {specs.size} floats, expected {np.prod(shape)}")
    norm_stats = meta["norm_stats"]
    if norm_stats is not None:
        norm_stats = {k: tuple(v) for k, v in norm_stats.items()}
    return Dataset(
        spectrograms=specs.reshape(shape),
        labels=np.asarray(meta["labels"], dtype=np.int8),
        subject_ids=tuple(meta["subject_ids"]),
        fold_ids=np.asarray(meta["fold_ids"], dtype=np.int16),
        channels=np.asarray(meta["channels"], dtype=np.int8),
        t_starts=np.asarray(meta["t_starts"], dtype=np.float32),
        freq_axis_hz=np.asarray(meta["freq_axis_hz"]),
        time_axis_s=np.asarray(meta["time_axis_s"]),
        norm_stats=norm_stats,
    )


def label_timeline_rows(segments: list[LabeledSegment]) -> list[tuple]:
    """Audit rows (subject, channel, t_start_s, label) for CSV export."""
    return [
        (seg.subject_id, seg.channel, f"{seg.t_start_s:.3f}", seg.label.name)
        for seg in segments
    ]
