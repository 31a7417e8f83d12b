"""Recording data model and the .skna on-disk format.

A Recording is a multi-channel waveform at a fixed sample rate plus the
timestamped annotation events (phase boundaries, flexions) that drive
segmentation and labeling downstream. Values are immutable after
construction and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .container import read_container, write_container
from .errors import NotFoundError, SknaError

MAGIC = b"SKNAREC\x00"
VERSION = 1

MIN_SAMPLE_RATE_HZ = 2000.0  # SKNA lives above 500 Hz; anything slower undersamples it


class Phase(Enum):
    BASELINE1 = "baseline1"
    STROOP1 = "stroop1"
    BASELINE2 = "baseline2"
    STROOP2 = "stroop2"
    POST_TASK_FLEX = "post_task_flex"


# Protocol order used to validate phase-start annotations.
PHASE_ORDER = (
    Phase.BASELINE1,
    Phase.STROOP1,
    Phase.BASELINE2,
    Phase.STROOP2,
    Phase.POST_TASK_FLEX,
)

STROOP_PHASES = frozenset({Phase.STROOP1, Phase.STROOP2})
BASELINE_PHASES = frozenset({Phase.BASELINE1, Phase.BASELINE2})


@dataclass(frozen=True)
class AnnotationEvent:
    """One timestamped event: either a phase start or a flexion on a channel."""

    time_s: float
    kind: str  # "phase_start" | "flexion"
    phase: Phase | None = None
    channel: int | None = None

    def __post_init__(self):
        if self.kind == "phase_start":
            if self.phase is None or self.channel is not None:
                raise ValueError("phase_start events carry a phase and no channel")
        elif self.kind == "flexion":
            if self.channel is None or self.phase is not None:
                raise ValueError("flexion events carry a channel and no phase")
        else:
            raise ValueError(f"unknown annotation kind {self.kind!r}")
        if self.time_s < 0:
            raise ValueError(f"annotation time {self.time_s} < 0")

    @staticmethod
    def phase_start(time_s: float, phase: Phase) -> "AnnotationEvent":
        return AnnotationEvent(time_s=time_s, kind="phase_start", phase=phase)

    @staticmethod
    def flexion(time_s: float, channel: int) -> "AnnotationEvent":
        return AnnotationEvent(time_s=time_s, kind="flexion", channel=channel)


@dataclass(frozen=True)
class Recording:
    """Multi-channel waveform with annotations.

    samples is float32, shape (n_channels, n_samples), channel-major —
    exactly the payload layout of the .skna format so round trips are
    bit-exact.
    """

    subject_id: str
    sample_rate_hz: float
    channel_names: tuple[str, ...]
    samples: np.ndarray
    annotations: tuple[AnnotationEvent, ...]
    duration_s: float
    _frozen: bool = field(default=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "channel_names", tuple(self.channel_names))
        object.__setattr__(self, "annotations", tuple(self.annotations))
        samples = np.ascontiguousarray(self.samples, dtype=np.float32)
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

        if self.sample_rate_hz < MIN_SAMPLE_RATE_HZ:
            raise ValueError(
                f"sample_rate_hz {self.sample_rate_hz} < minimum {MIN_SAMPLE_RATE_HZ}"
            )
        if samples.ndim != 2 or samples.shape[0] != len(self.channel_names):
            raise ValueError(
                f"samples shape {samples.shape} does not match "
                f"{len(self.channel_names)} channel names"
            )
        expected = int(round(self.duration_s * self.sample_rate_hz))
        if samples.shape[1] != expected:
            raise ValueError(
                f"{samples.shape[1]} samples per channel, expected "
                f"round({self.duration_s} * {self.sample_rate_hz}) = {expected}"
            )
        times = [a.time_s for a in self.annotations]
        if any(t2 < t1 for t1, t2 in zip(times, times[1:])):
            raise ValueError("annotations must be sorted ascending by time")
        if any(not (0.0 <= t <= self.duration_s) for t in times):
            raise ValueError("annotation time outside [0, duration_s]")
        phase_seq = [a.phase for a in self.annotations if a.kind == "phase_start"]
        if len(set(phase_seq)) != len(phase_seq):
            raise ValueError("duplicate phase_start annotations")
        order = [PHASE_ORDER.index(p) for p in phase_seq]
        if any(b <= a for a, b in zip(order, order[1:])):
            raise ValueError("phase starts out of protocol order")

    @property
    def n_channels(self) -> int:
        return self.samples.shape[0]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    def channel(self, index: int) -> np.ndarray:
        return self.samples[index]

    def flexions(self, channel: int | None = None) -> list[AnnotationEvent]:
        return [
            a
            for a in self.annotations
            if a.kind == "flexion" and (channel is None or a.channel == channel)
        ]

    def phase_starts(self) -> list[AnnotationEvent]:
        return [a for a in self.annotations if a.kind == "phase_start"]


def phase_span(rec: Recording, phase: Phase) -> tuple[float, float]:
    """Return (t_start, t_end) of a phase: from its start annotation to the
    next phase start, or to the end of the recording for the last phase."""
    starts = rec.phase_starts()
    for i, a in enumerate(starts):
        if a.phase == phase:
            t_end = starts[i + 1].time_s if i + 1 < len(starts) else rec.duration_s
            return a.time_s, t_end
    raise NotFoundError(f"phase {phase.value} not annotated in recording {rec.subject_id}")


def _annotation_to_json(a: AnnotationEvent) -> dict:
    d: dict = {"time_s": a.time_s, "kind": a.kind}
    if a.kind == "phase_start":
        d["phase"] = a.phase.value
    else:
        d["channel"] = a.channel
    return d


def _annotation_from_json(d: dict) -> AnnotationEvent:
    if d["kind"] == "phase_start":
        return AnnotationEvent.phase_start(d["time_s"], Phase(d["phase"]))
    return AnnotationEvent.flexion(d["time_s"], d["channel"])


def save_recording(rec: Recording, path) -> None:
    meta = {
        "subject_id": rec.subject_id,
        "sample_rate_hz": rec.sample_rate_hz,
        "duration_s": rec.duration_s,
        "channel_names": list(rec.channel_names),
        "n_samples": rec.n_samples,
        "annotations": [_annotation_to_json(a) for a in rec.annotations],
    }
    blob = np.ascontiguousarray(rec.samples, dtype="<f4").tobytes()
    write_container(path, MAGIC, VERSION, meta, blob)


def load_recording(path) -> Recording:
    meta, blob = read_container(Path(path), MAGIC, VERSION)
    n_ch = len(meta["channel_names"])
    n_samples = meta["n_samples"]
    samples = np.frombuffer(blob, dtype="<f4")
    if samples.size != n_ch * n_samples:
        raise SknaError(
            f"{path}: payload holds {samples.size} floats, expected {n_ch * n_samples}"
        )
    return Recording(
        subject_id=meta["subject_id"],
        sample_rate_hz=meta["sample_rate_hz"],
        channel_names=tuple(meta["channel_names"]),
        samples=samples.reshape(n_ch, n_samples),
        annotations=tuple(_annotation_from_json(d) for d in meta["annotations"]),
        duration_s=meta["duration_s"],
    )
