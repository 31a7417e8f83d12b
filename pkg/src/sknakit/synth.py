"""Synthetic two-channel recording generator.

Stands in for the unavailable human-subject data: a five-phase protocol
(baseline / stress / baseline / stress / post-task flexing) with

* band-limited sympathetic bursts (Poisson arrivals, only in stress phases,
  on both channels, spectrally concentrated inside 500-1000 Hz),
* muscle-noise bursts around annotated flexions on the "moving" channel
  only, broadband with a one-pole low-frequency tilt whose tail extends
  into the 500-1000 Hz band,
* a periodic ECG-like spike train on both channels, and
* a white noise floor.

Flexion annotations are deliberately offset from the true muscle-noise
center by a uniform jitter (default +-0.5 s) to emulate hand-annotation
error. The RNG draw order is fixed, so a config (including its seed) fully
determines the output bytes.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.signal import lfilter
from scipy.signal.windows import tukey

from .errors import InvalidConfigError
from .recording import PHASE_ORDER, AnnotationEvent, Phase, Recording

STILL_CHANNEL = 0
MOVING_CHANNEL = 1
CHANNEL_NAMES = ("still", "moving")

# Flexions are kept this far from phase edges so jittered muscle noise
# stays inside its phase.
_FLEX_EDGE_MARGIN_S = 2.0
_FLEX_MIN_GAP_S = 2.5
_BURST_END_MARGIN_S = 0.35
_BAND_TAPER_HZ = 40.0


@dataclass(frozen=True)
class SynthConfig:
    subject_id: str = "subj00"
    sample_rate_hz: float = 10000.0
    # (baseline1, stroop1, baseline2, stroop2, post-task-flex) durations.
    # Defaults are half the study protocol's 2+5+2+5+2 minutes so a pooled
    # two-channel recording yields per-subject segment counts on the same
    # scale as the study dataset (~240 baseline / ~600 stress-phase).
    phase_durations_s: tuple[float, ...] = (60.0, 150.0, 60.0, 150.0, 60.0)
    skna_burst_rate_hz: float = 3.2
    skna_band_hz: tuple[float, float] = (500.0, 1000.0)
    skna_peak_hz: float = 760.0
    skna_width_hz: float = 110.0
    skna_burst_gain: float = 14e-6
    skna_burst_len_s: tuple[float, float] = (0.05, 0.30)
    emg_gain: float = 1e-4
    emg_spectral_tilt: float = 0.90
    # Physical muscle-noise burst length; the labeling rule's nominal
    # flex length (0.5 s) marks only the core of a real contraction.
    emg_burst_len_s: float = 1.4
    ecg_rate_bpm: float = 72.0
    ecg_gain: float = 2e-4
    baseline_noise_rms: float = 2e-6
    flexions_per_stroop_phase: int = 40
    flexions_post_task: int = 10
    flex_length_s: float = 0.5
    annotation_jitter_s: float = 0.25
    seed: int = 0

    def __post_init__(self):
        if len(self.phase_durations_s) != len(PHASE_ORDER):
            raise InvalidConfigError(
                f"need {len(PHASE_ORDER)} phase durations, got {len(self.phase_durations_s)}"
            )
        if any(d <= 0 for d in self.phase_durations_s):
            raise InvalidConfigError(f"phase durations must be > 0: {self.phase_durations_s}")
        for name in ("skna_burst_gain", "emg_gain", "ecg_gain", "baseline_noise_rms"):
            if getattr(self, name) < 0:
                raise InvalidConfigError(f"{name} must be >= 0")
        if self.skna_burst_rate_hz <= 0 or self.ecg_rate_bpm <= 0:
            raise InvalidConfigError("rates must be > 0")
        if not (0.0 <= self.emg_spectral_tilt < 1.0):
            raise InvalidConfigError(f"emg_spectral_tilt {self.emg_spectral_tilt} outside [0, 1)")
        lo, hi = self.skna_band_hz
        if not (0.0 < lo < hi < self.sample_rate_hz / 2.0):
            raise InvalidConfigError(f"skna_band_hz {self.skna_band_hz} outside (0, Nyquist)")
        b_lo, b_hi = self.skna_burst_len_s
        if not (0.0 < b_lo <= b_hi):
            raise InvalidConfigError(f"burst length range {self.skna_burst_len_s} invalid")
        if self.flex_length_s <= 0 or self.emg_burst_len_s <= 0 or self.annotation_jitter_s < 0:
            raise InvalidConfigError("flex/EMG lengths must be > 0 and jitter >= 0")
        if self.flexions_per_stroop_phase < 0 or self.flexions_post_task < 0:
            raise InvalidConfigError("flexion counts must be >= 0")

    @property
    def duration_s(self) -> float:
        return float(sum(self.phase_durations_s))

    def phase_start_times(self) -> list[float]:
        starts = [0.0]
        for d in self.phase_durations_s[:-1]:
            starts.append(starts[-1] + d)
        return starts


def _times_with_min_gap(rng, k: int, t0: float, t1: float, gap: float) -> np.ndarray:
    """k sorted times in [t0, t1] with pairwise gaps >= gap (exact, no rejection)."""
    if k == 0:
        return np.empty(0)
    slack = (t1 - t0) - (k - 1) * gap
    if slack <= 0:
        raise InvalidConfigError(
            f"cannot place {k} events with {gap} s gaps in {t1 - t0:.1f} s"
        )
    u = np.sort(rng.uniform(0.0, slack, size=k))
    return t0 + u + np.arange(k) * gap


def _add_envelope(env: np.ndarray, fs: float, t_start: float, length_s: float) -> None:
    i0 = int(round(t_start * fs))
    i1 = int(round((t_start + length_s) * fs))
    i0, i1 = max(i0, 0), min(i1, env.size)
    if i1 - i0 >= 2:
        env[i0:i1] += tukey(i1 - i0, alpha=0.5)


def _shaped_band_noise(rng, n: int, fs: float, band: tuple[float, float],
                       peak_hz: float, width_hz: float) -> np.ndarray:
    """Unit-RMS noise band-limited to `band` with a Gaussian spectral bump.

    Shaped in the frequency domain: hard cosine-tapered edges at the band
    limits, smooth concentration around peak_hz inside them.
    """
    white = rng.normal(0.0, 1.0, size=n)
    spec = np.fft.rfft(white)
    f = np.fft.rfftfreq(n, 1.0 / fs)
    lo, hi = band
    tw = min(_BAND_TAPER_HZ, (hi - lo) / 4.0)
    taper = np.zeros_like(f)
    inside = (f >= lo) & (f <= hi)
    taper[inside] = 1.0
    rise = (f >= lo) & (f < lo + tw)
    taper[rise] = 0.5 - 0.5 * np.cos(np.pi * (f[rise] - lo) / tw)
    fall = (f > hi - tw) & (f <= hi)
    taper[fall] = 0.5 - 0.5 * np.cos(np.pi * (hi - f[fall]) / tw)
    bump = np.exp(-0.5 * ((f - peak_hz) / width_hz) ** 2)
    x = np.fft.irfft(spec * taper * bump, n)
    rms = np.sqrt(np.mean(x**2))
    return x / rms if rms > 0 else x


def _tilted_noise(rng, n: int, tilt: float) -> np.ndarray:
    """Unit-RMS one-pole-shaped noise: mostly low-frequency, tail above 500 Hz."""
    white = rng.normal(0.0, 1.0, size=n)
    x = lfilter([1.0], [1.0, -tilt], white)
    rms = np.sqrt(np.mean(x**2))
    return x / rms if rms > 0 else x


def _ecg_template(fs: float, gain: float) -> np.ndarray:
    t = (np.arange(int(round(0.024 * fs)) + 1) - int(round(0.012 * fs))) / fs
    r_wave = np.exp(-0.5 * (t / 0.002) ** 2)
    s_dip = -0.3 * np.exp(-0.5 * ((t - 0.006) / 0.003) ** 2)
    return gain * (r_wave + s_dip)


def _ecg_train(n: int, fs: float, rate_bpm: float, gain: float) -> np.ndarray:
    out = np.zeros(n)
    tpl = _ecg_template(fs, gain)
    period = 60.0 / rate_bpm
    t = period / 2.0
    while t * fs < n:
        i0 = int(round(t * fs))
        i1 = min(i0 + tpl.size, n)
        out[i0:i1] += tpl[: i1 - i0]
        t += period
    return out


def synth_recording(cfg: SynthConfig) -> Recording:
    """Generate one deterministic two-channel recording from a config.

    Channel 0 ("still") never moves; channel 1 ("moving") carries all
    flexion annotations and their muscle noise. Stress phases carry
    sympathetic bursts on both channels; post-task flexions occur with no
    bursts present.
    """
    rng = np.random.default_rng(cfg.seed)
    fs = cfg.sample_rate_hz
    n = int(round(cfg.duration_s * fs))
    starts = cfg.phase_start_times()
    spans = {
        phase: (starts[i], starts[i] + cfg.phase_durations_s[i])
        for i, phase in enumerate(PHASE_ORDER)
    }

    annotations = [AnnotationEvent.phase_start(t, p) for p, t in zip(PHASE_ORDER, starts)]

    # Draw 1: flexion annotation times, phase order Stroop1, Stroop2, post-task.
    flex_times: list[float] = []
    for phase, count in (
        (Phase.STROOP1, cfg.flexions_per_stroop_phase),
        (Phase.STROOP2, cfg.flexions_per_stroop_phase),
        (Phase.POST_TASK_FLEX, cfg.flexions_post_task),
    ):
        t0, t1 = spans[phase]
        ts = _times_with_min_gap(
            rng, count, t0 + _FLEX_EDGE_MARGIN_S, t1 - _FLEX_EDGE_MARGIN_S, _FLEX_MIN_GAP_S
        )
        flex_times.extend(float(t) for t in ts)
    annotations.extend(AnnotationEvent.flexion(t, MOVING_CHANNEL) for t in flex_times)
    annotations.sort(key=lambda a: (a.time_s, a.kind))

    # Draw 2: true muscle-noise centers, jittered off the annotations.
    emg_centers = [
        t + rng.uniform(-cfg.annotation_jitter_s, cfg.annotation_jitter_s)
        for t in flex_times
    ]

    # Draw 3: sympathetic burst arrivals (Poisson) and lengths, stress phases only.
    bursts: list[tuple[float, float]] = []
    for phase in (Phase.STROOP1, Phase.STROOP2):
        t0, t1 = spans[phase]
        t = t0
        while True:
            t += rng.exponential(1.0 / cfg.skna_burst_rate_hz)
            if t >= t1 - _BURST_END_MARGIN_S:
                break
            bursts.append((t, rng.uniform(*cfg.skna_burst_len_s)))

    env_skna = np.zeros(n)
    for t, dur in bursts:
        _add_envelope(env_skna, fs, t, dur)
    env_emg = np.zeros(n)
    for c in emg_centers:
        _add_envelope(env_emg, fs, c - cfg.emg_burst_len_s / 2.0, cfg.emg_burst_len_s)

    # Draws 4-6: noise floors, burst carriers, muscle-noise carrier.
    still = rng.normal(0.0, 1.0, size=n) * cfg.baseline_noise_rms
    moving = rng.normal(0.0, 1.0, size=n) * cfg.baseline_noise_rms
    lo, hi = cfg.skna_band_hz
    still += cfg.skna_burst_gain * env_skna * _shaped_band_noise(
        rng, n, fs, (lo, hi), cfg.skna_peak_hz, cfg.skna_width_hz
    )
    moving += cfg.skna_burst_gain * env_skna * _shaped_band_noise(
        rng, n, fs, (lo, hi), cfg.skna_peak_hz, cfg.skna_width_hz
    )
    moving += cfg.emg_gain * env_emg * _tilted_noise(rng, n, cfg.emg_spectral_tilt)

    ecg = _ecg_train(n, fs, cfg.ecg_rate_bpm, cfg.ecg_gain)
    still += ecg
    moving += ecg

    return Recording(
        subject_id=cfg.subject_id,
        sample_rate_hz=fs,
        channel_names=CHANNEL_NAMES,
        samples=np.stack([still, moving]).astype(np.float32),
        annotations=tuple(annotations),
        duration_s=cfg.duration_s,
    )


def corpus_configs(
    n_subjects: int, seed: int, base: SynthConfig | None = None
) -> list[SynthConfig]:
    """Per-subject configs derived from one corpus seed.

    Subject seeds come from numpy's SeedSequence spawn chain; each subject
    also gets mild (+-15%) gain/rate variation so subjects are not clones.
    """
    if n_subjects < 1:
        raise InvalidConfigError(f"n_subjects must be >= 1, got {n_subjects}")
    base = base if base is not None else SynthConfig()
    configs = []
    for i, child in enumerate(np.random.SeedSequence(seed).spawn(n_subjects)):
        state = child.generate_state(2, np.uint64)
        jitter_rng = np.random.default_rng(int(state[1]))
        configs.append(
            replace(
                base,
                subject_id=f"subj{i:02d}",
                seed=int(state[0] >> 1),
                skna_burst_gain=base.skna_burst_gain * jitter_rng.uniform(0.85, 1.15),
                emg_gain=base.emg_gain * jitter_rng.uniform(0.85, 1.15),
                skna_burst_rate_hz=base.skna_burst_rate_hz * jitter_rng.uniform(0.85, 1.15),
                ecg_rate_bpm=base.ecg_rate_bpm * jitter_rng.uniform(0.9, 1.1),
            )
        )
    return configs
