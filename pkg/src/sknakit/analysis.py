"""Corpus-level interference analysis.

Two conditions are compared across subjects:

* signal: stress-task segments from the still channel (sympathetic
  activity free of muscle interference),
* noise: post-task flexing segments from the moving channel (pure muscle
  activity at rest, no sympathetic stimulation).

Each 1-second filtered segment gets a Welch PSD; condition PSDs are the
mean over segments and subjects. From those come the 95% energy bands,
band powers, and the SMIR curve.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import dsp
from .dataset import LabelRules, SegmentLabel, extract_labeled_segments
from .errors import InvalidConfigError
from .recording import Recording
from .synth import STILL_CHANNEL


@dataclass(frozen=True)
class InterferenceReport:
    psd_signal: dsp.Psd
    psd_noise: dsp.Psd
    signal_band: tuple[float, float]
    noise_band: tuple[float, float]
    signal_band_power: float
    noise_band_power: float
    smir: dsp.SmirCurve
    n_signal_segments: int
    n_noise_segments: int

    def band_power_ratio_db(self) -> float:
        return 10.0 * float(np.log10(self.signal_band_power / self.noise_band_power))

    def to_json(self) -> dict:
        return {
            "signal_band_hz": list(self.signal_band),
            "noise_band_hz": list(self.noise_band),
            "signal_band_power_v2": self.signal_band_power,
            "noise_band_power_v2": self.noise_band_power,
            "band_power_ratio_db": self.band_power_ratio_db(),
            "mean_smir_db_500_700": self.smir.mean_db((500.0, 700.0)),
            "mean_smir_db_700_1000": self.smir.mean_db((700.0, 1000.0)),
            "n_signal_segments": self.n_signal_segments,
            "n_noise_segments": self.n_noise_segments,
        }


def condition_segments(
    recordings: list[Recording], rules: LabelRules | None = None
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """(signal, noise) sample arrays per the paper's two PSD conditions."""
    signal, noise = [], []
    for rec in recordings:
        labeled, _ = extract_labeled_segments(rec, rules)
        for seg in labeled:
            if seg.label == SegmentLabel.STROOP and seg.channel == STILL_CHANNEL:
                signal.append(seg.samples)
            elif seg.label == SegmentLabel.REST_FLEX:
                noise.append(seg.samples)
    return signal, noise


def _condition_psd(segments: list[np.ndarray], sample_rate_hz: float) -> dsp.Psd:
    return dsp.mean_psd([dsp.welch_psd(s, sample_rate_hz) for s in segments])


def interference_report(
    recordings: list[Recording], rules: LabelRules | None = None
) -> InterferenceReport:
    if not recordings:
        raise InvalidConfigError("no recordings to analyze")
    fs = recordings[0].sample_rate_hz
    signal_segs, noise_segs = condition_segments(recordings, rules)
    if not signal_segs or not noise_segs:
        raise InvalidConfigError(
            f"need both conditions: {len(signal_segs)} signal / {len(noise_segs)} noise segments"
        )
    psd_signal = _condition_psd(signal_segs, fs)
    psd_noise = _condition_psd(noise_segs, fs)
    return InterferenceReport(
        psd_signal=psd_signal,
        psd_noise=psd_noise,
        signal_band=dsp.energy_band(psd_signal),
        noise_band=dsp.energy_band(psd_noise),
        signal_band_power=dsp.band_power(psd_signal),
        noise_band_power=dsp.band_power(psd_noise),
        smir=dsp.smir(psd_signal, psd_noise),
        n_signal_segments=len(signal_segs),
        n_noise_segments=len(noise_segs),
    )
