"""Signal analysis: band-pass filtering, spectrograms, Welch PSD, 95% energy
bands, and the signal-to-muscle-noise interference ratio (SMIR).

Conventions, pinned once here and relied on by tests:

* Band-pass filter: Butterworth, transfer-function (b, a) form, applied
  forward-backward (zero phase, squared magnitude response) with odd
  reflection padding of 3x the filter order on both ends.
* Spectrogram: periodic Hann window, 100-sample window, 50-sample hop,
  FFT length = window length, one-sided magnitude-squared power (no
  density scaling, no one-sided doubling), then 10*log10 with the linear
  power floored at 1e-12.
* Welch PSD: periodic Hann, 1000-sample segments, 50% overlap, mean
  averaging, one-sided density scaling (V^2/Hz) so that the integral over
  frequency recovers signal variance.
* 95% energy band: 2.5% / 97.5% quantiles of the cumulative (trapezoid)
  band power inside the search band, linearly interpolated between bins.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import butter, filtfilt

from .errors import (
    InvalidBandError,
    LengthError,
    ShapeError,
    UndefinedBandError,
)

SKNA_BAND_HZ = (500.0, 1000.0)

SPEC_WIN_LEN = 100
SPEC_HOP = 50
SPEC_DB_FLOOR = 1e-12

WELCH_SEG_LEN = 1000
WELCH_OVERLAP = 0.5


def _hann_periodic(n: int) -> np.ndarray:
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


# ---------------------------------------------------------------------------
# Band-pass filter
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FilterSpec:
    """Designed band-pass filter: rational transfer function b(z)/a(z)."""

    order: int
    low_cut_hz: float
    high_cut_hz: float
    sample_rate_hz: float
    b: np.ndarray
    a: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.b, dtype=np.float64)
        a = np.asarray(self.a, dtype=np.float64)
        b.setflags(write=False)
        a.setflags(write=False)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "a", a)
        if abs(a[0] - 1.0) > 1e-12:
            raise ValueError("denominator must be normalized (a[0] == 1)")
        poles = np.roots(a)
        if poles.size and np.max(np.abs(poles)) >= 1.0:
            raise ValueError("unstable filter: pole on or outside the unit circle")


def design_bandpass(
    sample_rate_hz: float,
    low_hz: float = SKNA_BAND_HZ[0],
    high_hz: float = SKNA_BAND_HZ[1],
    order: int = 4,
) -> FilterSpec:
    """Design a Butterworth band-pass with -3 dB points at the cutoffs."""
    nyq = sample_rate_hz / 2.0
    if not (0.0 < low_hz < high_hz < nyq):
        raise InvalidBandError(
            f"band ({low_hz}, {high_hz}) Hz invalid for fs={sample_rate_hz} Hz "
            f"(need 0 < low < high < {nyq})"
        )
    if order < 1:
        raise InvalidBandError(f"order must be >= 1, got {order}")
    b, a = butter(order, [low_hz, high_hz], btype="bandpass", fs=sample_rate_hz)
    return FilterSpec(
        order=order,
        low_cut_hz=low_hz,
        high_cut_hz=high_hz,
        sample_rate_hz=sample_rate_hz,
        b=b,
        a=a,
    )


def filter_zero_phase(signal: np.ndarray, spec: FilterSpec) -> np.ndarray:
    """Apply the band-pass forward and backward (zero phase).

    Output length equals input length; the effective magnitude response is
    |H(f)|^2. Edges are odd-reflection padded by 3x the filter order and
    trimmed after filtering.
    """
    signal = np.asarray(signal, dtype=np.float64)
    padlen = 3 * spec.order
    if signal.ndim != 1:
        raise ShapeError(f"expected 1-D signal, got shape {signal.shape}")
    if signal.size <= padlen:
        raise LengthError(f"signal length {signal.size} <= padding {padlen}")
    return filtfilt(spec.b, spec.a, signal, padtype="odd", padlen=padlen)


# ---------------------------------------------------------------------------
# Spectrogram
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Spectrogram:
    """Log-power time-frequency grid: power[n_bins, n_frames] in dB."""

    power: np.ndarray
    freq_axis_hz: np.ndarray
    time_axis_s: np.ndarray
    win_len: int = SPEC_WIN_LEN
    hop: int = SPEC_HOP

    def __post_init__(self):
        for name in ("power", "freq_axis_hz", "time_axis_s"):
            arr = np.asarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        n_bins, n_frames = self.power.shape
        if n_bins != self.win_len // 2 + 1:
            raise ValueError(f"{n_bins} bins inconsistent with win_len {self.win_len}")
        if self.freq_axis_hz.size != n_bins or self.time_axis_s.size != n_frames:
            raise ValueError("axis lengths inconsistent with power grid")
        if not np.all(np.isfinite(self.power)):
            raise ValueError("spectrogram contains non-finite entries")


def stft_power(segment: np.ndarray, sample_rate_hz: float,
               win_len: int = SPEC_WIN_LEN, hop: int = SPEC_HOP):
    """Linear (pre-dB) short-time power: |DFT(hann * frame)|^2, one-sided.

    Returns (power[n_bins, n_frames], freq_axis_hz, time_axis_s) with
    n_frames = floor((n - win_len) / hop) + 1; frames never pad or wrap.
    """
    segment = np.asarray(segment, dtype=np.float64)
    if segment.ndim != 1:
        raise ShapeError(f"expected 1-D segment, got shape {segment.shape}")
    if segment.size < win_len:
        raise LengthError(f"segment length {segment.size} < window {win_len}")
    frames = np.lib.stride_tricks.sliding_window_view(segment, win_len)[::hop]
    spectra = np.fft.rfft(frames * _hann_periodic(win_len), axis=1)
    power = (spectra.real**2 + spectra.imag**2).T
    n_frames = frames.shape[0]
    freq_axis = np.arange(win_len // 2 + 1) * (sample_rate_hz / win_len)
    time_axis = (np.arange(n_frames) * hop + win_len / 2.0) / sample_rate_hz
    return power, freq_axis, time_axis


def spectrogram(segment: np.ndarray, sample_rate_hz: float) -> Spectrogram:
    """Hann-windowed log-power spectrogram (dB, floored) of one segment."""
    power, freq_axis, time_axis = stft_power(segment, sample_rate_hz)
    db = 10.0 * np.log10(np.maximum(power, SPEC_DB_FLOOR))
    return Spectrogram(power=db, freq_axis_hz=freq_axis, time_axis_s=time_axis)


# ---------------------------------------------------------------------------
# Welch PSD
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Psd:
    """One-sided power spectral density (V^2/Hz) on a uniform frequency axis."""

    freq_axis_hz: np.ndarray
    power_density: np.ndarray
    resolution_hz: float

    def __post_init__(self):
        for name in ("freq_axis_hz", "power_density"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.freq_axis_hz.shape != self.power_density.shape:
            raise ValueError("frequency axis and density lengths differ")
        if np.any(self.power_density < 0):
            raise ValueError("power density must be non-negative")


def welch_psd(
    signal: np.ndarray,
    sample_rate_hz: float,
    seg_len: int = WELCH_SEG_LEN,
    overlap: float = WELCH_OVERLAP,
) -> Psd:
    """Welch PSD estimate: mean of Hann-windowed overlapped periodograms.

    Density-scaled so that integrating over frequency recovers the signal's
    mean-square value (Parseval).
    """
    signal = np.asarray(signal, dtype=np.float64)
    if signal.ndim != 1:
        raise ShapeError(f"expected 1-D signal, got shape {signal.shape}")
    if signal.size < seg_len:
        raise LengthError(f"signal length {signal.size} < segment length {seg_len}")
    if not (0.0 <= overlap < 1.0):
        raise InvalidBandError(f"overlap {overlap} outside [0, 1)")
    hop = max(1, int(round(seg_len * (1.0 - overlap))))
    window = _hann_periodic(seg_len)
    frames = np.lib.stride_tricks.sliding_window_view(signal, seg_len)[::hop]
    spectra = np.fft.rfft(frames * window, axis=1)
    power = (spectra.real**2 + spectra.imag**2).mean(axis=0)
    scale = 1.0 / (sample_rate_hz * np.sum(window**2))
    density = power * scale
    density[1:] *= 2.0
    if seg_len % 2 == 0:
        density[-1] /= 2.0  # Nyquist bin is not mirrored
    freq_axis = np.arange(seg_len // 2 + 1) * (sample_rate_hz / seg_len)
    return Psd(
        freq_axis_hz=freq_axis,
        power_density=density,
        resolution_hz=sample_rate_hz / seg_len,
    )


def mean_psd(psds: list[Psd]) -> Psd:
    """Average PSDs that share a frequency axis (corpus-level averaging)."""
    if not psds:
        raise ValueError("no PSDs to average")
    first = psds[0]
    for p in psds[1:]:
        if not np.array_equal(p.freq_axis_hz, first.freq_axis_hz):
            raise ShapeError("PSD frequency axes differ")
    stacked = np.stack([p.power_density for p in psds])
    return Psd(
        freq_axis_hz=first.freq_axis_hz,
        power_density=stacked.mean(axis=0),
        resolution_hz=first.resolution_hz,
    )


# ---------------------------------------------------------------------------
# 95% energy band and SMIR
# ---------------------------------------------------------------------------

def band_power(psd: Psd, band: tuple[float, float] = SKNA_BAND_HZ) -> float:
    """Integrated power (trapezoid) of the PSD over a band, in V^2."""
    lo, hi = band
    mask = (psd.freq_axis_hz >= lo) & (psd.freq_axis_hz <= hi)
    if mask.sum() < 2:
        raise UndefinedBandError(f"PSD does not cover band ({lo}, {hi}) Hz")
    f = psd.freq_axis_hz[mask]
    d = psd.power_density[mask]
    return float(np.sum(np.diff(f) * (d[:-1] + d[1:]) / 2.0))


def _invert_cumulative(freqs: np.ndarray, cum: np.ndarray, target: float) -> float:
    idx = int(np.searchsorted(cum, target, side="left"))
    if idx == 0:
        return float(freqs[0])
    idx = min(idx, cum.size - 1)
    lo_c, hi_c = cum[idx - 1], cum[idx]
    if hi_c == lo_c:
        return float(freqs[idx])
    frac = (target - lo_c) / (hi_c - lo_c)
    return float(freqs[idx - 1] + frac * (freqs[idx] - freqs[idx - 1]))


def energy_band(
    psd: Psd,
    search_band: tuple[float, float] = SKNA_BAND_HZ,
    fraction: float = 0.95,
) -> tuple[float, float]:
    """Frequency interval holding the central `fraction` of band power.

    Band power is accumulated by trapezoid integration over the bins inside
    search_band; the (1-fraction)/2 and 1-(1-fraction)/2 quantiles of that
    cumulative curve are located by linear interpolation between bins.
    """
    if not (0.0 < fraction < 1.0):
        raise InvalidBandError(f"fraction {fraction} outside (0, 1)")
    lo, hi = search_band
    if not (psd.freq_axis_hz[0] <= lo < hi <= psd.freq_axis_hz[-1]):
        raise UndefinedBandError(
            f"PSD axis [{psd.freq_axis_hz[0]}, {psd.freq_axis_hz[-1]}] Hz "
            f"does not cover search band ({lo}, {hi})"
        )
    mask = (psd.freq_axis_hz >= lo) & (psd.freq_axis_hz <= hi)
    freqs = psd.freq_axis_hz[mask]
    dens = psd.power_density[mask]
    if freqs.size < 2:
        raise UndefinedBandError("fewer than two PSD bins inside the search band")
    steps = np.diff(freqs) * (dens[:-1] + dens[1:]) / 2.0
    cum = np.concatenate([[0.0], np.cumsum(steps)])
    total = cum[-1]
    if total <= 0.0:
        raise UndefinedBandError("zero total power in the search band")
    q = (1.0 - fraction) / 2.0
    f_lo = _invert_cumulative(freqs, cum, q * total)
    f_hi = _invert_cumulative(freqs, cum, (1.0 - q) * total)
    return f_lo, f_hi


@dataclass(frozen=True)
class SmirCurve:
    """Per-bin signal-to-muscle-noise ratio in dB over the SKNA band.

    Bins where either PSD is zero are excluded: smir_db is NaN there and
    `valid` is False.
    """

    freq_axis_hz: np.ndarray
    smir_db: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        for name in ("freq_axis_hz", "smir_db", "valid"):
            arr = np.asarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not (self.freq_axis_hz.shape == self.smir_db.shape == self.valid.shape):
            raise ValueError("SMIR axis/value/mask lengths differ")
        if not np.all(np.isfinite(self.smir_db[self.valid])):
            raise ValueError("SMIR must be finite on valid bins")

    def mean_db(self, band: tuple[float, float]) -> float:
        lo, hi = band
        sel = (self.freq_axis_hz >= lo) & (self.freq_axis_hz <= hi) & self.valid
        if not sel.any():
            raise UndefinedBandError(f"no valid SMIR bins in ({lo}, {hi}) Hz")
        return float(self.smir_db[sel].mean())


def smir(
    psd_signal: Psd,
    psd_noise: Psd,
    band: tuple[float, float] = SKNA_BAND_HZ,
) -> SmirCurve:
    """10*log10(P_signal / P_noise) per bin, restricted to the SKNA band."""
    if not np.array_equal(psd_signal.freq_axis_hz, psd_noise.freq_axis_hz):
        raise ShapeError("signal and noise PSDs have different frequency axes")
    lo, hi = band
    mask = (psd_signal.freq_axis_hz >= lo) & (psd_signal.freq_axis_hz <= hi)
    freqs = psd_signal.freq_axis_hz[mask]
    ps = psd_signal.power_density[mask]
    pn = psd_noise.power_density[mask]
    valid = (ps > 0.0) & (pn > 0.0)
    ratio = np.full(freqs.shape, np.nan)
    ratio[valid] = 10.0 * np.log10(ps[valid] / pn[valid])
    return SmirCurve(freq_axis_hz=freqs, smir_db=ratio, valid=valid)
