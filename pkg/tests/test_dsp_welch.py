import numpy as np
import pytest

from sknakit.dsp import welch_psd
from sknakit.errors import LengthError

FS = 10000.0


def integrate(psd):
    return float(
        np.sum(np.diff(psd.freq_axis_hz) * (psd.power_density[1:] + psd.power_density[:-1]) / 2.0)
    )


class TestWelch:
    def test_white_noise_integrates_to_variance(self, rng):
        x = rng.normal(0.0, 1.0, size=int(100 * FS))
        psd = welch_psd(x, FS)
        assert integrate(psd) == pytest.approx(1.0, rel=0.05)

    def test_sine_line_power_is_half_amplitude_squared(self, rng):
        amp = 0.8
        t = np.arange(int(20 * FS)) / FS
        x = amp * np.sin(2.0 * np.pi * 700.0 * t)  # 700 Hz sits on a 10 Hz bin
        psd = welch_psd(x, FS)
        sel = (psd.freq_axis_hz >= 670.0) & (psd.freq_axis_hz <= 730.0)
        peak_power = float(
            np.sum(
                np.diff(psd.freq_axis_hz[sel])
                * (psd.power_density[sel][1:] + psd.power_density[sel][:-1])
                / 2.0
            )
        )
        assert peak_power == pytest.approx(amp**2 / 2.0, rel=0.05)

    def test_zero_signal_gives_zero_psd(self):
        psd = welch_psd(np.zeros(5000), FS)
        assert np.all(psd.power_density == 0.0)

    def test_resolution_is_fs_over_seglen(self, rng):
        psd = welch_psd(rng.normal(size=3000), FS)
        assert psd.resolution_hz == pytest.approx(10.0)
        assert np.allclose(np.diff(psd.freq_axis_hz), 10.0)

    def test_short_signal_rejected(self):
        with pytest.raises(LengthError):
            welch_psd(np.zeros(999), FS)

    def test_density_is_nonnegative(self, rng):
        psd = welch_psd(rng.normal(size=4000), FS)
        assert np.all(psd.power_density >= 0.0)

    def test_variance_of_estimate_shrinks_with_length(self):
        # chi-square averaging: bin variance scales like 1/n_segments
        lengths = (int(2 * FS), int(8 * FS), int(32 * FS))
        spreads = []
        for n in lengths:
            per_seed = []
            for seed in range(6):
                x = np.random.default_rng(seed).normal(size=n)
                psd = welch_psd(x, FS)
                band = (psd.freq_axis_hz > 500.0) & (psd.freq_axis_hz < 4500.0)
                per_seed.append(np.var(psd.power_density[band] * FS))
            spreads.append(np.mean(per_seed))
        assert spreads[0] > spreads[1] > spreads[2]
        assert spreads[0] / spreads[2] > 5.0
