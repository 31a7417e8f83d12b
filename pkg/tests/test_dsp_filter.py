import numpy as np
import pytest

from sknakit.dsp import design_bandpass, filter_zero_phase
from sknakit.errors import InvalidBandError, LengthError

FS = 10000.0


def response_magnitude(spec, freq_hz: float) -> float:
    """Independent oracle: |H| from the coefficients, evaluated on the unit
    circle by direct summation of b[k] z^-k / a[k] z^-k."""
    w = 2.0 * np.pi * freq_hz / spec.sample_rate_hz
    z_pow = np.exp(-1j * w * np.arange(max(len(spec.b), len(spec.a))))
    num = np.sum(spec.b * z_pow[: len(spec.b)])
    den = np.sum(spec.a * z_pow[: len(spec.a)])
    return float(np.abs(num / den))


def steady_amplitude(y: np.ndarray) -> float:
    """Peak amplitude over the middle half of a sinusoid's response."""
    n = y.size
    return float(np.max(np.abs(y[n // 4 : 3 * n // 4])))


class TestDesignBandpass:
    def test_passband_center_is_unity(self):
        spec = design_bandpass(FS, 500.0, 1000.0, order=4)
        assert response_magnitude(spec, 750.0) == pytest.approx(1.0, abs=0.01)

    def test_deep_stopband_at_50_hz(self):
        spec = design_bandpass(FS, 500.0, 1000.0, order=4)
        assert response_magnitude(spec, 50.0) < 0.01

    def test_cutoffs_are_3_db(self):
        spec = design_bandpass(FS, 500.0, 1000.0, order=4)
        lo_db = 20.0 * np.log10(response_magnitude(spec, 500.0))
        hi_db = 20.0 * np.log10(response_magnitude(spec, 1000.0))
        assert lo_db == pytest.approx(-3.0, abs=0.5)
        assert hi_db == pytest.approx(-3.0, abs=0.5)

    def test_band_above_nyquist_rejected(self):
        with pytest.raises(InvalidBandError):
            design_bandpass(FS, 6000.0, 7000.0, order=4)

    def test_inverted_band_rejected(self):
        with pytest.raises(InvalidBandError):
            design_bandpass(FS, 1000.0, 500.0, order=4)

    def test_poles_inside_unit_circle(self):
        spec = design_bandpass(FS, 500.0, 1000.0, order=4)
        assert np.max(np.abs(np.roots(spec.a))) < 1.0

    def test_denominator_normalized(self):
        spec = design_bandpass(FS)
        assert spec.a[0] == pytest.approx(1.0)


@pytest.fixture(scope="module")
def spec():
    return design_bandpass(FS, 500.0, 1000.0, order=4)


class TestFilterZeroPhase:

    def test_dc_is_annihilated(self, spec):
        x = np.full(10000, 3.7)
        y = filter_zero_phase(x, spec)
        assert np.max(np.abs(y)) < 1e-6 * 3.7

    def test_750_hz_passes_at_unity(self, spec):
        t = np.arange(20000) / FS
        y = filter_zero_phase(np.sin(2 * np.pi * 750.0 * t), spec)
        # forward-backward squares the magnitude response
        expected = response_magnitude(spec, 750.0) ** 2
        assert steady_amplitude(y) == pytest.approx(expected, rel=0.005)
        assert steady_amplitude(y) == pytest.approx(1.0, rel=0.02)

    def test_100_hz_is_blocked(self, spec):
        t = np.arange(20000) / FS
        y = filter_zero_phase(np.sin(2 * np.pi * 100.0 * t), spec)
        assert steady_amplitude(y) < 1e-3

    def test_output_length_equals_input_length(self, spec, rng):
        x = rng.normal(size=4321)
        assert filter_zero_phase(x, spec).shape == x.shape

    def test_too_short_signal_rejected(self, spec):
        with pytest.raises(LengthError):
            filter_zero_phase(np.zeros(3 * spec.order), spec)

    def test_zero_phase_peak_correlation_at_zero_lag(self, spec, rng):
        # band-limited input: white noise through the same band
        x = filter_zero_phase(rng.normal(size=30000), spec)
        y = filter_zero_phase(x, spec)
        lags = np.arange(-200, 201)
        xc = [np.dot(x[200:-200], y[200 + k : y.size - 200 + k]) for k in lags]
        assert lags[int(np.argmax(xc))] == 0
