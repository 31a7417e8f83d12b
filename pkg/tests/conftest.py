import numpy as np
import pytest

from sknakit.synth import SynthConfig, synth_recording


def small_config(**overrides) -> SynthConfig:
    """Short five-phase config used across tests (seconds, not minutes)."""
    defaults = dict(
        subject_id="t00",
        phase_durations_s=(6.0, 12.0, 6.0, 12.0, 8.0),
        flexions_per_stroop_phase=2,
        flexions_post_task=2,
        seed=7,
    )
    defaults.update(overrides)
    return SynthConfig(**defaults)


@pytest.fixture(scope="session")
def small_rec():
    return synth_recording(small_config())


@pytest.fixture(scope="session")
def default_rec():
    """One full-length default-config recording (the expensive fixture)."""
    return synth_recording(SynthConfig(subject_id="subj00", seed=11))


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
