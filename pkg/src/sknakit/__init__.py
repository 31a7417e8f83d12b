"""sknakit: skin sympathetic nerve activity muscle-noise screening.

Synthetic SKNA-style recordings, 500-1000 Hz interference analysis
(PSD, 95% energy bands, SMIR), and a from-scratch spectrogram CNN that
screens 1-second segments for muscle-noise contamination.
"""

__version__ = "0.1.0"

from . import analysis, dataset, dsp, nn, recording, synth, trainer  # noqa: F401
