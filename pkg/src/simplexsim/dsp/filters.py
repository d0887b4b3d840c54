"""Matched filtering and chromatic dispersion compensation.

Both are zero-phase frequency-domain operations on the cyclic block, so
symbol centers stay on their sample indices and the dispersion unwind is the
exact inverse of the channel's phase.
"""

from __future__ import annotations

import numpy as np
import scipy.fft

from ..channel import FiberSpec, cd_phase
from ..tx import _rrc_response
from ..waveform import DualPolWaveform


def matched_filter(
    wf: DualPolWaveform, symbol_rate: float, pulse: str = "nrz", rrc_rolloff: float = 0.15
) -> DualPolWaveform:
    """Filter with the conjugate pulse spectrum, delay removed.

    For NRZ the receiver's pulse model is the unit rectangle of one symbol,
    whose zero-phase spectrum is sinc(f T): the frequency-domain equivalent
    of integrate-and-dump. For RRC the response is the root-raised cosine,
    making tx + rx together Nyquist.
    """
    f = wf.freq_axis()
    if pulse == "nrz":
        h = np.sinc(f / symbol_rate)
    elif pulse == "rrc":
        h = _rrc_response(f, symbol_rate, rrc_rolloff)
    else:
        raise ValueError(f"unknown pulse shape {pulse!r}")
    x = scipy.fft.ifft(scipy.fft.fft(wf.x) * h)
    y = scipy.fft.ifft(scipy.fft.fft(wf.y) * h)
    return wf.with_fields(x, y)


def cd_compensate(wf: DualPolWaveform, fiber: FiberSpec) -> DualPolWaveform:
    """Unwind the dispersion phase of `fiber` (attenuation untouched)."""
    f = wf.freq_axis()
    h = np.exp(1j * cd_phase(f, fiber, wf.center_wavelength))
    x = scipy.fft.ifft(scipy.fft.fft(wf.x) * h)
    y = scipy.fft.ifft(scipy.fft.fft(wf.y) * h)
    return wf.with_fields(x, y)
