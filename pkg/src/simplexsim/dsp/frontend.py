"""Coherent receiver front end.

Applies local-oscillator phase noise, the scope low-pass, capture-rate
decimation and exact resampling to 2 samples per symbol, then normalizes
power. Everything downstream of the front end runs at 2 samples per symbol.
"""

from __future__ import annotations

import numpy as np
import scipy.fft

from ..tx import dac_response, laser_phase
from ..waveform import DualPolWaveform, resample_waveform


def lo_mix(
    wf: DualPolWaveform, lo_linewidth: float, rng: np.random.Generator
) -> DualPolWaveform:
    """Mix with a noisy local oscillator: the LO phase walk subtracts."""
    if lo_linewidth == 0.0:
        return wf.copy()
    phi = laser_phase(len(wf), wf.sample_rate, lo_linewidth, rng)
    rot = np.exp(-1j * phi)
    return wf.with_fields(wf.x * rot, wf.y * rot)


def scope_filter(wf: DualPolWaveform, bandwidth: float | None) -> DualPolWaveform:
    """Receiver electrical low-pass (5th-order Bessel), None = ideal."""
    if bandwidth is None:
        return wf.copy()
    h = dac_response(wf.freq_axis(), bandwidth)
    x = scipy.fft.ifft(scipy.fft.fft(wf.x) * h)
    y = scipy.fft.ifft(scipy.fft.fft(wf.y) * h)
    return wf.with_fields(x, y)


def agc(wf: DualPolWaveform) -> DualPolWaveform:
    """Normalize total average power to 1."""
    p = wf.power()
    if p == 0.0:
        raise ValueError("cannot normalize an all-zero waveform")
    g = 1.0 / np.sqrt(p)
    return wf.with_fields(wf.x * g, wf.y * g)


def frontend(
    wf: DualPolWaveform,
    symbol_rate: float,
    lo_linewidth: float = 0.0,
    rx_bandwidth: float | None = None,
    adc_rate: float | None = None,
    rng: np.random.Generator | None = None,
) -> DualPolWaveform:
    """LO mixing, scope band limit, capture and resampling to 2 sps."""
    if lo_linewidth != 0.0:
        if rng is None:
            raise ValueError("LO phase noise needs an rng")
        wf = lo_mix(wf, lo_linewidth, rng)
    wf = scope_filter(wf, rx_bandwidth)
    if adc_rate is not None and adc_rate < wf.sample_rate:
        wf = resample_waveform(wf, adc_rate)
    target = 2.0 * symbol_rate
    if wf.sample_rate < target:
        raise ValueError(
            f"capture rate {wf.sample_rate} below 2 samples/symbol ({target})"
        )
    if wf.sample_rate != target:
        wf = resample_waveform(wf, target)
    return agc(wf)
