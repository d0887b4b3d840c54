"""Transmitter chain: bit mapping, pulse shaping, DAC model, laser model.

The chain works on one cyclic block: map_bits produces unit-average-power
symbols, pulse_shape expands them to samples_per_symbol, dac_model applies a
Bessel low-pass per electrical tributary (with optional magnitude
pre-compensation), apply_laser multiplies the common carrier phase process,
and set_power scales to the requested launch power.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft
import scipy.signal

from .formats import FormatDescriptor
from .sequences import BitStream
from .waveform import DualPolWaveform, SymbolStream

MIN_LAUNCH_DBM = -10.0
MAX_LAUNCH_DBM = 25.0


@dataclass
class TxConfig:
    """Transmitter settings.

    ``dac_bandwidth`` of None means an ideal (infinite bandwidth) DAC;
    otherwise a 5th-order Bessel low-pass with its 3 dB point there is
    applied to each of the four electrical tributaries. ``dac_precomp``
    pre-emphasizes the signal spectrum by the inverse filter magnitude,
    capped at ``precomp_max_db``.
    """

    symbol_rate: float = 16e9
    samples_per_symbol: int = 4
    pulse: str = "nrz"
    rrc_rolloff: float = 0.15
    dac_bandwidth: float | None = None
    dac_precomp: bool = False
    precomp_max_db: float = 6.0
    laser_linewidth: float = 0.0
    freq_offset: float = 0.0
    launch_power_dbm: float = 0.0
    center_wavelength: float = 1550e-9

    def __post_init__(self) -> None:
        if self.pulse not in ("nrz", "rrc"):
            raise ValueError(f"unknown pulse shape {self.pulse!r}")
        if self.samples_per_symbol < 2:
            raise ValueError("samples_per_symbol must be >= 2")
        if not MIN_LAUNCH_DBM <= self.launch_power_dbm <= MAX_LAUNCH_DBM:
            raise ValueError(
                f"launch power {self.launch_power_dbm} dBm outside "
                f"[{MIN_LAUNCH_DBM}, {MAX_LAUNCH_DBM}]"
            )

    @property
    def sample_rate(self) -> float:
        return self.symbol_rate * self.samples_per_symbol


def map_bits(bits: BitStream | np.ndarray, fd: FormatDescriptor, symbol_rate: float) -> SymbolStream:
    """Map a bit sequence to normalized dual-polarization symbols.

    The bit count must divide evenly into symbols. For differential formats
    each polarization's bit stream is precoded d_k = b_k xor d_{k-1} with
    d_{-1} = 0 before mapping, so information rides on sign changes.
    Output is scaled to unit average dual-pol symbol power.
    """
    b = bits.bits if isinstance(bits, BitStream) else np.asarray(bits, dtype=np.uint8)
    bps = fd.bits_per_symbol
    if len(b) % bps != 0:
        raise ValueError(f"bit count {len(b)} not divisible by {bps} bits/symbol")
    groups = b.reshape(-1, bps)
    if fd.differential:
        groups = np.bitwise_xor.accumulate(groups, axis=0)
    weights = 1 << np.arange(bps - 1, -1, -1, dtype=np.int64)
    idx = groups.astype(np.int64) @ weights
    # Label rows are in index order for all built-in formats; assert cheaply.
    order = fd.label_index()
    lut = np.empty(fd.n_points, dtype=np.int64)
    lut[order] = np.arange(fd.n_points)
    pts = fd.points[lut[idx]] * fd.scale
    return SymbolStream(
        x=pts[:, 0] + 1j * pts[:, 1],
        y=pts[:, 2] + 1j * pts[:, 3],
        symbol_rate=symbol_rate,
    )


def _rrc_response(f: np.ndarray, symbol_rate: float, rolloff: float) -> np.ndarray:
    """Root-raised-cosine amplitude response, unit passband."""
    t = 1.0 / symbol_rate
    af = np.abs(f)
    f1 = (1.0 - rolloff) / (2.0 * t)
    f2 = (1.0 + rolloff) / (2.0 * t)
    h = np.zeros_like(af)
    h[af <= f1] = 1.0
    if rolloff > 0:
        mid = (af > f1) & (af < f2)
        h[mid] = np.sqrt(
            0.5 * (1.0 + np.cos(np.pi * t / rolloff * (af[mid] - f1)))
        )
    return h


def pulse_shape(sym: SymbolStream, cfg: TxConfig) -> DualPolWaveform:
    """Expand symbols to a sampled waveform, preserving average power.

    NRZ is sample-and-hold. RRC zero-stuffs and applies the root-raised
    cosine response on the block spectrum (circular), normalized so the
    waveform keeps the stream's average power.
    """
    sps = cfg.samples_per_symbol
    if cfg.pulse == "nrz":
        x = np.repeat(sym.x, sps)
        y = np.repeat(sym.y, sps)
    else:
        n = len(sym) * sps
        f = np.fft.fftfreq(n, d=1.0 / (cfg.symbol_rate * sps))
        h = _rrc_response(f, cfg.symbol_rate, cfg.rrc_rolloff)
        # Power through zero-stuff + filter: 1/sps * mean|h|^2; rescale to 1.
        h = h * np.sqrt(sps / np.mean(h**2))
        x = np.zeros(n, dtype=np.complex128)
        y = np.zeros(n, dtype=np.complex128)
        x[::sps] = sym.x
        y[::sps] = sym.y
        x = scipy.fft.ifft(scipy.fft.fft(x) * h)
        y = scipy.fft.ifft(scipy.fft.fft(y) * h)
    return DualPolWaveform(
        x=x,
        y=y,
        sample_rate=cfg.symbol_rate * sps,
        center_wavelength=cfg.center_wavelength,
    )


def dac_response(f: np.ndarray, bandwidth: float) -> np.ndarray:
    """5th-order Bessel low-pass response with |H| = -3 dB at bandwidth."""
    b, a = scipy.signal.bessel(5, 2.0 * np.pi * bandwidth, analog=True, norm="mag")
    _, h = scipy.signal.freqs(b, a, worN=2.0 * np.pi * f)
    return h


def dac_model(wf: DualPolWaveform, cfg: TxConfig) -> DualPolWaveform:
    """Apply the DAC front-end filter (and optional pre-compensation).

    The Bessel response has real coefficients, so filtering the complex
    envelope equals filtering the I and Q electrical tributaries separately.
    Pre-compensation boosts by the inverse magnitude, capped at
    precomp_max_db, before the filter; the cap keeps out-of-band noise
    amplification and DAC clipping in check.
    """
    if cfg.dac_bandwidth is None:
        return wf.copy()
    f = wf.freq_axis()
    h = dac_response(f, cfg.dac_bandwidth)
    if cfg.dac_precomp:
        cap = 10.0 ** (cfg.precomp_max_db / 20.0)
        boost = np.minimum(1.0 / np.maximum(np.abs(h), 1e-12), cap)
        h = h * boost
    x = scipy.fft.ifft(scipy.fft.fft(wf.x) * h)
    y = scipy.fft.ifft(scipy.fft.fft(wf.y) * h)
    return wf.with_fields(x, y)


def laser_phase(
    n: int, sample_rate: float, linewidth: float, rng: np.random.Generator
) -> np.ndarray:
    """Wiener phase walk with increment variance 2 pi linewidth T."""
    if linewidth == 0.0:
        return np.zeros(n)
    sigma = np.sqrt(2.0 * np.pi * linewidth / sample_rate)
    steps = rng.normal(0.0, sigma, size=n)
    steps[0] = 0.0
    return np.cumsum(steps)


def apply_laser(
    wf: DualPolWaveform,
    linewidth: float,
    freq_offset: float,
    rng: np.random.Generator,
) -> DualPolWaveform:
    """Multiply both polarizations by the common laser phase process."""
    if linewidth == 0.0 and freq_offset == 0.0:
        return wf.copy()
    n = len(wf)
    t = np.arange(n) / wf.sample_rate
    phi = laser_phase(n, wf.sample_rate, linewidth, rng) + 2.0 * np.pi * freq_offset * t
    rot = np.exp(1j * phi)
    return wf.with_fields(wf.x * rot, wf.y * rot)


def set_power(wf: DualPolWaveform, power_dbm: float) -> DualPolWaveform:
    """Scale the field to the given total average power."""
    target_w = 1e-3 * 10.0 ** (power_dbm / 10.0)
    now = wf.power()
    if now == 0.0:
        raise ValueError("cannot set power of an all-zero waveform")
    g = np.sqrt(target_w / now)
    return wf.with_fields(wf.x * g, wf.y * g)


def transmit(
    bits: BitStream | np.ndarray,
    fd: FormatDescriptor,
    cfg: TxConfig,
    rng: np.random.Generator | None = None,
) -> DualPolWaveform:
    """Full transmitter: map, shape, DAC, laser, launch power."""
    sym = map_bits(bits, fd, cfg.symbol_rate)
    wf = pulse_shape(sym, cfg)
    wf = dac_model(wf, cfg)
    if cfg.laser_linewidth != 0.0 or cfg.freq_offset != 0.0:
        if rng is None:
            raise ValueError("laser impairments need an rng")
        wf = apply_laser(wf, cfg.laser_linewidth, cfg.freq_offset, rng)
    return set_power(wf, cfg.launch_power_dbm)
