"""Waveform and symbol-stream containers.

A block of samples is always treated as one period of a cyclic signal (the
payload is a repeated de Bruijn cycle), so spectral operations act on the
block FFT and resampling is exact Fourier series truncation or extension.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace

import numpy as np
import scipy.signal

_MAGIC = b"DPW1"


@dataclass
class DualPolWaveform:
    """Sampled dual-polarization optical field envelope.

    ``x`` and ``y`` are complex field envelopes in sqrt(W), equal length.
    """

    x: np.ndarray
    y: np.ndarray
    sample_rate: float
    center_wavelength: float = 1550e-9

    def __post_init__(self) -> None:
        self.x = np.asarray(self.x, dtype=np.complex128)
        self.y = np.asarray(self.y, dtype=np.complex128)
        if self.x.shape != self.y.shape or self.x.ndim != 1:
            raise ValueError("x and y must be 1-d arrays of equal length")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")

    def __len__(self) -> int:
        return int(self.x.shape[0])

    def power(self) -> float:
        """Mean total power in W: E[|x|^2 + |y|^2]."""
        return float(np.mean(np.abs(self.x) ** 2 + np.abs(self.y) ** 2))

    def freq_axis(self) -> np.ndarray:
        """Signed FFT bin frequencies in Hz."""
        return np.fft.fftfreq(len(self), d=1.0 / self.sample_rate)

    def with_fields(self, x: np.ndarray, y: np.ndarray) -> "DualPolWaveform":
        return replace(self, x=x, y=y)

    def copy(self) -> "DualPolWaveform":
        return replace(self, x=self.x.copy(), y=self.y.copy())

    def dump(self, path: str) -> None:
        """Write a little-endian debug dump.

        Layout: magic "DPW1", u32 version, u64 sample count, f64 sample rate,
        f64 center wavelength, then x and y as interleaved complex64
        (re, im), little-endian throughout.
        """
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(struct.pack("<IQdd", 1, len(self), self.sample_rate, self.center_wavelength))
            fh.write(self.x.astype("<c8").tobytes())
            fh.write(self.y.astype("<c8").tobytes())

    @classmethod
    def load(cls, path: str) -> "DualPolWaveform":
        with open(path, "rb") as fh:
            magic = fh.read(4)
            if magic != _MAGIC:
                raise ValueError("not a waveform dump")
            version, n, fs, wl = struct.unpack("<IQdd", fh.read(4 + 8 + 8 + 8))
            if version != 1:
                raise ValueError(f"unsupported dump version {version}")
            x = np.frombuffer(fh.read(8 * n), dtype="<c8").astype(np.complex128)
            y = np.frombuffer(fh.read(8 * n), dtype="<c8").astype(np.complex128)
        return cls(x=x, y=y, sample_rate=fs, center_wavelength=wl)


@dataclass
class SymbolStream:
    """Dual-polarization symbols at one sample per symbol."""

    x: np.ndarray
    y: np.ndarray
    symbol_rate: float

    def __post_init__(self) -> None:
        self.x = np.asarray(self.x, dtype=np.complex128)
        self.y = np.asarray(self.y, dtype=np.complex128)
        if self.x.shape != self.y.shape or self.x.ndim != 1:
            raise ValueError("x and y must be 1-d arrays of equal length")

    def __len__(self) -> int:
        return int(self.x.shape[0])

    def power(self) -> float:
        return float(np.mean(np.abs(self.x) ** 2 + np.abs(self.y) ** 2))


def resample_waveform(wf: DualPolWaveform, new_rate: float) -> DualPolWaveform:
    """Exact band-limited resampling of the cyclic block.

    The new sample count new_rate/sample_rate * len must be an integer;
    resampling is then Fourier series truncation (ideal brick wall) or
    zero-padding, with no boundary artifacts on periodic blocks.
    """
    n = len(wf)
    n_new_f = n * new_rate / wf.sample_rate
    n_new = int(round(n_new_f))
    if abs(n_new_f - n_new) > 1e-6:
        raise ValueError(
            f"resampling {wf.sample_rate} -> {new_rate} Hz needs integer sample count, got {n_new_f}"
        )
    if n_new == n:
        return wf.copy()
    x = scipy.signal.resample(wf.x, n_new)
    y = scipy.signal.resample(wf.y, n_new)
    return DualPolWaveform(
        x=x, y=y, sample_rate=new_rate, center_wavelength=wf.center_wavelength
    )
