"""Blind carrier recovery at one sample per symbol.

Frequency offset is estimated from the y tributary raised to its
rotational order m (power-of-m strip), using the Mengali-Morelli weighted
autocorrelation estimator; capture range is +/- Rs / (2 m).

Phase recovery runs in stages:

1. sliding-window power-of-m phase estimate on y, unwrapped and applied to
   both polarizations (the laser and LO are common to both);
2. a static power-of-m estimate plus a slow decision-directed rotor on x,
   applied to x only (blind adaptation leaves each output with its own
   static phase, so x must be pinned to its own sub-constellation);
3. joint branch selection: the per-polarization estimators are ambiguous
   modulo 2*pi/m, and not every combination of per-pol rotations maps the
   joint constellation to itself. A probe window is scored against the
   4D constellation under every candidate branch and the best one is
   applied, preferring identity on ties. Whatever ambiguity survives is an
   exact constellation symmetry and is absorbed by error counting.

The stage-1 trace doubles as a cycle-slip counter: sampled once per window,
a block-to-block estimate jump above pi/2 is flagged as a slip.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import uniform_filter1d

from ..errors import DspDiagnosticError
from ..formats import FormatDescriptor, _rotation_order


def _strip_offset(points: np.ndarray, m: int) -> float:
    """Angle of the constellation after the power-of-m strip."""
    return float(np.angle(np.mean(points**m)))


def mm_frequency_estimate(
    sym: np.ndarray, symbol_rate: float, m: int, lags: int = 2048
) -> float:
    """Mengali-Morelli frequency estimate from modulation-stripped symbols.

    lags is the autocorrelation lag count L; the estimator consumes the
    first 2 L symbols (or everything, if the block is shorter).
    """
    z = np.asarray(sym[: min(2 * lags, len(sym))], dtype=np.complex128) ** m
    n = len(z)
    big_l = n // 2
    if big_l < 2:
        return 0.0
    r = np.empty(big_l + 1, dtype=np.complex128)
    for lag in range(big_l + 1):
        r[lag] = np.mean(z[lag:] * np.conj(z[: n - lag]))
    lags = np.arange(1, big_l + 1, dtype=np.float64)
    num = 3.0 * ((n - lags) * (n - lags + 1) - big_l * (n - big_l))
    den = big_l * (4.0 * big_l**2 - 6.0 * big_l * n + 3.0 * n**2 - 1.0)
    w = num / den
    incr = np.angle(r[1:] * np.conj(r[:-1]))
    return float(np.sum(w * incr) * symbol_rate / (2.0 * np.pi * m))


def _vv_trace(sym: np.ndarray, m: int, offset: float, window: int) -> np.ndarray:
    """Unwrapped sliding-window power-of-m phase estimate."""
    z = sym**m * np.exp(-1j * offset)
    if window > 1:
        sm = uniform_filter1d(z.real, window, mode="wrap") + 1j * uniform_filter1d(
            z.imag, window, mode="wrap"
        )
    else:
        sm = z
    return np.unwrap(np.angle(sm)) / m


@dataclass
class CarrierResult:
    x: np.ndarray
    y: np.ndarray
    freq_offset: float
    phase_trace: np.ndarray
    cycle_slips: int
    branch: tuple[float, float]
    probe_distance: float


def carrier_recover(
    x: np.ndarray,
    y: np.ndarray,
    fd: FormatDescriptor,
    symbol_rate: float,
    vv_window: int = 64,
    foe_lags: int = 2048,
    dd_window: int = 1024,
    probe: int = 512,
) -> CarrierResult:
    if vv_window < 4:
        raise ValueError("vv_window must be at least 4")
    x = np.asarray(x, dtype=np.complex128)
    y = np.asarray(y, dtype=np.complex128)
    n = len(x)
    pts_x = fd.tributary_points("x") * fd.scale
    pts_y = fd.tributary_points("y") * fd.scale
    m_x = _rotation_order(pts_x)
    m_y = _rotation_order(pts_y)
    off_x = _strip_offset(pts_x, m_x)
    off_y = _strip_offset(pts_y, m_y)

    f_hat = mm_frequency_estimate(y, symbol_rate, m_y, lags=foe_lags)
    # the power-of-m strip leaves the offset unambiguous only within
    # +/- Rs/(2 m); an estimate near the edge has almost surely aliased
    f_limit = symbol_rate / (2.0 * m_y)
    if abs(f_hat) > 0.9 * f_limit:
        raise DspDiagnosticError(
            f"frequency offset estimate {f_hat:.3e} Hz at the +/-{f_limit:.3e} Hz "
            "ambiguity edge"
        )
    if f_hat != 0.0:
        derot = np.exp(-2j * np.pi * f_hat * np.arange(n) / symbol_rate)
        x = x * derot
        y = y * derot

    phase = _vv_trace(y, m_y, off_y, vv_window)
    rot = np.exp(-1j * phase)
    x = x * rot
    y = y * rot
    # block-to-block slip check: sample the sliding estimate once per window;
    # a jump above half the ambiguity step (pi/2 for a BPSK tributary) means
    # the estimator changed branch
    blocks = phase[::vv_window]
    slips = int(np.sum(np.abs(np.diff(blocks)) > np.pi / m_y))

    # pin x to its own sub-constellation: static strip estimate, then a
    # slow decision-directed rotor for any residual differential drift
    delta = float(np.angle(np.mean(x**m_x * np.exp(-1j * off_x)))) / m_x
    x = x * np.exp(-1j * delta)
    dist = np.abs(x[:, None] - pts_x[None, :])
    rotor = x * np.conj(pts_x[np.argmin(dist, axis=1)])
    if dd_window > 1:
        rotor = uniform_filter1d(rotor.real, dd_window, mode="wrap") + 1j * uniform_filter1d(
            rotor.imag, dd_window, mode="wrap"
        )
    x = x * np.exp(-1j * np.angle(rotor))

    pts4 = fd.points * fd.scale
    n_probe = min(probe, n)
    px = x[:n_probe]
    py = y[:n_probe]
    best = None
    best_branch = (0.0, 0.0)
    for kx in range(m_x):
        for ky in range(m_y):
            tx = 2.0 * np.pi * kx / m_x
            ty = 2.0 * np.pi * ky / m_y
            cx = px * np.exp(-1j * tx)
            cy = py * np.exp(-1j * ty)
            v = np.stack([cx.real, cx.imag, cy.real, cy.imag], axis=1)
            d2 = np.sum((v[:, None, :] - pts4[None, :, :]) ** 2, axis=2)
            score = float(np.mean(np.min(d2, axis=1)))
            if best is None or score < best - 1e-12:
                best = score
                best_branch = (tx, ty)
    if best_branch != (0.0, 0.0):
        x = x * np.exp(-1j * best_branch[0])
        y = y * np.exp(-1j * best_branch[1])

    return CarrierResult(
        x=x,
        y=y,
        freq_offset=f_hat,
        phase_trace=phase,
        cycle_slips=slips,
        branch=best_branch,
        probe_distance=float(best),
    )
