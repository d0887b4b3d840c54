"""Theory curves, error counting and Monte-Carlo BER estimation.

Counting against a blind receiver has two ambiguities that are not errors:
the output can be any constellation symmetry of the transmitted stream, and
it can be cyclically shifted by a whole number of symbols (timing places
the strobe grid on an arbitrary symbol of the periodic block). ``count_ber``
searches candidate symmetry transforms and all cyclic shifts via FFT
correlation, then recounts exactly at the best alignment. A peak
correlation far below the value implied by any plausible error rate means
the streams simply do not match (wrong data, wrong format) and is flagged
instead of being reported as BER 0.5.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.special import erfc, erfcinv

from .errors import DspDiagnosticError
from .formats import FormatDescriptor, build_format, constellation_symmetries

ALIGN_CORR_MIN = 0.2


def qfunc(x: np.ndarray | float) -> np.ndarray | float:
    """Gaussian tail probability Q(x)."""
    return 0.5 * erfc(np.asarray(x, dtype=np.float64) / np.sqrt(2.0))


def qfunc_inv(p: np.ndarray | float) -> np.ndarray | float:
    return np.sqrt(2.0) * erfcinv(2.0 * np.asarray(p, dtype=np.float64))


def union_bound_ber(fd: FormatDescriptor, ebn0_db: np.ndarray | float) -> np.ndarray | float:
    """Pairwise union bound on bit error rate over the 4D constellation.

    Each ordered point pair contributes its Hamming distance weighted by
    the pairwise error probability at the pair's Euclidean distance. Exact
    for one dominant neighbor, an upper bound otherwise.
    """
    gamma = 10.0 ** (np.asarray(ebn0_db, dtype=np.float64) / 10.0)
    pts = fd.points
    labels = fd.labels.astype(np.int64)
    m, b = labels.shape
    p_avg = float(np.mean(np.sum(pts**2, axis=1)))
    total = np.zeros_like(gamma)
    for i in range(m):
        for j in range(m):
            if i == j:
                continue
            d2 = float(np.sum((pts[i] - pts[j]) ** 2))
            dh = int(np.sum(labels[i] != labels[j]))
            total = total + dh * qfunc(np.sqrt(d2 * b * gamma / (2.0 * p_avg)))
    return total / (m * b)


def theory_ber(name: str, ebn0_db: np.ndarray | float) -> np.ndarray | float:
    """Bit error rate versus Eb/N0 for the supported formats.

    DP-BPSK and DP-QPSK have the exact closed form Q(sqrt(2 Eb/N0));
    DP-DPSK pays the differential-decoding penalty 2p(1-p); 3D-Simplex
    uses the union bound, which its single-dominant-neighbor geometry makes
    tight below about 1e-2.
    """
    gamma = 10.0 ** (np.asarray(ebn0_db, dtype=np.float64) / 10.0)
    fd = build_format(name)
    if fd.name in ("DP-BPSK", "DP-QPSK"):
        return qfunc(np.sqrt(2.0 * gamma))
    if fd.name == "DP-DPSK":
        p = qfunc(np.sqrt(2.0 * gamma))
        return 2.0 * p * (1.0 - p)
    return union_bound_ber(fd, ebn0_db)


def required_ebn0(ebn0_db: np.ndarray, ber: np.ndarray, target: float) -> float:
    """Eb/N0 where a monotone BER curve crosses ``target``.

    Interpolates log10(BER) linearly in dB and refuses to extrapolate.
    """
    x = np.asarray(ebn0_db, dtype=np.float64)
    y = np.asarray(ber, dtype=np.float64)
    if np.any(y <= 0.0):
        keep = y > 0.0
        x, y = x[keep], y[keep]
    order = np.argsort(x)
    x, y = x[order], np.log10(y[order])
    t = math.log10(target)
    if not (y.min() <= t <= y.max()):
        raise ValueError(
            f"target BER {target:g} outside simulated range "
            f"[{10.0**y.min():.3g}, {10.0**y.max():.3g}]"
        )
    # y decreases with x; walk segments to find the crossing
    for k in range(len(x) - 1):
        y0, y1 = y[k], y[k + 1]
        if (y0 - t) * (y1 - t) <= 0.0:
            if y0 == y1:
                return float(x[k])
            return float(x[k] + (t - y0) * (x[k + 1] - x[k]) / (y1 - y0))
    raise ValueError("no crossing found despite target inside range")


def required_osnr(osnr_db: np.ndarray, ber: np.ndarray, target: float) -> float:
    """OSNR where a monotone BER curve crosses ``target``.

    Same log-linear interpolation as :func:`required_ebn0`; the dB axis is
    just labeled differently.
    """
    return required_ebn0(osnr_db, ber, target)


def wilson_interval(errors: int, trials: int, z: float = 1.96) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    p = errors / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    center = (p + z2 / (2.0 * trials)) / denom
    half = z * math.sqrt(p * (1.0 - p) / trials + z2 / (4.0 * trials * trials)) / denom
    return max(0.0, center - half), min(1.0, center + half)


@dataclass
class BerCount:
    errors: int
    bits: int
    ber: float
    shift: int
    transform: str
    peak_corr: float
    aligned: bool
    ci_low: float
    ci_high: float


def _label_indices(mat: np.ndarray) -> np.ndarray:
    bps = mat.shape[1]
    weights = (1 << np.arange(bps - 1, -1, -1)).astype(np.int64)
    return mat.astype(np.int64) @ weights


def count_ber(
    tx_bits: np.ndarray,
    rx_bits: np.ndarray,
    fd: FormatDescriptor,
    strict: bool = True,
) -> BerCount:
    """Count bit errors up to constellation symmetry and cyclic symbol shift.

    With ``strict`` (the default) an alignment whose correlation peak is
    below ``ALIGN_CORR_MIN`` raises DspDiagnosticError: the streams do not
    plausibly carry the same data and any count would be meaningless.
    """
    bps = fd.bits_per_symbol
    rx = np.asarray(rx_bits, dtype=np.uint8).reshape(-1, bps)
    ref = np.asarray(tx_bits, dtype=np.uint8).reshape(-1, bps)
    if rx.shape != ref.shape:
        raise ValueError(f"bit stream shapes differ: {ref.shape} vs {rx.shape}")
    n = rx.shape[0]

    candidates: list[tuple[str, np.ndarray]] = []
    if fd.differential:
        # differential decoding already absorbs per-pol sign flips
        candidates.append(("identity", ref))
        candidates.append(("pol-swap", ref[:, ::-1]))
    else:
        idx = _label_indices(ref)
        seen = set()
        for sym in constellation_symmetries(fd):
            mapped = fd.labels[sym.label_perm[idx]]
            key = mapped[: min(64, n)].tobytes()
            if key in seen:
                continue
            seen.add(key)
            name = f"rot({sym.theta_x:.2f},{sym.theta_y:.2f})" + (
                "+swap" if sym.swap else ""
            )
            candidates.append((name, mapped))

    rx_pm = rx.astype(np.float64) * 2.0 - 1.0
    rx_fft = np.fft.rfft(rx_pm, axis=0)
    best = (-np.inf, 0, "", None)
    for name, cand in candidates:
        c_pm = cand.astype(np.float64) * 2.0 - 1.0
        prof = np.fft.irfft(rx_fft * np.conj(np.fft.rfft(c_pm, axis=0)), n=n, axis=0)
        prof = prof.sum(axis=1) / (n * bps)
        s = int(np.argmax(prof))
        if prof[s] > best[0]:
            best = (float(prof[s]), s, name, cand)
    peak, shift, tname, cand = best
    if strict and peak < ALIGN_CORR_MIN:
        raise DspDiagnosticError(
            f"bit alignment failed: peak correlation {peak:.3f} below {ALIGN_CORR_MIN}"
        )
    errors = int(np.count_nonzero(rx != np.roll(cand, shift, axis=0)))
    bits = n * bps
    lo, hi = wilson_interval(errors, bits)
    return BerCount(
        errors=errors,
        bits=bits,
        ber=errors / bits,
        shift=shift,
        transform=tname,
        peak_corr=peak,
        aligned=peak >= ALIGN_CORR_MIN,
        ci_low=lo,
        ci_high=hi,
    )


@dataclass
class BerEstimate:
    ber: float
    errors: int
    bits: int
    ci_low: float
    ci_high: float


@dataclass
class MonteCarloResult:
    ber: float
    errors: int
    bits: int
    ci_low: float
    ci_high: float
    trials: int
    zero_errors: bool


def monte_carlo(
    trial,
    *,
    master_seed: int,
    min_errors: int = 100,
    max_bits: int = 100_000_000,
) -> MonteCarloResult:
    """Accumulate independent trials until enough errors or bits are seen.

    ``trial`` is called with a per-trial ``numpy.random.SeedSequence``
    (spawned deterministically from the master seed) and must return
    ``(errors, bits)`` for one block. A run that ends with zero errors is
    flagged; its Wilson interval still gives a usable upper bound.
    """
    ss = np.random.SeedSequence(master_seed)
    errors = 0
    bits = 0
    trials = 0
    while errors < min_errors and bits < max_bits:
        child = ss.spawn(1)[0]
        e, n = trial(child)
        if n <= 0:
            raise ValueError("trial returned a non-positive bit count")
        errors += int(e)
        bits += int(n)
        trials += 1
    lo, hi = wilson_interval(errors, bits)
    return MonteCarloResult(
        ber=errors / bits,
        errors=errors,
        bits=bits,
        ci_low=lo,
        ci_high=hi,
        trials=trials,
        zero_errors=errors == 0,
    )


@njit(cache=True)
def _awgn_block(pts, labels, sigma, n_sym, seed):
    m, b = labels.shape
    np.random.seed(seed)
    errors = 0
    for _ in range(n_sym):
        tx = np.random.randint(0, m)
        v0 = pts[tx, 0] + sigma * np.random.randn()
        v1 = pts[tx, 1] + sigma * np.random.randn()
        v2 = pts[tx, 2] + sigma * np.random.randn()
        v3 = pts[tx, 3] + sigma * np.random.randn()
        bestd = 1e300
        rx = 0
        for j in range(m):
            d = (
                (v0 - pts[j, 0]) ** 2
                + (v1 - pts[j, 1]) ** 2
                + (v2 - pts[j, 2]) ** 2
                + (v3 - pts[j, 3]) ** 2
            )
            if d < bestd:
                bestd = d
                rx = j
        if rx != tx:
            for k in range(b):
                if labels[tx, k] != labels[rx, k]:
                    errors += 1
    return errors


@njit(cache=True)
def _awgn_block_diff(amp, sigma, n_sym, seed):
    """Two differentially encoded binary tributaries, decided coherently
    symbol by symbol and XOR-decoded (quadrature noise never enters)."""
    np.random.seed(seed)
    errors = 0
    dx = 0
    dy = 0
    hx = (amp * (2.0 * dx - 1.0) + sigma * np.random.randn()) > 0.0
    hy = (amp * (2.0 * dy - 1.0) + sigma * np.random.randn()) > 0.0
    for _ in range(n_sym):
        bx = np.random.randint(0, 2)
        by = np.random.randint(0, 2)
        dx ^= bx
        dy ^= by
        gx = (amp * (2.0 * dx - 1.0) + sigma * np.random.randn()) > 0.0
        gy = (amp * (2.0 * dy - 1.0) + sigma * np.random.randn()) > 0.0
        if (gx != hx) != (bx == 1):
            errors += 1
        if (gy != hy) != (by == 1):
            errors += 1
        hx, hy = gx, gy
    return errors


def awgn_ber(
    name: str,
    ebn0_db: float,
    *,
    seed: int = 0,
    min_errors: int = 100,
    max_bits: int = 2_000_000_000,
    block_symbols: int = 1 << 20,
) -> BerEstimate:
    """Monte-Carlo BER of maximum-likelihood detection on the AWGN channel.

    Runs fixed-size blocks until ``min_errors`` are seen or ``max_bits``
    counted. Per-dimension noise sigma follows from Eb/N0 with the
    constellation normalized to unit average symbol energy.
    """
    fd = build_format(name)
    b = fd.bits_per_symbol
    gamma = 10.0 ** (ebn0_db / 10.0)
    sigma = 1.0 / math.sqrt(2.0 * b * gamma)
    pts = np.ascontiguousarray(fd.points * fd.scale)
    labels = np.ascontiguousarray(fd.labels)
    ss = np.random.SeedSequence(seed)
    errors = 0
    bits = 0
    while errors < min_errors and bits < max_bits:
        child = int(ss.spawn(1)[0].generate_state(1)[0] & 0x7FFFFFFF)
        if fd.differential:
            errors += int(_awgn_block_diff(float(fd.scale), sigma, block_symbols, child))
        else:
            errors += int(_awgn_block(pts, labels, sigma, block_symbols, child))
        bits += block_symbols * b
    lo, hi = wilson_interval(errors, bits)
    return BerEstimate(ber=errors / bits, errors=errors, bits=bits, ci_low=lo, ci_high=hi)
