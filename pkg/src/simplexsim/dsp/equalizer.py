"""Fractionally spaced 2x2 butterfly equalizer with blind adaptation.

Two modes share the same butterfly and update rule plumbing:

* "ideal-cma": constant-modulus criterion on both outputs, each with its
  own tributary radius. With 3D-Simplex the radii differ by 2 (QPSK carries
  twice the power of the BPSK tributary), which pins each output to its
  polarization; for the DPSK formats the radii coincide and a residual
  polarization swap is left to the counter's ambiguity resolution.
* "hybrid-blind": constant-modulus on the x output, a two-symbol
  differential criterion on the y output (the product of consecutive
  outputs must land on a differential constellation point). Both error
  signals update the shared butterfly every symbol, which keeps the y
  tributary locked even though its modulus alone cannot separate it from
  crosstalk.

Updates are stochastic-gradient with step ``mu``; taps start from a center
spike. The first ``train`` symbols are processed twice: one throwaway
adaptation pass, then the counted pass over the whole block continues from
the warmed taps.

Near 45 degree mixing the spike init can drive both outputs onto the same
tributary (the usual butterfly singularity). When the adapted outputs stay
nearly collinear the y row is reseeded as the unitary complement of the
converged x row and the whole schedule runs once more; a genuinely rank-1
input stays collinear through the retry and is left for the caller to
flag.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from ..formats import FormatDescriptor, _rotation_order


@dataclass
class EqualizerResult:
    x: np.ndarray
    y: np.ndarray
    weights: np.ndarray  # (2, 2, taps): [out, in, tap]
    cross_corr: float
    err_x: np.ndarray
    err_y: np.ndarray
    converged: bool = True


# clean separations keep the lag-0 output correlation below ~0.3; a
# collapsing butterfly crosses 0.5 long before it finishes, so 0.5 triggers
# the reseed even when a short block ends mid-collapse
SINGULAR_CROSS = 0.5


def cma_radius(points: np.ndarray) -> float:
    """Godard radius E|a|^4 / E|a|^2 of a sub-constellation."""
    p2 = np.abs(points) ** 2
    return float(np.mean(p2**2) / np.mean(p2))


def _cross_corr(out_x: np.ndarray, out_y: np.ndarray) -> float:
    """Normalized |cross-correlation| of the outputs at lag 0.

    Lag 0 only: a collapsed butterfly duplicates one tributary at the same
    group delay (both rows adapt from center spikes), while blind payloads
    cut from one sequence wheel are legitimately correlated at nonzero
    lags. A duplicate hiding at an off-center delay would surface in the
    decision probe instead.
    """
    px = float(np.mean(np.abs(out_x) ** 2))
    py = float(np.mean(np.abs(out_y) ** 2))
    if px <= 0.0 or py <= 0.0:
        return 1.0
    v = float(np.abs(np.mean(out_x * np.conj(out_y))))
    return v / math.sqrt(px * py)


@njit(cache=True, fastmath=True)
def _butterfly_kernel(
    ux, uy, wxx, wxy, wyx, wyy, mu, r2x, r2y, y_diff, diff_step,
    n_sym, adapt, out_x, out_y, err_x, err_y,
):
    n = ux.shape[0]
    taps = wxx.shape[0]
    c = (taps - 1) // 2
    prev_zy = 0.0 + 0.0j
    for k in range(n_sym):
        base = 2 * k + c
        zx = 0.0 + 0.0j
        zy = 0.0 + 0.0j
        for t in range(taps):
            j = (base - t) % n
            a = ux[j]
            b = uy[j]
            zx += wxx[t] * a + wxy[t] * b
            zy += wyx[t] * a + wyy[t] * b
        out_x[k] = zx
        out_y[k] = zy

        if adapt:
            ex = r2x - (zx.real * zx.real + zx.imag * zx.imag)
            gx = mu * ex * zx
            err_x[k] = ex
            if y_diff and k > 0:
                # snap the two-symbol product onto the differential grid;
                # blind to any static phase the butterfly puts on y
                prod = zy * np.conj(prev_zy)
                ang = math.atan2(prod.imag, prod.real)
                da = diff_step * math.floor(ang / diff_step + 0.5)
                d = r2y * complex(math.cos(da), math.sin(da))
                ey = d - prod
                gy = mu * ey * prev_zy
                err_y[k] = abs(ey)
            else:
                ey_r = r2y - (zy.real * zy.real + zy.imag * zy.imag)
                gy = mu * ey_r * zy
                err_y[k] = ey_r
            for t in range(taps):
                j = (base - t) % n
                ca = np.conj(ux[j])
                cb = np.conj(uy[j])
                wxx[t] += gx * ca
                wxy[t] += gx * cb
                wyx[t] += gy * ca
                wyy[t] += gy * cb
        prev_zy = zy
    return prev_zy


def equalize(
    x2: np.ndarray,
    y2: np.ndarray,
    fd: FormatDescriptor,
    taps: int = 13,
    mode: str = "ideal-cma",
    mu: float = 1e-3,
    train: int = 2**14,
    passes: int = 2,
) -> EqualizerResult:
    """Equalize a 2 sps block down to symbols.

    The input is indexed circularly (the block is one period), so the
    output symbol count is exactly half the input sample count.
    """
    if mode not in ("ideal-cma", "hybrid-blind"):
        raise ValueError(f"unknown equalizer mode {mode!r}")
    if taps % 2 == 0:
        raise ValueError("tap count must be odd (center spike)")
    x2 = np.ascontiguousarray(x2, dtype=np.complex128)
    y2 = np.ascontiguousarray(y2, dtype=np.complex128)
    n_sym = len(x2) // 2
    pts_y = fd.tributary_points("y") * fd.scale
    r2x = cma_radius(fd.tributary_points("x") * fd.scale)
    r2y = cma_radius(pts_y)
    y_diff = mode == "hybrid-blind"
    diff_step = 2.0 * np.pi / _rotation_order(pts_y)

    w = np.zeros((2, 2, taps), dtype=np.complex128)
    c = (taps - 1) // 2
    w[0, 0, c] = 1.0
    w[1, 1, c] = 1.0
    wxx, wxy, wyx, wyy = w[0, 0], w[0, 1], w[1, 0], w[1, 1]

    out_x = np.empty(n_sym, np.complex128)
    out_y = np.empty(n_sym, np.complex128)
    err_x = np.zeros(n_sym, np.float64)
    err_y = np.zeros(n_sym, np.float64)

    n_train = min(train, n_sym)

    def run_schedule() -> None:
        for _ in range(max(0, passes - 1)):
            _butterfly_kernel(
                x2, y2, wxx, wxy, wyx, wyy, mu, r2x, r2y, y_diff, diff_step,
                n_train, True, out_x, out_y, err_x, err_y,
            )
        _butterfly_kernel(
            x2, y2, wxx, wxy, wyx, wyy, mu, r2x, r2y, y_diff, diff_step,
            n_sym, True, out_x, out_y, err_x, err_y,
        )

    run_schedule()
    cross = _cross_corr(out_x, out_y)
    if cross > SINGULAR_CROSS:
        # both outputs picked up the same tributary; reseed y orthogonal
        # to the converged x row and adapt again from there
        wyx[:] = -np.conj(wxy[::-1])
        wyy[:] = np.conj(wxx[::-1])
        run_schedule()
        cross = _cross_corr(out_x, out_y)

    # converged = the error is not growing: the last quarter of the counted
    # pass is no worse than the best quarter (stationary or still-falling
    # traces pass, a blow-up fails); quarters average out the data-pattern
    # fluctuation of the stochastic error
    mag = np.abs(err_x) + np.abs(err_y)
    n_q = n_sym // 4
    if n_q >= 16:
        quarters = mag[: 4 * n_q].reshape(4, n_q).mean(axis=1)
        converged = bool(quarters[-1] <= 1.5 * float(np.min(quarters)) + 1e-12)
    else:
        converged = True
    return EqualizerResult(
        x=out_x, y=out_y, weights=w, cross_corr=cross, err_x=err_x, err_y=err_y,
        converged=converged,
    )
