"""Symbol decisions and bit demapping.

Non-differential formats use a minimum-distance search over the full 4D
constellation, so correlated tributaries (the XOR structure of 3D-Simplex)
are decided jointly rather than per quadrature.

Differential formats decide each symbol coherently against the tributary
constellation first and XOR consecutive decisions, which costs 2p(1-p)
instead of the larger differentially-coherent product-detector penalty,
and stays invariant to a static pi rotation. Pairing is cyclic (the first
symbol pairs with the last), which is exact whenever the transmitted block
is one period of an even-weight sequence and keeps the output the same
length as the transmitted bit stream.
"""

from __future__ import annotations

import numpy as np

from ..formats import FormatDescriptor


def decide_indices(x: np.ndarray, y: np.ndarray, fd: FormatDescriptor) -> np.ndarray:
    """Index of the nearest 4D constellation point for each symbol."""
    pts = fd.points * fd.scale
    d2 = np.empty((len(x), pts.shape[0]))
    for m in range(pts.shape[0]):
        d2[:, m] = (
            (x.real - pts[m, 0]) ** 2
            + (x.imag - pts[m, 1]) ** 2
            + (y.real - pts[m, 2]) ** 2
            + (y.imag - pts[m, 3]) ** 2
        )
    return np.argmin(d2, axis=1)


def decide_demap(x: np.ndarray, y: np.ndarray, fd: FormatDescriptor) -> np.ndarray:
    """Demap recovered symbols to bits (uint8, bits-per-symbol per row)."""
    x = np.asarray(x, dtype=np.complex128)
    y = np.asarray(y, dtype=np.complex128)
    if fd.differential:
        px = fd.tributary_points("x") * fd.scale
        py = fd.tributary_points("y") * fd.scale
        dx = np.argmin(np.abs(x[:, None] - px[None, :]), axis=1)
        dy = np.argmin(np.abs(y[:, None] - py[None, :]), axis=1)
        bx = (dx != np.roll(dx, 1)).astype(np.uint8)
        by = (dy != np.roll(dy, 1)).astype(np.uint8)
        return np.stack([bx, by], axis=1).ravel()
    idx = decide_indices(x, y, fd)
    return fd.labels[idx].ravel()
