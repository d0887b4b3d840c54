"""Modulation format descriptors and geometric figures of merit.

Every format is described by its dual-polarization constellation in the four
real dimensions (Ix, Qx, Iy, Qy) at the unnormalized +-1 level grid, together
with the bit label of each point. All downstream components (mapper, demapper,
theory curves, ambiguity resolution) derive what they need from the
descriptor instead of hard-coding per-format facts.

The 3D-Simplex format places four points on a regular tetrahedron inside the
(Ix, Qx, Iy) cube with Qy = 0: the x polarization carries QPSK, the y
polarization carries BPSK whose sign is the XOR of the two label bits. That
construction doubles the squared minimum distance relative to DP-BPSK (8
versus 4 on the same grid) while raising average symbol energy only from 2 to
3, which is where its sensitivity advantage comes from.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

FORMAT_NAMES = ("3D-Simplex", "DP-BPSK", "DP-QPSK", "DP-DPSK")

# Label order 00, 01, 10, 11; columns Ix, Qx, Iy, Qy. The y sign is the XOR
# of the two bits, so any two points differ in x by a QPSK step and in y
# whenever they differ in exactly one bit: every pairwise squared distance
# comes out 8.
_SIMPLEX_POINTS = np.array(
    [
        [-1.0, -1.0, -1.0, 0.0],
        [-1.0, +1.0, +1.0, 0.0],
        [+1.0, -1.0, +1.0, 0.0],
        [+1.0, +1.0, -1.0, 0.0],
    ]
)


@dataclass(frozen=True)
class FormatDescriptor:
    """Dual-polarization constellation with bit labels.

    Attributes
    ----------
    name:
        Canonical format name, one of ``FORMAT_NAMES``.
    bits_per_symbol:
        Number of label bits per dual-polarization symbol.
    points:
        Array of shape (M, 4), columns (Ix, Qx, Iy, Qy) on the +-1 grid.
    labels:
        Array of shape (M, bits_per_symbol), dtype uint8; row i is the bit
        label of ``points[i]``.
    differential:
        True when the label bits are differentially precoded per
        polarization before mapping (DP-DPSK).
    """

    name: str
    bits_per_symbol: int
    points: np.ndarray
    labels: np.ndarray
    differential: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "points", np.asarray(self.points, dtype=np.float64))
        object.__setattr__(self, "labels", np.asarray(self.labels, dtype=np.uint8))
        if self.points.shape != (self.labels.shape[0], 4):
            raise ValueError("points must be (M, 4) with one row per label")
        if self.labels.shape[1] != self.bits_per_symbol:
            raise ValueError("labels must be (M, bits_per_symbol)")

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    @property
    def scale(self) -> float:
        """Field scale that normalizes average dual-pol symbol power to 1."""
        return 1.0 / np.sqrt(float(np.mean(np.sum(self.points**2, axis=1))))

    def points_complex(self) -> tuple[np.ndarray, np.ndarray]:
        """Constellation as complex (x, y) pairs on the +-1 grid."""
        p = self.points
        return p[:, 0] + 1j * p[:, 1], p[:, 2] + 1j * p[:, 3]

    def label_index(self) -> np.ndarray:
        """Integer value of each label row, MSB first."""
        weights = 1 << np.arange(self.bits_per_symbol - 1, -1, -1, dtype=np.int64)
        return (self.labels.astype(np.int64) @ weights).astype(np.int64)

    def tributary_points(self, pol: str) -> np.ndarray:
        """Distinct complex sub-constellation of one polarization."""
        zx, zy = self.points_complex()
        z = zx if pol == "x" else zy
        out = np.unique(np.round(z, 12))
        return out

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "bits_per_symbol": self.bits_per_symbol,
            "points": self.points.tolist(),
            "labels": self.labels.tolist(),
            "differential": self.differential,
        }


@dataclass(frozen=True)
class FormatMetrics:
    """Geometric figures of merit of a constellation.

    ``energy_per_dmin_sq`` is average symbol energy divided by squared
    minimum distance; the format with the smaller value tolerates more noise
    at the same distance margin, so OSNR gaps follow from its ratio.
    """

    d_min: float
    p_avg: float
    energy_per_dmin_sq: float


def _bit_tuples(n_bits: int) -> np.ndarray:
    m = 1 << n_bits
    out = np.zeros((m, n_bits), dtype=np.uint8)
    for i in range(m):
        for b in range(n_bits):
            out[i, b] = (i >> (n_bits - 1 - b)) & 1
    return out


def build_format(name: str) -> FormatDescriptor:
    """Construct the descriptor for one of the four supported formats.

    Names are matched case-insensitively; the descriptor carries the
    canonical spelling.
    """
    canon = {n.casefold(): n for n in FORMAT_NAMES}
    name = canon.get(name.casefold(), name)
    if name == "3D-Simplex":
        return FormatDescriptor(
            name=name,
            bits_per_symbol=2,
            points=_SIMPLEX_POINTS,
            labels=_bit_tuples(2),
        )
    if name in ("DP-BPSK", "DP-DPSK"):
        labels = _bit_tuples(2)
        lv = labels.astype(np.float64) * 2.0 - 1.0
        points = np.stack(
            [lv[:, 0], np.zeros(4), lv[:, 1], np.zeros(4)], axis=1
        )
        return FormatDescriptor(
            name=name,
            bits_per_symbol=2,
            points=points,
            labels=labels,
            differential=(name == "DP-DPSK"),
        )
    if name == "DP-QPSK":
        labels = _bit_tuples(4)
        lv = labels.astype(np.float64) * 2.0 - 1.0
        points = np.stack([lv[:, 0], lv[:, 1], lv[:, 2], lv[:, 3]], axis=1)
        return FormatDescriptor(
            name=name, bits_per_symbol=4, points=points, labels=labels
        )
    raise ValueError(f"unknown format {name!r}, expected one of {FORMAT_NAMES}")


def format_metrics(fd: FormatDescriptor) -> FormatMetrics:
    """Minimum Euclidean distance, average energy and their quotient."""
    p = fd.points
    diff = p[:, None, :] - p[None, :, :]
    dsq = np.sum(diff**2, axis=2)
    np.fill_diagonal(dsq, np.inf)
    d_min = float(np.sqrt(dsq.min()))
    p_avg = float(np.mean(np.sum(p**2, axis=1)))
    return FormatMetrics(d_min=d_min, p_avg=p_avg, energy_per_dmin_sq=p_avg / d_min**2)


def osnr_gap_db(a: FormatDescriptor, b: FormatDescriptor) -> float:
    """Asymptotic OSNR gap of format ``a`` relative to ``b`` in dB.

    Positive means ``a`` needs more OSNR than ``b`` for the same distance
    margin at equal bit rate.
    """
    ma = format_metrics(a)
    mb = format_metrics(b)
    return 10.0 * np.log10(ma.energy_per_dmin_sq / mb.energy_per_dmin_sq)


@dataclass(frozen=True)
class Symmetry:
    """One residual transmitter-side ambiguity of a constellation.

    The blind receiver can deliver the symbol stream rotated by ``theta_x``
    on x and ``theta_y`` on y (and with polarizations exchanged when
    ``swap``) whenever that transformation maps the constellation onto
    itself. ``label_perm`` maps the transmitted point index to the index the
    receiver sees under the transformation.
    """

    theta_x: float
    theta_y: float
    swap: bool
    label_perm: np.ndarray


def constellation_symmetries(fd: FormatDescriptor) -> list[Symmetry]:
    """Enumerate rotations (and polarization swaps) that fix the point set.

    Candidate angles are the rotational symmetry grid of each tributary's
    own sub-constellation; a polarization swap is only considered when the
    two sub-constellations are identical, which rules it out for
    3D-Simplex (QPSK on x, BPSK on y). Only jointly valid transformations
    survive: for 3D-Simplex a pi/2 rotation of x flips the XOR carried on y,
    so it must be paired with a y sign flip, leaving a 4-element group.
    """
    zx, zy = fd.points_complex()
    tx_pts = fd.tributary_points("x")
    ty_pts = fd.tributary_points("y")
    nx = _rotation_order(tx_pts)
    ny = _rotation_order(ty_pts)
    swap_ok = len(tx_pts) == len(ty_pts) and np.allclose(
        np.sort_complex(tx_pts), np.sort_complex(ty_pts)
    )

    out: list[Symmetry] = []
    for swap in ([False, True] if swap_ok else [False]):
        for kx in range(nx):
            for ky in range(ny):
                theta_x = 2.0 * np.pi * kx / nx
                theta_y = 2.0 * np.pi * ky / ny
                ax, ay = (zy, zx) if swap else (zx, zy)
                wx = ax * np.exp(1j * theta_x)
                wy = ay * np.exp(1j * theta_y)
                perm = _match_points(zx, zy, wx, wy)
                if perm is not None:
                    out.append(
                        Symmetry(
                            theta_x=theta_x,
                            theta_y=theta_y,
                            swap=swap,
                            label_perm=perm,
                        )
                    )
    return out


def _rotation_order(pts: np.ndarray) -> int:
    """Largest n in (4, 2, 1) whose rotation maps pts onto itself."""
    for n in (4, 2, 1):
        rot = pts * np.exp(1j * 2.0 * np.pi / n)
        if _same_point_set(pts, rot):
            return n
    return 1


def _same_point_set(a: np.ndarray, b: np.ndarray) -> bool:
    if len(a) != len(b):
        return False
    used = np.zeros(len(a), dtype=bool)
    for v in b:
        d = np.abs(a - v)
        d[used] = np.inf
        i = int(np.argmin(d))
        if d[i] > 1e-9:
            return False
        used[i] = True
    return True


def _match_points(
    zx: np.ndarray, zy: np.ndarray, wx: np.ndarray, wy: np.ndarray
) -> np.ndarray | None:
    """Permutation p with (wx, wy)[i] == (zx, zy)[p[i]], or None."""
    m = len(zx)
    perm = np.full(m, -1, dtype=np.int64)
    for i in range(m):
        d = np.abs(zx - wx[i]) + np.abs(zy - wy[i])
        j = int(np.argmin(d))
        if d[j] > 1e-9 or j in perm:
            return None
        perm[i] = j
    return perm
