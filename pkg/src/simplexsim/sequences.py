"""Test pattern generation: de Bruijn cycles and PRBS.

Experiments transmit one period of a binary de Bruijn cycle tiled to the
block length, so every bit pattern of the cycle order appears equally often
and cyclic alignment at the counter is unambiguous.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Fibonacci LFSR feedback taps for the standard maximal-length polynomials.
_PRBS_TAPS = {7: (7, 6), 9: (9, 5), 11: (11, 9), 15: (15, 14), 23: (23, 18), 31: (31, 28)}


@dataclass(frozen=True)
class BitStream:
    """Bit sequence with provenance.

    ``origin`` is one of "debruijn", "prbs" or "explicit"; ``order`` is the
    generator order when applicable. ``bits`` is a uint8 array of 0/1.
    """

    bits: np.ndarray
    origin: str = "explicit"
    order: int | None = None

    def __post_init__(self) -> None:
        b = np.asarray(self.bits, dtype=np.uint8)
        if b.ndim != 1 or not np.all(b <= 1):
            raise ValueError("bits must be a 1-d array of 0/1")
        object.__setattr__(self, "bits", b)

    def __len__(self) -> int:
        return int(self.bits.shape[0])

    def tile(self, n_bits: int) -> np.ndarray:
        """First n_bits of the infinitely repeated sequence."""
        reps = -(-n_bits // len(self))
        return np.tile(self.bits, reps)[:n_bits]


def de_bruijn(order: int) -> BitStream:
    """Binary de Bruijn cycle B(2, order) of length 2**order.

    Greedy prefer-one construction started from the all-zeros word: extend
    with a 1 whenever the resulting order-bit window is new, else with a 0.
    Every order-bit pattern then appears exactly once per period (cyclically).
    """
    if not 2 <= order <= 24:
        raise ValueError("order must be in [2, 24]")
    n = 1 << order
    mask = n - 1
    visited = np.zeros(n, dtype=bool)
    seq = np.zeros(n, dtype=np.uint8)
    # The initial all-zeros word occupies the first `order` outputs.
    visited[0] = True
    word = 0
    pos = order
    while pos < n:
        nxt = ((word << 1) | 1) & mask
        if not visited[nxt]:
            seq[pos] = 1
        else:
            nxt = (word << 1) & mask
            if visited[nxt]:
                raise RuntimeError("greedy construction stalled")
        visited[nxt] = True
        word = nxt
        pos += 1
    return BitStream(bits=seq, origin="debruijn", order=order)


def prbs(order: int, seed: int | None = None) -> BitStream:
    """Maximal-length LFSR sequence of length 2**order - 1."""
    if order not in _PRBS_TAPS:
        raise ValueError(f"unsupported PRBS order {order}, have {sorted(_PRBS_TAPS)}")
    t1, t2 = _PRBS_TAPS[order]
    state = (1 << order) - 1 if seed is None else (seed & ((1 << order) - 1))
    if state == 0:
        raise ValueError("seed must leave the register nonzero")
    n = (1 << order) - 1
    out = np.zeros(n, dtype=np.uint8)
    for i in range(n):
        fb = ((state >> (order - t1)) ^ (state >> (order - t2))) & 1
        out[i] = state & 1
        state = (state >> 1) | (fb << (order - 1))
    return BitStream(bits=out, origin="prbs", order=order)
