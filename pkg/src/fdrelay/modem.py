"""Square M-QAM mapping, hard quantization and error counting.

Bit labelling
-------------
A label of ``log2(M)`` bits is split in two halves: the most significant half
selects the in-phase level, the other half the quadrature level.  On each axis
the levels are Gray coded by position, with position 0 at the most positive
coordinate::

    16-QAM, one axis:   +3 -> 00   +1 -> 01   -1 -> 11   -3 -> 10

so that the all-zeros label is the upper-right corner point.  The integer value
of a label (MSB first) is its constellation index; the quantizer breaks
distance ties in favour of the smallest index.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

SUPPORTED_ORDERS = (4, 16, 64)


@dataclass(frozen=True)
class Constellation:
    """Unit-energy square QAM constellation.

    Attributes
    ----------
    order : int
        Number of points ``M``.
    axis_levels : ndarray
        ``(sqrt(M),)`` per-axis amplitudes indexed by the per-axis Gray label.
    points : ndarray
        ``(M,)`` complex points indexed by the full label.
    """

    order: int
    axis_levels: np.ndarray = field(repr=False)
    points: np.ndarray = field(repr=False)

    @property
    def bits_per_symbol(self) -> int:
        return int(self.order).bit_length() - 1

    @property
    def side(self) -> int:
        return len(self.axis_levels)


def _gray(n: np.ndarray) -> np.ndarray:
    return n ^ (n >> 1)


@lru_cache(maxsize=None)
def qam(order: int) -> Constellation:
    """Return the normalized ``order``-QAM constellation (cached)."""
    if order not in SUPPORTED_ORDERS:
        raise ValueError(f"unsupported QAM order {order}; expected one of {SUPPORTED_ORDERS}")
    side = int(round(np.sqrt(order)))
    pos = np.arange(side)
    # average energy of the odd-integer grid {±1, ±3, ...}^2
    scale = np.sqrt(2.0 * (order - 1) / 3.0)
    levels = np.empty(side)
    levels[_gray(pos)] = (side - 1 - 2 * pos) / scale
    labels = np.arange(order)
    points = levels[labels // side] + 1j * levels[labels % side]
    levels.flags.writeable = False
    points.flags.writeable = False
    return Constellation(order, levels, points)


def bits_to_labels(bits, c: Constellation) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.int64).ravel()
    m = c.bits_per_symbol
    if bits.size % m:
        raise ValueError(f"bit count {bits.size} is not a multiple of {m}")
    if bits.size and (bits.min() < 0 or bits.max() > 1):
        raise ValueError("bits must be 0 or 1")
    weights = 1 << np.arange(m - 1, -1, -1)
    return bits.reshape(-1, m) @ weights


def labels_to_bits(labels, c: Constellation) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64).ravel()
    shifts = np.arange(c.bits_per_symbol - 1, -1, -1)
    return ((labels[:, None] >> shifts) & 1).ravel().astype(np.uint8)


def map_bits(bits, c: Constellation) -> np.ndarray:
    """Map a flat bit array onto constellation points, ``log2(M)`` bits per symbol."""
    return c.points[bits_to_labels(bits, c)]


def quantize_labels(y, c: Constellation) -> np.ndarray:
    """Labels of the nearest constellation points (ties -> smallest label)."""
    y = np.asarray(y, dtype=complex)
    lv = c.axis_levels
    # np.argmin keeps the first minimum, i.e. the smallest per-axis label
    li = np.argmin(np.abs(y.real[..., None] - lv) ** 2, axis=-1)
    lq = np.argmin(np.abs(y.imag[..., None] - lv) ** 2, axis=-1)
    return li * c.side + lq


def quantize(y, c: Constellation) -> np.ndarray:
    """Symbol-wise minimum-distance decision onto ``c``."""
    return c.points[quantize_labels(y, c)]


def demap(y, c: Constellation) -> np.ndarray:
    """Hard-decision bits for received samples ``y``."""
    return labels_to_bits(quantize_labels(y, c), c)


def count_errors(tx_bits, rx_bits, bits_per_symbol: int) -> tuple[int, int]:
    """Return ``(bit_errors, symbol_errors)`` between two bit streams."""
    tx = np.asarray(tx_bits).ravel()
    rx = np.asarray(rx_bits).ravel()
    if tx.shape != rx.shape:
        raise ValueError(f"length mismatch: {tx.size} vs {rx.size}")
    if tx.size % bits_per_symbol:
        raise ValueError("stream length is not a whole number of symbols")
    diff = (tx != rx).reshape(-1, bits_per_symbol)
    return int(diff.sum()), int(diff.any(axis=1).sum())


_POPCOUNT = np.array([bin(i).count("1") for i in range(64)], dtype=np.int64)


def label_bit_errors(tx_labels, rx_labels) -> int:
    """Bit errors between two label arrays (labels < 64)."""
    x = np.bitwise_xor(np.asarray(tx_labels, dtype=np.int64), np.asarray(rx_labels, dtype=np.int64))
    return int(_POPCOUNT[x].sum())
