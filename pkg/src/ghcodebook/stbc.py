"""QAM modulation, Alamouti space-time blocks and ML decoding.

Square QAM constellations carry per-axis reflected-binary Gray labels so
that lattice neighbors differ in exactly one bit.  The ``normalized``
flavor has unit average energy (simulation use); the unnormalized one
lives on the odd-integer lattice ..., -3, -1, 1, 3, ... (determinant
calibration use).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .linalg import as_matrix, matmul

__all__ = [
    "QamConstellation",
    "make_constellation",
    "modulate",
    "demodulate",
    "AlamoutiBlock",
    "alamouti_encode",
    "precode",
    "ml_decode",
]

SUPPORTED_BITS = (2, 4, 6)


class ZeroChannelError(ValueError):
    """Both effective-channel taps are zero; the caller counts an erasure."""


def _gray(k):
    return k ^ (k >> 1)


@dataclass(frozen=True)
class QamConstellation:
    """Gray-labelled square QAM constellation.

    ``points[i]`` is the symbol whose label is the ``b``-bit binary string
    of ``i`` (first half of the bits selects the in-phase level, the rest
    the quadrature level, both through a reflected-binary Gray code).
    """

    b: int
    points: np.ndarray = field(repr=False)
    labels: tuple
    normalized: bool

    def label_bits(self, index):
        """Bit tuple of point ``index``."""
        return tuple(int(c) for c in self.labels[index])

    def bits_to_index(self, bits):
        idx = 0
        for bit in bits:
            idx = (idx << 1) | int(bit)
        return idx

    def min_distance(self):
        d = np.abs(self.points[:, None] - self.points[None, :])
        return float(np.min(d[d > 0]))


def make_constellation(b, normalized=True):
    """Build the ``2^b``-point Gray-coded square QAM constellation."""
    if b not in SUPPORTED_BITS:
        raise ValueError(f"bits per symbol must be one of {SUPPORTED_BITS}, got {b}")
    half = b // 2
    k = 2**half
    levels = 2.0 * np.arange(k) - (k - 1)  # odd-integer lattice
    gray_inv = np.zeros(k, dtype=int)
    for i in range(k):
        gray_inv[_gray(i)] = i
    points = np.empty(2**b, dtype=np.complex128)
    for label in range(2**b):
        i_code = label >> half
        q_code = label & (k - 1)
        points[label] = levels[gray_inv[i_code]] + 1j * levels[gray_inv[q_code]]
    if normalized:
        points = points / math.sqrt(float(np.mean(np.abs(points) ** 2)))
    points.flags.writeable = False
    labels = tuple(format(i, f"0{b}b") for i in range(2**b))
    return QamConstellation(b=b, points=points, labels=labels, normalized=normalized)


def modulate(bits, c):
    """Map a bit sequence to symbols, ``c.b`` bits per symbol, in order."""
    bits = np.asarray(list(bits), dtype=int)
    if bits.size % c.b != 0:
        raise ValueError(
            f"bit count {bits.size} is not a multiple of {c.b} bits per symbol"
        )
    if bits.size == 0:
        return np.empty(0, dtype=np.complex128)
    groups = bits.reshape(-1, c.b)
    idx = groups @ (1 << np.arange(c.b - 1, -1, -1))
    return c.points[idx]


def demodulate(symbols, c):
    """Hard nearest-point demapping back to bits."""
    symbols = np.asarray(symbols, dtype=np.complex128).ravel()
    if symbols.size == 0:
        return np.empty(0, dtype=int)
    idx = np.abs(symbols[:, None] - c.points[None, :]).argmin(axis=1)
    out = np.zeros((symbols.size, c.b), dtype=int)
    for col in range(c.b):
        out[:, col] = (idx >> (c.b - 1 - col)) & 1
    return out.ravel()


@dataclass(frozen=True)
class AlamoutiBlock:
    """The 2x2 orthogonal block ``[[s11, -s21*], [s21, s11*]]``."""

    s11: complex
    s21: complex
    matrix: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        m = np.array(
            [
                [self.s11, -np.conj(self.s21)],
                [self.s21, np.conj(self.s11)],
            ],
            dtype=np.complex128,
        )
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)


def alamouti_encode(s11, s21):
    """Encode a symbol pair into its orthogonal 2x2 block."""
    return AlamoutiBlock(s11=complex(s11), s21=complex(s21))


def precode(w, s):
    """Apply a tall precoder to an Alamouti block: ``X = W S`` (n_t x 2)."""
    w = as_matrix(w, "precoder")
    if w.shape[1] != 2:
        raise ValueError(f"precoder must have 2 columns, got shape {w.shape}")
    return matmul(w, s.matrix)


def ml_decode(y, h_eff, c):
    """Alamouti matched-filter combining followed by scaled slicing.

    ``y`` and ``h_eff`` are the length-2 received row and effective channel
    row.  Combining gives ``rho * s`` plus noise with ``rho = |g1|^2+|g2|^2``,
    so slicing against ``rho``-scaled constellation points is exact joint ML
    for the orthogonal block.  Returns ``(s11, s21, bits)``.
    """
    y = np.asarray(y, dtype=np.complex128).ravel()
    g = np.asarray(h_eff, dtype=np.complex128).ravel()
    if y.size != 2 or g.size != 2:
        raise ValueError(f"ml_decode needs 1x2 inputs, got y:{y.size} h_eff:{g.size}")
    rho = float(np.abs(g[0]) ** 2 + np.abs(g[1]) ** 2)
    if rho == 0.0:
        raise ZeroChannelError("effective channel is zero; cannot decode")
    e1 = np.conj(g[0]) * y[0] + g[1] * np.conj(y[1])
    e2 = np.conj(g[1]) * y[0] - g[0] * np.conj(y[1])
    idx1 = int(np.abs(e1 - rho * c.points).argmin())
    idx2 = int(np.abs(e2 - rho * c.points).argmin())
    bits = c.label_bits(idx1) + c.label_bits(idx2)
    return c.points[idx1], c.points[idx2], bits
