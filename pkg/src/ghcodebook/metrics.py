"""Codebook quality measures and analytic error bounds.

Covers the subspace-packing view (chordal distance, minimum chordal
distance), the coding-gain view (minimum determinant over codeword
differences), block-diagonal codeword distortion, the Chernoff bound on
the pairwise error probability and the resulting BER union bound.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .linalg import frobenius_norm_sq, orthonormalize_columns

__all__ = [
    "McdReport",
    "MdReport",
    "DistortionProfile",
    "chordal_distance",
    "min_chordal_distance",
    "codeword_distortion",
    "min_determinant",
    "pep_chernoff",
    "effective_norm",
    "ber_union_bound",
    "theta_sq_constant",
]

DISTORTION_FREE_TOL = 1e-12

# Magnitude-squared constant used by the bounds: the published value for the
# real Golden number (its literal 1.6180), the corrected squared modulus
# 2.6180, and 1.0 for the unit-modulus complex Golden number.
THETA_SQ_DEFAULT = 1.6180
THETA_SQ_CORRECTED = 2.6180
THETA_SQ_COMPLEX = 1.0


def theta_sq_constant(case="real", corrected=False):
    """Real bound constant for a Golden-number case."""
    case = str(case).lower()
    if case == "real":
        return THETA_SQ_CORRECTED if corrected else THETA_SQ_DEFAULT
    if case == "complex":
        return THETA_SQ_COMPLEX
    raise ValueError(f"golden case must be 'real' or 'complex', got {case!r}")


def _report_json(obj):
    return json.dumps(obj, indent=2, sort_keys=True)


@dataclass(frozen=True)
class McdReport:
    """Minimum chordal distance of a codebook.

    ``value`` is the minimum over all unordered pairs; ``first_matrix_value``
    restricts the minimum to pairs containing entry 1.  ``argmin_pair`` and
    the pair indices in ``pairwise`` are 1-based codebook indices.
    """

    value: float
    argmin_pair: tuple
    pairwise: tuple = field(repr=False)
    first_matrix_value: float = None

    def to_dict(self):
        return {
            "value": self.value,
            "argmin_pair": list(self.argmin_pair),
            "pairwise": [[i, j, d] for (i, j, d) in self.pairwise],
            "first_matrix_value": self.first_matrix_value,
        }

    def to_json(self):
        return _report_json(self.to_dict())

    def to_text(self):
        lines = [
            f"value={self.value:.12g}",
            f"argmin_pair={self.argmin_pair[0]},{self.argmin_pair[1]}",
            f"first_matrix_value={self.first_matrix_value:.12g}",
            f"pairs={len(self.pairwise)}",
        ]
        return "\n".join(lines)


@dataclass(frozen=True)
class MdReport:
    """Minimum determinant of the precoded-difference code.

    ``reported = sqrt(2^b * delta_inf)`` with ``delta_inf`` anchored at the
    4-bit reference constellation; ``argmin`` names the minimizing precoder
    index (1-based) and symbol-pair difference.
    """

    b: int
    delta_inf: float
    reported: float
    argmin: dict
    metadata: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "b": self.b,
            "delta_inf": self.delta_inf,
            "reported": self.reported,
            "argmin": {
                "precoder_index": self.argmin["precoder_index"],
                "delta1": [self.argmin["delta1"].real, self.argmin["delta1"].imag],
                "delta2": [self.argmin["delta2"].real, self.argmin["delta2"].imag],
            },
            "metadata": dict(self.metadata),
        }

    def to_json(self):
        return _report_json(self.to_dict())

    def to_text(self):
        a = self.argmin
        return "\n".join(
            [
                f"b={self.b}",
                f"delta_inf={self.delta_inf:.12g}",
                f"reported={self.reported:.12g}",
                f"argmin_precoder={a['precoder_index']}",
                f"argmin_delta1={a['delta1']}",
                f"argmin_delta2={a['delta2']}",
            ]
        )


@dataclass(frozen=True)
class DistortionProfile:
    """Block-diagonal magnitude profile of an ``n x 2`` codeword.

    The codeword is read as stacked 2x2 blocks; ``diag_magnitudes`` holds
    the per-block main-diagonal entry magnitudes, ``anti_diag_magnitudes``
    the anti-diagonal ones, and ``block_geo_means`` the geometric mean of
    each block's diagonal pair (the scalar distortion measure).
    """

    diag_magnitudes: tuple
    anti_diag_magnitudes: tuple
    is_distortion_free: bool
    block_geo_means: tuple

    def to_dict(self):
        return {
            "diag_magnitudes": list(self.diag_magnitudes),
            "anti_diag_magnitudes": list(self.anti_diag_magnitudes),
            "is_distortion_free": self.is_distortion_free,
            "block_geo_means": list(self.block_geo_means),
        }

    def to_json(self):
        return _report_json(self.to_dict())


def chordal_distance(w1, w2):
    """Chordal distance between the column spans of two equal-shape matrices.

    ``d = sqrt(max(0, m - ||Q1^H Q2||_F^2))`` on orthonormalized bases; lies
    in ``[0, sqrt(m)]``, is symmetric, and vanishes iff the spans coincide.
    """
    q1 = orthonormalize_columns(w1)
    q2 = orthonormalize_columns(w2)
    if q1.shape != q2.shape:
        raise ValueError(f"shape mismatch: {q1.shape} vs {q2.shape}")
    m = q1.shape[1]
    overlap = frobenius_norm_sq(q1.conj().T @ q2)
    return math.sqrt(max(0.0, m - overlap))


def min_chordal_distance(cb):
    """Minimum chordal distance over all unordered codebook pairs.

    Ties break toward the lexicographically smallest (i, j); the report
    also carries the fixed-first-entry variant ``min_i d(W_1, W_i)``.
    """
    mats = cb.matrices
    if len(mats) < 2:
        raise ValueError(f"need at least 2 codebook entries, got {len(mats)}")
    pairwise = []
    best = math.inf
    best_pair = None
    for i in range(len(mats)):
        for j in range(i + 1, len(mats)):
            d = chordal_distance(mats[i], mats[j])
            pairwise.append((i + 1, j + 1, d))
            if d < best:
                best = d
                best_pair = (i + 1, j + 1)
    first = min(d for (i, j, d) in pairwise if i == 1)
    return McdReport(
        value=best,
        argmin_pair=best_pair,
        pairwise=tuple(pairwise),
        first_matrix_value=first,
    )


def codeword_distortion(x):
    """Profile the stacked 2x2 blocks of a two-column codeword.

    Raises ValueError unless ``x`` has an even row count and exactly two
    columns.  A codeword is distortion-free when every block-diagonal
    magnitude is at most 1e-12.
    """
    x = np.asarray(x, dtype=np.complex128)
    if x.ndim != 2 or x.shape[1] != 2 or x.shape[0] % 2 != 0:
        raise ValueError(
            f"codeword must be (2k x 2), got shape {x.shape if x.ndim == 2 else x.ndim}"
        )
    diag = []
    anti = []
    geo = []
    for k in range(x.shape[0] // 2):
        d1 = abs(x[2 * k, 0])
        d2 = abs(x[2 * k + 1, 1])
        diag.extend([d1, d2])
        anti.extend([abs(x[2 * k, 1]), abs(x[2 * k + 1, 0])])
        geo.append(math.sqrt(d1 * d2))
    return DistortionProfile(
        diag_magnitudes=tuple(diag),
        anti_diag_magnitudes=tuple(anti),
        is_distortion_free=max(diag) <= DISTORTION_FREE_TOL,
        block_geo_means=tuple(geo),
    )


def _difference_set(b):
    """Complex differences of the unnormalized odd-integer square QAM."""
    k = 2 ** (b // 2)
    axis = np.arange(-2 * (k - 1), 2 * (k - 1) + 1, 2, dtype=float)
    d = (axis[:, None] + 1j * axis[None, :]).ravel()
    return d


def min_determinant(cb, b):
    """Brute-force minimum determinant of precoded Alamouti differences.

    Scans every precoder and every nonzero symbol-pair difference of the
    unnormalized odd-integer QAM lattice, forms the precoded difference
    block and takes the minimum of ``det(Xi^H Xi)^(1/2)``.  The result is
    anchored at the 4-bit lattice (``delta_inf = D / 2^4``) and reported as
    ``sqrt(2^b * delta_inf)``.
    """
    if b not in (4, 6):
        raise ValueError(f"bits per symbol must be 4 or 6, got {b}")
    if cb.spec.m != 2:
        raise ValueError(f"minimum determinant needs m=2 codebooks, got m={cb.spec.m}")
    diffs = _difference_set(b)
    d1 = np.repeat(diffs, diffs.size)
    d2 = np.tile(diffs, diffs.size)
    keep = (d1 != 0) | (d2 != 0)
    d1, d2 = d1[keep], d2[keep]
    # Stacked 2x2 Alamouti difference blocks, shape (N, 2, 2).
    ds = np.empty((d1.size, 2, 2), dtype=np.complex128)
    ds[:, 0, 0] = d1
    ds[:, 0, 1] = -np.conj(d2)
    ds[:, 1, 0] = d2
    ds[:, 1, 1] = np.conj(d1)
    ds_h = np.conj(np.transpose(ds, (0, 2, 1)))

    best = math.inf
    best_arg = None
    for w_idx, w in enumerate(cb.matrices, start=1):
        gram = w.conj().T @ w  # Xi^H Xi == dS^H (W^H W) dS
        m = np.einsum("nij,jk,nkl->nil", ds_h, gram, ds)
        dets = np.real(m[:, 0, 0] * m[:, 1, 1] - m[:, 0, 1] * m[:, 1, 0])
        np.maximum(dets, 0.0, out=dets)
        values = np.sqrt(dets)
        k = int(values.argmin())
        if values[k] < best:
            best = float(values[k])
            best_arg = {
                "precoder_index": w_idx,
                "delta1": complex(d1[k]),
                "delta2": complex(d2[k]),
            }
    delta_inf = best / 2**4
    reported = math.sqrt(2**b * delta_inf)
    return MdReport(
        b=b,
        delta_inf=delta_inf,
        reported=reported,
        argmin=best_arg,
        metadata={
            "constellation": "odd-integer-unnormalized",
            "determinant": "sqrt-gram",
            "anchor_bits": 4,
        },
    )


def pep_chernoff(h, snr_linear, q, theta_sq=THETA_SQ_DEFAULT):
    """Chernoff bound on the pairwise error probability.

    ``exp(-theta_sq * snr * ||h||^2 / (2 * 2^q))`` for a column vector
    ``h``; ``theta_sq`` defaults to the real-Golden-number constant 1.6180.
    """
    snr_linear = float(snr_linear)
    if snr_linear < 0:
        raise ValueError(f"snr_linear must be >= 0, got {snr_linear}")
    energy = frobenius_norm_sq(np.asarray(h, dtype=np.complex128).reshape(-1, 1))
    return math.exp(-theta_sq * snr_linear * energy / (2.0 * 2**q))


def effective_norm(h, theta, feedback="correct"):
    """Effective-channel energy under correct or incorrect index feedback.

    With ``a = |h_max|^2`` and ``b = |h_min|^2`` the largest/smallest entry
    energies of ``h``: correct feedback gives
    ``2|theta|^2 a + (1 + |theta|^2 - |theta|^4) b``; incorrect feedback
    swaps the two energies.
    """
    mags = np.abs(np.asarray(h, dtype=np.complex128).ravel()) ** 2
    if mags.size < 2:
        raise ValueError(f"channel needs at least 2 entries, got {mags.size}")
    t2 = abs(complex(theta)) ** 2
    big, small = float(mags.max()), float(mags.min())
    feedback = str(feedback).lower()
    if feedback == "correct":
        a, b = big, small
    elif feedback == "incorrect":
        a, b = small, big
    else:
        raise ValueError(f"feedback must be 'correct' or 'incorrect', got {feedback!r}")
    return 2.0 * t2 * a + (1.0 + t2 - t2 * t2) * b


def _hamming_weight_per_codeword(labels):
    """Mean per-codeword sum of Hamming distances to all other codewords."""
    codes = np.asarray(labels, dtype=np.uint32)
    xor = codes[:, None] ^ codes[None, :]
    ham = np.bitwise_count(xor)
    return float(ham.sum(axis=1).mean())


def _union_bound_from_labels(labels, b, pep):
    """Union-bound core: equal-prior average of weighted pairwise PEPs."""
    if len(labels) < 2:
        return 0.0
    return _hamming_weight_per_codeword(labels) / float(b) * pep


def ber_union_bound(constellation, h, snr_linear, q, theta_sq=THETA_SQ_DEFAULT):
    """Union bound on the BER over all Alamouti symbol-pair codewords.

    Sums ``hamming(S_k, S_l) / b`` times the Chernoff PEP over the decoded
    alternatives, averaged over equiprobable transmitted pairs.  Returns
    ``(value, raw)`` where ``value`` clips the raw bound to [0, 1].
    """
    b = constellation.b
    npts = len(constellation.points)
    # Labels of all symbol pairs: the pair code is the 2b-bit concatenation.
    singles = np.arange(npts, dtype=np.uint32)
    pairs = (singles[:, None] << np.uint32(b)) | singles[None, :]
    pep = pep_chernoff(h, snr_linear, q, theta_sq)
    raw = _union_bound_from_labels(pairs.ravel(), b, pep)
    return min(max(raw, 0.0), 1.0), raw
