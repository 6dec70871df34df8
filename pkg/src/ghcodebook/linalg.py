"""Complex dense linear algebra primitives shared by every other module.

Matrices are 2-D ``numpy`` arrays with ``complex128`` entries; column
vectors are ``n x 1`` matrices.  Inputs are validated for shape and
finiteness (NaN/Inf are rejected) and all failures raise ``ValueError``
with the offending shapes in the message.
"""

import numpy as np
from scipy.special import j0 as _scipy_j0

__all__ = [
    "matmul",
    "hermitian",
    "frobenius_norm_sq",
    "gram_determinant",
    "orthonormalize_columns",
    "bessel_j0",
]

# Tolerances used by this module and pinned by the test suite.
ORTHONORMALITY_TOL = 1e-10
RANK_TOL = 1e-12
GRAM_IMAG_TOL = 1e-9
BESSEL_J0_DOMAIN = 50.0


def as_matrix(a, name="matrix"):
    """Coerce ``a`` to a finite 2-D complex128 array.

    Raises ValueError if the input is not 2-D or contains NaN/Inf.
    """
    arr = np.asarray(a, dtype=np.complex128)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got ndim={arr.ndim}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def matmul(a, b):
    """Complex matrix product ``a @ b``.

    Raises ValueError naming both shapes when the inner dimensions differ.
    """
    a = as_matrix(a, "left operand")
    b = as_matrix(b, "right operand")
    if a.shape[1] != b.shape[0]:
        raise ValueError(
            f"cannot multiply {a.shape[0]}x{a.shape[1]} by {b.shape[0]}x{b.shape[1]}: "
            "inner dimensions differ"
        )
    return a @ b


def hermitian(a):
    """Conjugate transpose of ``a``."""
    return as_matrix(a).conj().T


def frobenius_norm_sq(a):
    """Sum of squared entry magnitudes (squared Frobenius norm), >= 0."""
    a = as_matrix(a)
    return float(np.sum(np.abs(a) ** 2))


def gram_determinant(a):
    """``det(a^H a)`` of a tall matrix, returned as a real number >= 0.

    For square ``a`` this equals ``|det(a)|^2``.  The determinant of the
    Gram matrix is mathematically real; if the computed imaginary residue
    exceeds ``GRAM_IMAG_TOL`` a numerical-instability error is raised.
    """
    a = as_matrix(a)
    if a.shape[0] < a.shape[1]:
        raise ValueError(
            f"gram_determinant needs rows >= cols, got {a.shape[0]}x{a.shape[1]}"
        )
    det = np.linalg.det(a.conj().T @ a)
    if abs(det.imag) > GRAM_IMAG_TOL:
        raise ValueError(
            f"Gram determinant has imaginary residue {det.imag:.3e} above "
            f"{GRAM_IMAG_TOL:.0e}; input is numerically unstable"
        )
    return max(float(det.real), 0.0)


def orthonormalize_columns(a):
    """Orthonormal basis of the column span of ``a``.

    Modified Gram-Schmidt with one re-orthogonalization pass; the result Q
    spans the same columns and satisfies ``||Q^H Q - I||_F <= 1e-10``.
    Raises ValueError if a pivot column norm falls below ``RANK_TOL``
    (rank-deficient input).
    """
    a = as_matrix(a)
    rows, cols = a.shape
    if rows < cols:
        raise ValueError(
            f"orthonormalize_columns needs rows >= cols, got {rows}x{cols}"
        )
    q = a.copy()
    for _ in range(2):  # second sweep: re-orthogonalization
        for j in range(cols):
            for k in range(j):
                q[:, j] -= (q[:, k].conj() @ q[:, j]) * q[:, k]
            norm = np.linalg.norm(q[:, j])
            if norm < RANK_TOL:
                raise ValueError(
                    f"column {j} is numerically dependent on earlier columns "
                    f"(pivot norm {norm:.3e} < {RANK_TOL:.0e})"
                )
            q[:, j] /= norm
    return q


def bessel_j0(x):
    """Bessel function of the first kind, order zero.

    Validated for ``|x| <= 50``; the implementation keeps absolute error
    well below 1e-8 over that range.
    """
    x = float(x)
    if not np.isfinite(x) or abs(x) > BESSEL_J0_DOMAIN:
        raise ValueError(f"bessel_j0 requires |x| <= {BESSEL_J0_DOMAIN:g}, got {x!r}")
    return float(_scipy_j0(x))
