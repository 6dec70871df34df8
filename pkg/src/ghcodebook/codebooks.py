"""Precoding-codebook constructions and the GHCB text file format.

Five families are supported:

* ``dftc``        rotated DFT columns (IEEE 802.16e style rotation vector)
* ``hc``          column subsets of the scaled Sylvester Hadamard matrix
* ``dc``          phase-scaled standard-basis column selections
* ``ghc-real``    column subsets of the real Golden-Hadamard matrix
* ``ghc-complex`` column subsets of the complex Golden-Hadamard matrix

Every codebook is an ordered list of ``n_t x m`` complex matrices; entry
``i`` follows the 1-based generator-index convention.
"""

import enum
import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .linalg import as_matrix, orthonormalize_columns

__all__ = [
    "CodebookFamily",
    "CodebookSpec",
    "Codebook",
    "sylvester_hadamard",
    "golden_number",
    "gh_scale",
    "golden_hadamard",
    "dft_matrix",
    "dft_rotation",
    "distinct_subspace_count",
    "table_default_size",
    "build_codebook",
    "serialize_codebook",
    "save_codebook",
    "load_codebook",
]

MAX_HADAMARD_ORDER = 8

# Default rotation vectors for the DFT family (802.16e parameters).  The
# 4-antenna vector rotates modulo 64 regardless of codebook size.
_DEFAULT_ROTATIONS = {2: (1, 7), 4: (1, 7, 52, 56)}
_DEFAULT_ROTATION_MODULUS = {4: 64}


class CodebookFamily(enum.Enum):
    DFTC = "dftc"
    HC = "hc"
    DC = "dc"
    GHC_REAL = "ghc-real"
    GHC_COMPLEX = "ghc-complex"


class CodebookFormatError(ValueError):
    """Malformed GHCB file; carries the offending 1-based line number."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class CodebookSpec:
    """Parameters that fully determine one codebook.

    ``n_t`` must be a power of two (``n_t = 2**q``); ``rotation_u`` and
    ``l_rot`` apply to the DFT family only and get 802.16e defaults when
    omitted; ``golden_case_n`` is the geometric root of the Golden scale
    (sqrt5 for the real case, sqrt3 for the complex one).
    """

    family: CodebookFamily
    n_t: int
    m: int
    l: int
    rotation_u: tuple = None
    golden_case_n: float = None
    l_rot: int = None

    def __post_init__(self):
        fam = self.family
        if isinstance(fam, str):
            fam = CodebookFamily(fam)
            object.__setattr__(self, "family", fam)
        if self.n_t < 2 or (self.n_t & (self.n_t - 1)) != 0:
            raise ValueError(f"n_t must be a power of two >= 2, got {self.n_t}")
        if not 1 <= self.m <= self.n_t:
            raise ValueError(f"m must satisfy 1 <= m <= n_t={self.n_t}, got {self.m}")
        if self.l < 1:
            raise ValueError(f"codebook size l must be >= 1, got {self.l}")
        if fam is CodebookFamily.DFTC:
            u = self.rotation_u
            l_rot = self.l_rot
            if u is None:
                if self.n_t not in _DEFAULT_ROTATIONS:
                    raise ValueError(
                        f"no default rotation vector for n_t={self.n_t}; "
                        "pass rotation_u explicitly"
                    )
                u = _DEFAULT_ROTATIONS[self.n_t]
                if l_rot is None:
                    l_rot = _DEFAULT_ROTATION_MODULUS.get(self.n_t, self.l)
            u = tuple(int(v) for v in u)
            if len(u) != self.n_t:
                raise ValueError(
                    f"rotation_u must have n_t={self.n_t} entries, got {len(u)}"
                )
            object.__setattr__(self, "rotation_u", u)
            object.__setattr__(self, "l_rot", int(l_rot) if l_rot else self.l)
        elif self.rotation_u is not None:
            object.__setattr__(self, "rotation_u", tuple(int(v) for v in self.rotation_u))
        if fam in (CodebookFamily.GHC_REAL, CodebookFamily.GHC_COMPLEX):
            n = self.golden_case_n
            if n is None:
                n = math.sqrt(5.0) if fam is CodebookFamily.GHC_REAL else math.sqrt(3.0)
            if n <= 1.0:
                raise ValueError(f"golden root n must exceed 1, got {n}")
            object.__setattr__(self, "golden_case_n", float(n))

    @property
    def q(self):
        return self.n_t.bit_length() - 1

    def to_dict(self):
        return {
            "family": self.family.value,
            "n_t": self.n_t,
            "m": self.m,
            "l": self.l,
            "rotation_u": list(self.rotation_u) if self.rotation_u else None,
            "golden_case_n": self.golden_case_n,
            "l_rot": self.l_rot,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            family=CodebookFamily(d["family"]),
            n_t=int(d["n_t"]),
            m=int(d["m"]),
            l=int(d["l"]),
            rotation_u=tuple(d["rotation_u"]) if d.get("rotation_u") else None,
            golden_case_n=d.get("golden_case_n"),
            l_rot=d.get("l_rot"),
        )


@dataclass(eq=False)
class Codebook:
    """An ordered list of ``l`` precoding matrices plus its spec."""

    spec: CodebookSpec
    matrices: tuple = field(repr=False)

    def __post_init__(self):
        mats = []
        for i, w in enumerate(self.matrices):
            w = as_matrix(w, f"codebook entry {i + 1}")
            if w.shape != (self.spec.n_t, self.spec.m):
                raise ValueError(
                    f"codebook entry {i + 1} has shape {w.shape}, expected "
                    f"({self.spec.n_t}, {self.spec.m})"
                )
            w.flags.writeable = False
            mats.append(w)
        if len(mats) != self.spec.l:
            raise ValueError(
                f"codebook declares l={self.spec.l} but holds {len(mats)} matrices"
            )
        object.__setattr__(self, "matrices", tuple(mats))

    def __len__(self):
        return len(self.matrices)

    def stacked(self):
        """All entries as one ``(l, n_t, m)`` array (for vectorized scoring)."""
        return np.stack(self.matrices)


def sylvester_hadamard(q):
    """The ``2^q x 2^q`` Sylvester Hadamard matrix of +-1 entries.

    Built by the doubling recursion ``H(2n) = [[H, H], [H, -H]]`` from
    ``H(1) = [1]``; satisfies ``H H^T = 2^q I`` exactly.
    """
    q = int(q)
    if q < 0:
        raise ValueError(f"Hadamard order q must be >= 0, got {q}")
    if q > MAX_HADAMARD_ORDER:
        raise ValueError(f"Hadamard order q must be <= {MAX_HADAMARD_ORDER}, got {q}")
    h = np.array([[1.0]])
    for _ in range(q):
        h = np.block([[h, h], [h, -h]])
    return h.astype(np.complex128)


def golden_number(case):
    """The Golden number: ``(1+sqrt5)/2`` (real) or ``(sqrt3+j)/2`` (complex).

    Both satisfy ``theta * (1/theta) = 1``; the reciprocal-minus-self gap
    ``1/theta - theta`` is -1 in the real case and -j in the complex case.
    """
    case = str(case).lower()
    if case == "real":
        return complex((1.0 + math.sqrt(5.0)) / 2.0)
    if case == "complex":
        return complex(math.sqrt(3.0) / 2.0, 0.5)
    raise ValueError(f"golden case must be 'real' or 'complex', got {case!r}")


def gh_scale(q, n):
    """Golden-Hadamard normalizer ``xi = n*((1+n)^q - (1-n)^q) / 2^q``."""
    q = int(q)
    if q < 1:
        raise ValueError(f"gh_scale needs q >= 1, got {q}")
    n = float(n)
    if n <= 1.0:
        raise ValueError(f"gh_scale needs n > 1, got {n}")
    return n * ((1.0 + n) ** q - (1.0 - n) ** q) / 2**q


def golden_hadamard(q, case):
    """The ``2^q x 2^q`` Golden-Hadamard matrix.

    ``(theta/sqrt(xi)) * [[H, H], [H, (1/theta - theta) H]]`` with ``H`` the
    ``2^(q-1)`` Sylvester Hadamard matrix; the real case uses root n=sqrt5,
    the complex case n=sqrt3.
    """
    q = int(q)
    if q < 1:
        raise ValueError(f"golden_hadamard needs q >= 1, got {q}")
    theta = golden_number(case)
    n = math.sqrt(5.0) if str(case).lower() == "real" else math.sqrt(3.0)
    xi = gh_scale(q, n)
    h = sylvester_hadamard(q - 1)
    gap = 1.0 / theta - theta  # -1 (real) or -1j (complex)
    return (theta / math.sqrt(xi)) * np.block([[h, h], [h, gap * h]])


def dft_matrix(n):
    """Unitary ``n x n`` DFT matrix, entry ``(k,l) = exp(j2pi kl/n)/sqrt(n)``."""
    n = int(n)
    if n < 1:
        raise ValueError(f"dft_matrix needs n >= 1, got {n}")
    k = np.arange(n)
    return np.exp(2j * np.pi * np.outer(k, k) / n) / math.sqrt(n)


def dft_rotation(spec):
    """Diagonal rotation ``diag(exp(j2pi u_k / l_rot))`` for a DFT spec."""
    if spec.family is not CodebookFamily.DFTC:
        raise ValueError(f"dft_rotation applies to the dftc family, got {spec.family.value}")
    if spec.rotation_u is None:
        raise ValueError("dftc spec is missing its rotation vector")
    u = np.asarray(spec.rotation_u, dtype=float)
    return np.diag(np.exp(2j * np.pi * u / spec.l_rot))


def _packed_column_subsets(base, n_t, m):
    """Lexicographic m-column subsets of ``base``, greedily pruned so the
    minimum pairwise subspace distance never degrades.

    For matrices with mutually orthogonal columns the pruning keeps every
    subset; when some columns are non-orthogonal (complex Golden-Hadamard)
    it drops the subsets that would collapse the packing.
    """
    kept_cols = []
    kept_bases = []
    running_min = None
    for cols in combinations(range(n_t), m):
        cand = orthonormalize_columns(base[:, list(cols)])
        if not kept_bases:
            kept_cols.append(cols)
            kept_bases.append(cand)
            continue
        dmin = min(
            math.sqrt(max(0.0, m - np.linalg.norm(qb.conj().T @ cand) ** 2))
            for qb in kept_bases
        )
        if running_min is None or dmin >= running_min - 1e-12:
            kept_cols.append(cols)
            kept_bases.append(cand)
            running_min = dmin if running_min is None else min(running_min, dmin)
    return kept_cols


def distinct_subspace_count(family, n_t, m):
    """Number of distinct column subspaces a subset family enumerates.

    Scalar rotations beyond this count revisit the same subspaces, so this
    is the natural codebook size for packing metrics.  Not defined for the
    DFT family, whose rotations genuinely move the subspace.
    """
    family = CodebookFamily(family) if isinstance(family, str) else family
    if family is CodebookFamily.HC:
        base = sylvester_hadamard(n_t.bit_length() - 1) / math.sqrt(n_t)
    elif family is CodebookFamily.GHC_REAL:
        base = golden_hadamard(n_t.bit_length() - 1, "real")
    elif family is CodebookFamily.GHC_COMPLEX:
        base = golden_hadamard(n_t.bit_length() - 1, "complex")
    elif family is CodebookFamily.DC:
        return math.comb(n_t, m)
    else:
        raise ValueError(f"{family.value} has no subset enumeration")
    return len(_packed_column_subsets(base, n_t, m))


def table_default_size(family, n_t, m):
    """Default codebook size used by the metric tables.

    Subset families use their distinct-subspace count; the DFT family uses
    the 802.16e rotation modulus (64 entries for four antennas).
    """
    family = CodebookFamily(family) if isinstance(family, str) else family
    if family is CodebookFamily.DFTC:
        if n_t in _DEFAULT_ROTATION_MODULUS:
            return _DEFAULT_ROTATION_MODULUS[n_t]
        return 4 if n_t == 2 else 2 * n_t
    return distinct_subspace_count(family, n_t, m)


def build_codebook(spec):
    """Construct the full size-``l`` codebook described by ``spec``.

    Deterministic: identical specs produce bit-identical codebooks.
    """
    fam = spec.family
    n_t, m, l = spec.n_t, spec.m, spec.l
    mats = []
    if fam is CodebookFamily.DFTC:
        w1 = dft_matrix(n_t)[:, :m]
        theta = dft_rotation(spec)
        w = w1
        for _ in range(l):
            mats.append(w)
            w = theta @ w
    elif fam in (CodebookFamily.HC, CodebookFamily.GHC_REAL, CodebookFamily.GHC_COMPLEX):
        if fam is CodebookFamily.HC:
            base = sylvester_hadamard(spec.q) / math.sqrt(n_t)
        else:
            case = "real" if fam is CodebookFamily.GHC_REAL else "complex"
            base = golden_hadamard(spec.q, case)
        subsets = _packed_column_subsets(base, n_t, m)
        c = len(subsets)
        for i in range(1, l + 1):
            sub = base[:, list(subsets[(i - 1) % c])]
            if i <= c:
                scalar = 1.0
            elif fam is CodebookFamily.HC:
                scalar = (-1.0) ** ((i - 1) // c)
            elif fam is CodebookFamily.GHC_REAL:
                scalar = (-1.0) ** (i - 1)
            else:
                scalar = (-1j) ** (i - 1)
            mats.append(scalar * sub)
    elif fam is CodebookFamily.DC:
        subsets = list(combinations(range(n_t), m))
        c = len(subsets)
        eye = np.eye(n_t, dtype=np.complex128)
        for i in range(1, l + 1):
            cols = subsets[(i - 1) % c]
            p = (i - 1) // c
            phase = np.exp(2j * np.pi * p / l)
            mats.append(phase * eye[:, list(cols)])
    else:  # pragma: no cover - enum is exhaustive
        raise ValueError(f"unknown codebook family {fam!r}")
    return Codebook(spec=spec, matrices=tuple(mats))


# ---------------------------------------------------------------------------
# GHCB v1 file format: versioned line-oriented text, lossless round trip.
# ---------------------------------------------------------------------------

_FORMAT_VERSION = "GHCB v1"


def _format_entry(z):
    return f"{z.real:.17g}{z.imag:+.17g}j"


def serialize_codebook(cb):
    """Render a codebook in the GHCB v1 text format."""
    spec = cb.spec
    u = ",".join(str(v) for v in spec.rotation_u) if spec.rotation_u else "-"
    n = f"{spec.golden_case_n:.17g}" if spec.golden_case_n is not None else "-"
    l_rot = spec.l_rot if spec.l_rot is not None else spec.l
    lines = [
        _FORMAT_VERSION,
        f"family={spec.family.value} n_t={spec.n_t} m={spec.m} l={spec.l} "
        f"q={spec.q} u={u} n={n} l_rot={l_rot}",
    ]
    for i, w in enumerate(cb.matrices, start=1):
        lines.append(f"matrix i={i}")
        for row in w:
            lines.append(" ".join(_format_entry(z) for z in row))
    return "\n".join(lines) + "\n"


def save_codebook(cb, path):
    """Write the codebook to ``path`` in GHCB v1 format."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write(serialize_codebook(cb))


def _parse_header_fields(text, lineno):
    fields = {}
    for token in text.split():
        if "=" not in token:
            raise CodebookFormatError(f"malformed header token {token!r}", lineno)
        key, value = token.split("=", 1)
        fields[key] = value
    required = {"family", "n_t", "m", "l", "q", "u", "n", "l_rot"}
    missing = required - fields.keys()
    if missing:
        raise CodebookFormatError(f"header missing keys {sorted(missing)}", lineno)
    return fields


def parse_codebook(text):
    """Parse GHCB v1 text; raises CodebookFormatError with a line number."""
    lines = text.splitlines()
    if not lines:
        raise CodebookFormatError("empty file", 1)
    if lines[0].strip() != _FORMAT_VERSION:
        raise CodebookFormatError(
            f"unsupported format version {lines[0].strip()!r}; expected {_FORMAT_VERSION!r}",
            1,
        )
    if len(lines) < 2:
        raise CodebookFormatError("missing header line", 2)
    fields = _parse_header_fields(lines[1], 2)
    try:
        family = CodebookFamily(fields["family"])
        n_t, m, l = int(fields["n_t"]), int(fields["m"]), int(fields["l"])
        q = int(fields["q"])
        u = None
        if fields["u"] != "-":
            u = tuple(int(v) for v in fields["u"].split(","))
        n = None if fields["n"] == "-" else float(fields["n"])
        l_rot = None if fields["l_rot"] == "-" else int(fields["l_rot"])
    except (KeyError, ValueError) as exc:
        raise CodebookFormatError(f"bad header value: {exc}", 2) from None
    try:
        spec = CodebookSpec(
            family=family, n_t=n_t, m=m, l=l, rotation_u=u, golden_case_n=n, l_rot=l_rot
        )
    except ValueError as exc:
        raise CodebookFormatError(str(exc), 2) from None
    if q != spec.q:
        raise CodebookFormatError(f"q={q} inconsistent with n_t={n_t}", 2)

    mats = []
    lineno = 2
    idx = 2
    for i in range(1, l + 1):
        if idx >= len(lines):
            raise CodebookFormatError(
                f"file ends before matrix {i} of {l}", len(lines) + 1
            )
        lineno = idx + 1
        header = lines[idx].strip()
        if header != f"matrix i={i}":
            raise CodebookFormatError(
                f"expected 'matrix i={i}', got {header!r}", lineno
            )
        idx += 1
        rows = []
        for r in range(n_t):
            if idx >= len(lines):
                raise CodebookFormatError(
                    f"matrix {i} truncated after {r} of {n_t} rows", len(lines) + 1
                )
            lineno = idx + 1
            tokens = lines[idx].split()
            if len(tokens) != m:
                raise CodebookFormatError(
                    f"matrix {i} row {r + 1} has {len(tokens)} entries, expected {m}",
                    lineno,
                )
            try:
                rows.append([complex(tok) for tok in tokens])
            except ValueError:
                raise CodebookFormatError(
                    f"matrix {i} row {r + 1} has an unparseable entry", lineno
                ) from None
            idx += 1
        mats.append(np.array(rows, dtype=np.complex128))
    trailing = [ln for ln in lines[idx:] if ln.strip()]
    if trailing:
        raise CodebookFormatError(
            f"unexpected trailing content {trailing[0]!r}", idx + 1
        )
    return Codebook(spec=spec, matrices=tuple(mats))


def load_codebook(path):
    """Read a GHCB v1 codebook file."""
    with open(path, "r", encoding="ascii") as fh:
        return parse_codebook(fh.read())
