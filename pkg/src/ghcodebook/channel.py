"""Stochastic models: Rayleigh block fading, receiver noise, delayed feedback.

All randomness flows through :class:`Rng`, a thin wrapper over the Philox
counter-based generator keyed by ``(seed, stream)``.  Identical keys give
identical draw sequences on every platform, substreams with different
``stream`` values are statistically independent, and the counter can be
advanced in O(1) so callers may carve a stream into fixed-size per-trial
blocks.  Normal variates always come from Box-Muller over raw uniforms,
which pins the uniform-consumption budget of every operation.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .linalg import as_matrix, bessel_j0

__all__ = [
    "Rng",
    "FeedbackModel",
    "sample_channel",
    "apply_channel",
    "degrade_feedback",
    "normals_from_uniforms",
]

RNG_ALGORITHM = "philox4x64"
_DOUBLES_PER_COUNTER_STEP = 4  # Philox-4x64 emits 4 words per counter tick


def normals_from_uniforms(u):
    """Box-Muller transform of a flat even-length uniform array.

    Pairs ``(u[2i], u[2i+1])`` map to two independent standard normals;
    consumption is therefore exactly one uniform per normal.
    """
    u = np.asarray(u, dtype=np.float64)
    if u.size % 2 != 0:
        raise ValueError(f"need an even number of uniforms, got {u.size}")
    u = u.reshape(-1, 2)
    radius = np.sqrt(-2.0 * np.log1p(-u[:, 0]))  # 1-u in (0, 1] avoids log(0)
    angle = 2.0 * np.pi * u[:, 1]
    out = np.empty(u.shape[0] * 2, dtype=np.float64)
    out[0::2] = radius * np.cos(angle)
    out[1::2] = radius * np.sin(angle)
    return out


@dataclass
class Rng:
    """Deterministic Philox stream keyed by ``(seed, stream)``.

    Single-owner: never share one instance across concurrent tasks; derive
    independent children with :meth:`child` instead.
    """

    seed: int
    stream: int = 0
    algorithm: str = RNG_ALGORITHM
    _gen: np.random.Generator = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.algorithm != RNG_ALGORITHM:
            raise ValueError(f"unsupported rng algorithm {self.algorithm!r}")

    def _generator(self):
        if self._gen is None:
            key = np.array(
                [self.seed & 0xFFFFFFFFFFFFFFFF, self.stream & 0xFFFFFFFFFFFFFFFF],
                dtype=np.uint64,
            )
            self._gen = np.random.Generator(np.random.Philox(key=key))
        return self._gen

    def child(self, stream):
        """Independent substream of the same seed."""
        return Rng(seed=self.seed, stream=stream)

    def skip(self, n_doubles):
        """Advance the stream by ``n_doubles`` draws (multiple of 4, O(1))."""
        if n_doubles % _DOUBLES_PER_COUNTER_STEP != 0:
            raise ValueError(
                f"skip length must be a multiple of {_DOUBLES_PER_COUNTER_STEP}, "
                f"got {n_doubles}"
            )
        self._generator().bit_generator.advance(n_doubles // _DOUBLES_PER_COUNTER_STEP)

    def uniforms(self, n):
        """``n`` doubles uniform on [0, 1); consumes exactly ``n`` draws."""
        return self._generator().random(int(n))

    def normals(self, n):
        """``n`` standard normals; consumes ``2 * ceil(n/2)`` uniforms."""
        pairs = (int(n) + 1) // 2
        return normals_from_uniforms(self.uniforms(2 * pairs))[: int(n)]

    def complex_normals(self, n):
        """``n`` circularly-symmetric CN(0, 1) variates."""
        z = self.normals(2 * int(n))
        return (z[0::2] + 1j * z[1::2]) / math.sqrt(2.0)


@dataclass(frozen=True)
class FeedbackModel:
    """Feedback-link quality: perfect CSI or Jakes-correlated delayed CSI.

    ``alpha`` is always recomputed from the normalized Doppler ``fd_tc``
    and the delay ``delta`` (in feedback intervals), never cached.
    """

    mode: str = "perfect"
    fd_tc: float = 0.0
    delta: float = 0.0

    def __post_init__(self):
        mode = str(self.mode).lower()
        if mode not in ("perfect", "delayed"):
            raise ValueError(f"feedback mode must be 'perfect' or 'delayed', got {mode!r}")
        object.__setattr__(self, "mode", mode)
        if mode == "delayed" and (self.fd_tc < 0 or self.delta < 0):
            raise ValueError("fd_tc and delta must be non-negative")

    @property
    def alpha(self):
        if self.mode == "perfect":
            return 1.0
        return bessel_j0(2.0 * math.pi * self.fd_tc * self.delta)

    def to_dict(self):
        return {"mode": self.mode, "fd_tc": self.fd_tc, "delta": self.delta,
                "alpha": self.alpha}

    @classmethod
    def from_dict(cls, d):
        return cls(mode=d["mode"], fd_tc=d.get("fd_tc", 0.0), delta=d.get("delta", 0.0))


def sample_channel(rng, n_t):
    """Draw an ``n_t x 1`` i.i.d. CN(0, 1) fading vector."""
    if n_t < 1:
        raise ValueError(f"n_t must be >= 1, got {n_t}")
    return rng.complex_normals(n_t).reshape(-1, 1)


def apply_channel(h, x, snr_db, rng):
    """Propagate ``x`` through ``h`` and add receiver noise.

    ``y = h^T x + z`` with ``z`` i.i.d. CN(0, sigma^2) and
    ``sigma^2 = 10^(-snr_db/10)`` under unit average transmit symbol energy.
    """
    h = as_matrix(h, "channel")
    x = as_matrix(x, "codeword")
    if h.shape[1] != 1 or h.shape[0] != x.shape[0]:
        raise ValueError(
            f"channel {h.shape} incompatible with codeword {x.shape}; "
            "need h: (n_t, 1) and x: (n_t, T)"
        )
    sigma = math.sqrt(10.0 ** (-float(snr_db) / 10.0))
    noise = sigma * rng.complex_normals(x.shape[1])
    return h.T @ x + noise.reshape(1, -1)


def degrade_feedback(h, fm, rng):
    """Channel estimate available to the feedback link.

    Perfect mode returns ``h`` unchanged; delayed mode returns
    ``alpha h + sqrt(1 - alpha^2) e`` with a fresh CN(0, I) error vector,
    which preserves the CN(0, I) marginal at any correlation.
    """
    h = as_matrix(h, "channel")
    if fm.mode == "perfect":
        return h
    alpha = fm.alpha
    err = sample_channel(rng, h.shape[0])
    return alpha * h + math.sqrt(max(0.0, 1.0 - alpha * alpha)) * err
