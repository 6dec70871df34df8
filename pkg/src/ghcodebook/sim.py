"""Monte-Carlo BER engine: precoder selection, per-SNR trial loops, sweeps.

Determinism contract
--------------------
Every trial's randomness is a pure function of ``(seed, snr_index, trial)``:
point ``snr_index`` owns the Philox stream ``(seed, snr_index)`` and trial
``t`` consumes a fixed block of uniforms starting at counter offset
``t * budget``.  Trials are generated and evaluated in fixed-size chunks;
worker threads only split chunk lists, and the stopping rule is applied to
chunk prefixes in index order, so results are bit-identical for any thread
count and any scheduling.
"""

import csv
import hashlib
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .channel import FeedbackModel, Rng, normals_from_uniforms
from .codebooks import CodebookSpec, build_codebook, serialize_codebook
from .stbc import make_constellation

__all__ = [
    "SimConfig",
    "BerPoint",
    "SweepResult",
    "select_precoder",
    "run_ber_point",
    "run_sweep",
    "array_gain",
]

TRIALS_PER_CHUNK = 4096


@dataclass(frozen=True)
class SimConfig:
    """Full description of one BER experiment."""

    codebook_spec: CodebookSpec
    b: int = 4
    snr_grid_db: tuple = tuple(range(0, 31, 2))
    feedback: FeedbackModel = FeedbackModel("perfect")
    min_trials: int = 1000
    min_bit_errors: int = 200
    max_trials: int = 10_000_000
    seed: int = 0
    renormalize_precoders: bool = False

    def __post_init__(self):
        grid = tuple(float(s) for s in self.snr_grid_db)
        if not grid:
            raise ValueError("snr_grid_db must be nonempty")
        if any(b >= a for a, b in zip(grid[1:], grid)):
            raise ValueError(f"snr_grid_db must be strictly increasing, got {grid}")
        object.__setattr__(self, "snr_grid_db", grid)
        if self.min_trials < 1:
            raise ValueError(f"min_trials must be >= 1, got {self.min_trials}")
        if self.min_bit_errors < 0:
            raise ValueError(f"min_bit_errors must be >= 0, got {self.min_bit_errors}")
        if self.max_trials < 1:
            raise ValueError(f"max_trials must be >= 1, got {self.max_trials}")

    def to_dict(self):
        return {
            "codebook_spec": self.codebook_spec.to_dict(),
            "b": self.b,
            "snr_grid_db": list(self.snr_grid_db),
            "feedback": self.feedback.to_dict(),
            "min_trials": self.min_trials,
            "min_bit_errors": self.min_bit_errors,
            "max_trials": self.max_trials,
            "seed": self.seed,
            "renormalize_precoders": self.renormalize_precoders,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            codebook_spec=CodebookSpec.from_dict(d["codebook_spec"]),
            b=int(d["b"]),
            snr_grid_db=tuple(d["snr_grid_db"]),
            feedback=FeedbackModel.from_dict(d["feedback"]),
            min_trials=int(d["min_trials"]),
            min_bit_errors=int(d["min_bit_errors"]),
            max_trials=int(d["max_trials"]),
            seed=int(d["seed"]),
            renormalize_precoders=bool(d["renormalize_precoders"]),
        )


@dataclass(frozen=True)
class BerPoint:
    """One measured (SNR, BER) point; ``ber == bit_errors / bits_simulated``."""

    snr_db: float
    ber: float
    bit_errors: int
    bits_simulated: int
    trials: int
    low_confidence: bool = False

    def to_dict(self):
        return {
            "snr_db": self.snr_db,
            "ber": self.ber,
            "bit_errors": self.bit_errors,
            "bits_simulated": self.bits_simulated,
            "trials": self.trials,
            "low_confidence": self.low_confidence,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            snr_db=float(d["snr_db"]),
            ber=float(d["ber"]),
            bit_errors=int(d["bit_errors"]),
            bits_simulated=int(d["bits_simulated"]),
            trials=int(d["trials"]),
            low_confidence=bool(d.get("low_confidence", False)),
        )


@dataclass
class SweepResult:
    """All points of one sweep plus provenance metadata."""

    config: SimConfig
    points: tuple
    codebook_digest: str
    wallclock: float
    column_norm_sq: float = None

    def to_dict(self):
        return {
            "config": self.config.to_dict(),
            "points": [p.to_dict() for p in self.points],
            "codebook_digest": self.codebook_digest,
            "wallclock": self.wallclock,
            "column_norm_sq": self.column_norm_sq,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        return cls(
            config=SimConfig.from_dict(d["config"]),
            points=tuple(BerPoint.from_dict(p) for p in d["points"]),
            codebook_digest=d["codebook_digest"],
            wallclock=float(d["wallclock"]),
            column_norm_sq=d.get("column_norm_sq"),
        )

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["snr_db", "ber", "bit_errors", "bits", "trials"])
        for p in self.points:
            writer.writerow(
                [repr(p.snr_db), repr(p.ber), p.bit_errors, p.bits_simulated, p.trials]
            )
        return buf.getvalue()


def _precoder_scores(h_fb_rows, stacked):
    """Receive-energy score ``||h^T W_i||_F^2`` for rows of channels.

    ``h_fb_rows`` is ``(k, n_t)``, ``stacked`` is ``(l, n_t, m)``; returns
    ``(k, l)``.
    """
    l, n_t, m = stacked.shape
    flat = np.ascontiguousarray(np.transpose(stacked, (1, 0, 2)).reshape(n_t, l * m))
    proj = h_fb_rows @ flat
    return (np.abs(proj) ** 2).reshape(-1, l, m).sum(axis=2)


def select_precoder(h_fb, cb):
    """Pick the precoder maximizing post-precoding receive energy.

    Returns ``(index, matrix)`` with ``index`` the 0-based position in
    ``cb.matrices``; ties break toward the lowest index.
    """
    if len(cb.matrices) == 0:
        raise ValueError("codebook is empty")
    h = np.asarray(h_fb, dtype=np.complex128).reshape(1, -1)
    if h.shape[1] != cb.spec.n_t:
        raise ValueError(
            f"feedback channel has {h.shape[1]} entries, codebook needs {cb.spec.n_t}"
        )
    scores = _precoder_scores(h, cb.stacked())[0]
    idx = int(scores.argmax())  # argmax returns the first (lowest) maximizer
    return idx, cb.matrices[idx]


def _trial_budget(n_t, b):
    """Uniform draws consumed per trial (a multiple of 4 for even ``b``)."""
    return 4 * n_t + 2 * b + 4


def _renormalized(stacked):
    norms = np.linalg.norm(stacked, axis=1, keepdims=True)
    return stacked / norms


def _complex_from_uniform_pairs(u):
    """CN(0,1) variates from ``(k, 2n)`` uniforms, one entry per pair."""
    k = u.shape[0]
    z = normals_from_uniforms(u.reshape(-1))
    return (z[0::2] + 1j * z[1::2]).reshape(k, -1) / math.sqrt(2.0)


def _run_chunk(uniforms, stacked, points, b, alpha, sigma, bit_weights):
    """Evaluate one chunk of trials from its uniform block; returns
    ``(bit_errors, bits, trials)``."""
    k_trials = uniforms.shape[0]
    n_t = stacked.shape[1]
    cols = 0
    h = _complex_from_uniform_pairs(uniforms[:, cols : cols + 2 * n_t])
    cols += 2 * n_t
    h_err = _complex_from_uniform_pairs(uniforms[:, cols : cols + 2 * n_t])
    cols += 2 * n_t
    bits = uniforms[:, cols : cols + 2 * b] < 0.5
    cols += 2 * b
    noise = sigma * _complex_from_uniform_pairs(uniforms[:, cols : cols + 4])

    if alpha == 1.0:
        h_fb = h
    else:
        h_fb = alpha * h + math.sqrt(max(0.0, 1.0 - alpha * alpha)) * h_err

    idx = _precoder_scores(h_fb, stacked).argmax(axis=1)
    w_sel = stacked[idx]  # (k, n_t, m)
    g = np.einsum("kt,ktm->km", h, w_sel)

    lab1 = bits[:, :b].astype(np.uint32) @ bit_weights
    lab2 = bits[:, b : 2 * b].astype(np.uint32) @ bit_weights
    s1 = points[lab1]
    s2 = points[lab2]

    y1 = g[:, 0] * s1 + g[:, 1] * s2 + noise[:, 0]
    y2 = -g[:, 0] * np.conj(s2) + g[:, 1] * np.conj(s1) + noise[:, 1]
    e1 = np.conj(g[:, 0]) * y1 + g[:, 1] * np.conj(y2)
    e2 = np.conj(g[:, 1]) * y1 - g[:, 0] * np.conj(y2)
    rho = np.abs(g[:, 0]) ** 2 + np.abs(g[:, 1]) ** 2

    d1 = np.abs(e1[:, None] - rho[:, None] * points[None, :]).argmin(axis=1)
    d2 = np.abs(e2[:, None] - rho[:, None] * points[None, :]).argmin(axis=1)
    errors = np.bitwise_count(lab1 ^ d1.astype(np.uint32)) + np.bitwise_count(
        lab2 ^ d2.astype(np.uint32)
    )
    erased = rho == 0.0
    if np.any(erased):  # zero channel: count half of the 2b bits as errors
        errors = np.where(erased, b, errors)
    return int(errors.sum()), 2 * b * k_trials, k_trials


def _chunk_uniforms(seed, stream, chunk_index, k_trials, budget):
    rng = Rng(seed=seed, stream=stream)
    rng.skip(chunk_index * k_trials * budget)
    return rng.uniforms(k_trials * budget).reshape(k_trials, budget)


def run_ber_point(cfg, cb, snr_db, threads=1, progress=None):
    """Measure one BER point.

    Runs chunks of trials until both ``min_trials`` and ``min_bit_errors``
    are reached, capped at ``max_trials`` (rounded down to whole chunks);
    a capped point that missed ``min_bit_errors`` is flagged low-confidence.
    """
    snr_db = float(snr_db)
    try:
        stream = cfg.snr_grid_db.index(snr_db)
    except ValueError:
        raise ValueError(f"snr_db={snr_db} is not on the config grid {cfg.snr_grid_db}")
    stacked = cb.stacked()
    if cfg.renormalize_precoders:
        stacked = _renormalized(stacked)
    points = make_constellation(cfg.b, normalized=True).points
    bit_weights = (1 << np.arange(cfg.b - 1, -1, -1)).astype(np.uint32)
    alpha = cfg.feedback.alpha
    sigma = math.sqrt(10.0 ** (-snr_db / 10.0))
    budget = _trial_budget(cfg.codebook_spec.n_t, cfg.b)

    max_chunks = max(1, cfg.max_trials // TRIALS_PER_CHUNK)
    errors = bits = trials = 0

    def eval_chunk(c):
        u = _chunk_uniforms(cfg.seed, stream, c, TRIALS_PER_CHUNK, budget)
        return _run_chunk(u, stacked, points, cfg.b, alpha, sigma, bit_weights)

    def satisfied():
        return trials >= cfg.min_trials and errors >= cfg.min_bit_errors

    next_chunk = 0
    stopped = False
    while next_chunk < max_chunks and not stopped:
        wave = list(range(next_chunk, min(next_chunk + max(1, threads), max_chunks)))
        next_chunk = wave[-1] + 1
        if threads > 1 and len(wave) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(eval_chunk, wave))
        else:
            results = [eval_chunk(c) for c in wave]
        # Accumulate strictly in chunk order so the stopping prefix is
        # independent of how many chunks were computed speculatively.
        for res in results:
            errors += res[0]
            bits += res[1]
            trials += res[2]
            if satisfied():
                stopped = True
                break
        if progress is not None:
            progress(snr_db, trials, errors)
    return BerPoint(
        snr_db=snr_db,
        ber=errors / bits,
        bit_errors=errors,
        bits_simulated=bits,
        trials=trials,
        low_confidence=not satisfied(),
    )


def run_sweep(cfg, threads=1, progress=None):
    """Run every grid SNR of ``cfg`` against one freshly built codebook."""
    start = time.perf_counter()
    cb = build_codebook(cfg.codebook_spec)
    digest = hashlib.sha256(serialize_codebook(cb).encode("ascii")).hexdigest()
    stacked = cb.stacked()
    col_norm_sq = float(np.mean(np.abs(stacked) ** 2) * cb.spec.n_t)
    points = tuple(
        run_ber_point(cfg, cb, snr, threads=threads, progress=progress)
        for snr in cfg.snr_grid_db
    )
    return SweepResult(
        config=cfg,
        points=points,
        codebook_digest=digest,
        wallclock=time.perf_counter() - start,
        column_norm_sq=1.0 if cfg.renormalize_precoders else col_norm_sq,
    )


def _crossing_snr(points, target_ber):
    """SNR where the curve crosses ``target_ber``, log-linear in BER."""
    pts = sorted(points, key=lambda p: p.snr_db)
    for a, b in zip(pts, pts[1:]):
        if a.ber >= target_ber >= b.ber and a.ber > 0 and b.ber > 0:
            if a.ber == b.ber:
                return a.snr_db
            la, lb, lt = math.log10(a.ber), math.log10(b.ber), math.log10(target_ber)
            return a.snr_db + (b.snr_db - a.snr_db) * (lt - la) / (lb - la)
    raise ValueError(
        f"target BER {target_ber:g} is outside the achieved range "
        f"[{min(p.ber for p in pts):g}, {max(p.ber for p in pts):g}]"
    )


def array_gain(result_a, result_b, target_ber):
    """Horizontal dB gap between two sweeps at ``target_ber``.

    Positive when curve ``a`` reaches the target at lower SNR than ``b``.
    """
    if result_a.config.b != result_b.config.b:
        raise ValueError(
            f"sweeps use different constellations: b={result_a.config.b} vs "
            f"b={result_b.config.b}"
        )
    if not 0.0 < target_ber < 1.0:
        raise ValueError(f"target BER must lie in (0, 1), got {target_ber}")
    return _crossing_snr(result_b.points, target_ber) - _crossing_snr(
        result_a.points, target_ber
    )
