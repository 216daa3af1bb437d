"""Bit-metric (BICM) generalized mutual information over the AWGN channel.

Two independent estimators are provided: Gauss-Hermite quadrature on one
quadrature of a square constellation (fast, used inside optimisation) and a
seeded Monte Carlo estimate over the full complex constellation (oracle).
Values are per complex (2D) symbol unless stated otherwise.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np

from .constellation import Constellation, PamLevels, gray_labeling
from .errors import InvalidInputError, InvalidParameterError, NumericError

DEFAULT_NODES = 64
MIN_NODES = 10
# numpy's Hermite weights overflow beyond a few hundred nodes
MAX_NODES = 256
MIN_MC_SAMPLES = 10_000
THREADS_ENV = "GSQAM_THREADS"
_MC_CHUNK = 8192


@dataclass(frozen=True)
class ChannelSnr:
    """Signal power over total complex noise variance (linear)."""

    snr_linear: float

    def __post_init__(self):
        v = float(self.snr_linear)
        if not np.isfinite(v) or v <= 0:
            raise InvalidParameterError(f"SNR must be positive and finite, got {self.snr_linear!r}")
        object.__setattr__(self, "snr_linear", v)

    @classmethod
    def from_db(cls, snr_db: float) -> "ChannelSnr":
        return cls(10.0 ** (float(snr_db) / 10.0))

    @property
    def db(self) -> float:
        return 10.0 * np.log10(self.snr_linear)


def as_snr(snr) -> ChannelSnr:
    """Accept a ChannelSnr or a positive linear SNR value."""
    return snr if isinstance(snr, ChannelSnr) else ChannelSnr(snr)


class GmiMethod(str, Enum):
    QUADRATURE = "quadrature"
    MONTE_CARLO = "monte_carlo"


@dataclass(frozen=True)
class GmiEstimate:
    value: float
    method: GmiMethod
    samples: int = 0
    std_error: float = 0.0

    @property
    def value_4d(self) -> float:
        """Dual-polarisation figure (twice the per-2D value)."""
        return 2.0 * self.value

    def to_dict(self) -> dict:
        return {
            "gmi_2d": self.value,
            "gmi_4d": self.value_4d,
            "method": self.method.value,
            "samples": self.samples,
            "std_error": self.std_error,
            "std_error_4d": 2.0 * self.std_error,
        }


@lru_cache(maxsize=16)
def _hermgauss(nodes: int):
    t, w = np.polynomial.hermite.hermgauss(nodes)
    return t, w / np.sqrt(np.pi)


@lru_cache(maxsize=16)
def _bit_table(m: int) -> np.ndarray:
    # bits[k, i]: bit i (MSB first) of the Gray label of level k
    gray = gray_labeling(m)
    shifts = np.arange(m - 1, -1, -1)
    return ((gray[:, None] >> shifts[None, :]) & 1).astype(bool)


def gmi_pam_noise(levels, noise_variance: float, nodes: int = DEFAULT_NODES) -> float:
    """GMI in bit per real dimension of Gray-labelled PAM at a given noise variance.

    ``levels`` is used as given (no normalisation), which makes the joint
    scale invariance of levels and noise directly testable.
    """
    if isinstance(nodes, bool) or int(nodes) != nodes or not MIN_NODES <= nodes <= MAX_NODES:
        raise InvalidParameterError(f"quadrature nodes must be in [{MIN_NODES}, {MAX_NODES}], got {nodes}")
    lv = np.asarray(levels.levels if isinstance(levels, PamLevels) else levels, dtype=float)
    k = lv.size
    if k < 2 or k & (k - 1):
        raise InvalidInputError("number of levels must be a power of two >= 2")
    if not noise_variance > 0:
        raise InvalidParameterError("noise variance must be positive")
    m = k.bit_length() - 1
    t, w = _hermgauss(int(nodes))

    # y = x_k + sqrt(2 var) t_j, so -(y - x')^2 / (2 var) = -(t_j + (x_k - x') / sqrt(2 var))^2
    scaled = (lv[:, None] - lv[None, :]) / np.sqrt(2.0 * noise_variance)
    metric = -((t[None, :, None] + scaled[:, None, :]) ** 2)  # (K, J, K')
    # shift by the maximum over candidates; the transmitted level contributes
    # exp(-t_j^2) to every matched sum, which stays far above underflow
    shift = metric.max(axis=2, keepdims=True)
    weights = np.exp(metric - shift)
    bits = _bit_table(m)
    ones = bits.astype(float)  # (K', m)
    sum1 = weights @ ones  # (K, J, m)
    sum0 = weights @ (1.0 - ones)
    total = weights.sum(axis=2)
    matched = np.where(bits[:, None, :], sum1, sum0)
    penalty = np.log(total)[:, :, None] - np.log(matched)  # (K, J, m) nats
    loss = np.einsum("kji,j->", penalty, w) / k
    value = m - loss / np.log(2.0)
    if not np.isfinite(value):
        raise NumericError("non-finite GMI from quadrature")
    return float(value)


def gmi_quadrature_1d(levels: PamLevels, snr, nodes: int = DEFAULT_NODES) -> float:
    """GMI in bit per real dimension at a per-dimension SNR.

    The levels are rescaled to per-dimension power 1/2 and the noise variance
    per dimension is ``0.5 / snr``.
    """
    snr = as_snr(snr)
    lv = levels.levels if isinstance(levels, PamLevels) else np.asarray(levels, dtype=float)
    lv = lv / np.sqrt(2.0 * np.mean(lv**2))
    return gmi_pam_noise(lv, 0.5 / snr.snr_linear, nodes)


def gmi_2d(levels: PamLevels, snr, nodes: int = DEFAULT_NODES) -> GmiEstimate:
    """GMI of the square product constellation, per complex symbol."""
    value = 2.0 * gmi_quadrature_1d(levels, snr, nodes)
    return GmiEstimate(value, GmiMethod.QUADRATURE)


def _mc_shard(points, bit_weights, noise_var, n, seed_seq):
    rng = np.random.default_rng(seed_seq)
    m_total = bit_weights.shape[1] // 2
    xr, xi = points.real, points.imag
    out = np.empty(n)
    done = 0
    while done < n:
        size = min(_MC_CHUNK, n - done)
        tx = rng.integers(0, points.size, size)
        noise = rng.standard_normal((size, 2)) * np.sqrt(noise_var / 2.0)
        yr = xr[tx] + noise[:, 0]
        yi = xi[tx] + noise[:, 1]
        metric = -((yr[:, None] - xr[None, :]) ** 2 + (yi[:, None] - xi[None, :]) ** 2) / noise_var
        # shift by the row maximum; the transmitted point keeps every
        # matched-bit sum >= exp(-|noise|^2 / noise_var), so no underflow
        shift = metric.max(axis=1, keepdims=True)
        weights = np.exp(metric - shift)
        sums = weights @ bit_weights  # (N, 2m): [bit=0 sums | bit=1 sums]
        total = weights.sum(axis=1)
        tx_bits = bit_weights[tx, m_total:]  # 1.0 where the transmitted bit is set
        matched = np.where(tx_bits > 0, sums[:, m_total:], sums[:, :m_total])
        out[done:done + size] = m_total - np.sum(
            np.log(total)[:, None] - np.log(matched), axis=1
        ) / np.log(2.0)
        done += size
    return out


def _default_workers() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def gmi_monte_carlo(
    c: Constellation,
    snr,
    n_samples: int = 1_000_000,
    seed: int = 0,
    shards: int = 8,
    workers: int | None = None,
) -> GmiEstimate:
    """Monte Carlo GMI over the full complex constellation.

    Symbols are equiprobable, noise is circular Gaussian with total variance
    ``1/snr``. Each shard draws from its own child of ``SeedSequence(seed)``,
    so the result depends on ``(seed, shards)`` but not on ``workers``.
    """
    snr = as_snr(snr)
    if isinstance(n_samples, bool) or int(n_samples) != n_samples or n_samples < MIN_MC_SAMPLES:
        raise InvalidParameterError(f"n_samples must be >= {MIN_MC_SAMPLES}, got {n_samples}")
    if shards < 1:
        raise InvalidParameterError("shards must be >= 1")
    n_samples = int(n_samples)
    if abs(c.mean_power - 1.0) > 1e-9:
        raise InvalidInputError("Monte Carlo GMI requires a unit-power constellation")

    points = c.points
    m_total = c.bits
    shifts = np.arange(m_total - 1, -1, -1)
    bits_of = (c.labels[:, None] >> shifts[None, :]) & 1  # (M, m)
    bit_weights = np.hstack([1 - bits_of, bits_of]).astype(float)
    noise_var = 1.0 / snr.snr_linear

    sizes = [n_samples // shards + (1 if s < n_samples % shards else 0) for s in range(shards)]
    children = np.random.SeedSequence(seed).spawn(shards)
    args = [(points, bit_weights, noise_var, n, ss) for n, ss in zip(sizes, children)]
    workers = workers or _default_workers()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda a: _mc_shard(*a), args))
    else:
        parts = [_mc_shard(*a) for a in args]
    info = np.concatenate(parts)
    if not np.all(np.isfinite(info)):
        raise NumericError("non-finite per-symbol information in Monte Carlo GMI")
    value = float(np.mean(info))
    std_error = float(np.std(info, ddof=1) / np.sqrt(n_samples))
    # a noiseless-limit estimate can have zero spread; keep the error strictly positive
    std_error = max(std_error, np.finfo(float).tiny)
    return GmiEstimate(value, GmiMethod.MONTE_CARLO, n_samples, std_error)
