"""Square QAM constellations built from per-quadrature PAM level sets.

Labels are integers of width ``2*m``; the in-phase Gray code occupies the
high ``m`` bits and the quadrature Gray code the low ``m`` bits.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, InvalidParameterError

MAX_BITS_PER_DIM = 8
_SYMMETRY_TOL = 1e-12


def _check_bits(m) -> int:
    if isinstance(m, bool) or not isinstance(m, (int, np.integer)):
        raise InvalidParameterError(f"bits per dimension must be an integer, got {m!r}")
    if not 1 <= m <= MAX_BITS_PER_DIM:
        raise InvalidParameterError(
            f"bits per dimension must be in [1, {MAX_BITS_PER_DIM}], got {m}"
        )
    return int(m)


def gray_labeling(m: int) -> np.ndarray:
    """Binary-reflected Gray code of length ``2**m`` as integers.

    Entry ``k`` is the label of the ``k``-th smallest amplitude level.
    """
    m = _check_bits(m)
    k = np.arange(2**m, dtype=np.int64)
    return k ^ (k >> 1)


def format_label(label: int, width: int) -> str:
    return format(int(label), f"0{width}b")


@dataclass(frozen=True)
class PamLevels:
    """Ordered, zero-symmetric amplitude levels of one quadrature.

    The array is stored as given; use :meth:`normalized` to rescale so the
    square product constellation has unit average power (mean square 0.5).
    """

    levels: np.ndarray

    def __post_init__(self):
        arr = np.array(self.levels, dtype=float).ravel()
        n = arr.size
        if n < 2 or n & (n - 1):
            raise InvalidInputError(f"number of levels must be a power of two >= 2, got {n}")
        if n > 2**MAX_BITS_PER_DIM:
            raise InvalidInputError(f"at most {2**MAX_BITS_PER_DIM} levels are supported")
        if not np.all(np.isfinite(arr)):
            raise InvalidInputError("levels must be finite")
        if not np.all(np.diff(arr) > 0):
            raise InvalidInputError("levels must be strictly increasing")
        scale = np.max(np.abs(arr))
        if np.max(np.abs(arr + arr[::-1])) > _SYMMETRY_TOL * max(scale, 1.0):
            raise InvalidInputError("levels must be symmetric about zero")
        arr.setflags(write=False)
        object.__setattr__(self, "levels", arr)

    @classmethod
    def from_positive(cls, positive) -> "PamLevels":
        """Mirror a strictly increasing set of positive amplitudes about zero."""
        pos = np.asarray(positive, dtype=float).ravel()
        if pos.size == 0 or np.any(pos <= 0):
            raise InvalidInputError("positive half-levels must be > 0")
        return cls(np.concatenate([-pos[::-1], pos]))

    @property
    def bits(self) -> int:
        return int(self.levels.size).bit_length() - 1

    @property
    def positive(self) -> np.ndarray:
        return self.levels[self.levels.size // 2:]

    @property
    def mean_square(self) -> float:
        return float(np.mean(self.levels**2))

    def normalized(self) -> "PamLevels":
        return PamLevels(self.levels / np.sqrt(2.0 * self.mean_square))

    def __len__(self):
        return self.levels.size

    def __eq__(self, other):
        if not isinstance(other, PamLevels):
            return NotImplemented
        return np.array_equal(self.levels, other.levels)

    def __hash__(self):
        return hash(self.levels.tobytes())


def uniform_levels(m: int) -> PamLevels:
    """Equally spaced levels +-1, +-3, ..., +-(2**m - 1), unit 2D power."""
    m = _check_bits(m)
    raw = np.arange(-(2**m - 1), 2**m, 2, dtype=float)
    return PamLevels(raw).normalized()


@dataclass(frozen=True)
class Constellation:
    points: np.ndarray
    labels: np.ndarray
    power_normalized: bool = False
    # per-dimension bit width when built as a product; informational only
    bits_per_dim: int | None = field(default=None, compare=False)

    def __post_init__(self):
        pts = np.array(self.points, dtype=complex).ravel()
        labels = np.array(self.labels, dtype=np.int64).ravel()
        n = pts.size
        if n < 2 or n & (n - 1):
            raise InvalidInputError(f"constellation size must be a power of two >= 2, got {n}")
        if labels.size != n:
            raise InvalidInputError("one label per point is required")
        if not np.array_equal(np.sort(labels), np.arange(n)):
            raise InvalidInputError("labels must be a permutation of 0..M-1")
        if not np.all(np.isfinite(pts)):
            raise InvalidInputError("points must be finite")
        pts.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "labels", labels)

    @property
    def size(self) -> int:
        return self.points.size

    @property
    def bits(self) -> int:
        return self.size.bit_length() - 1

    @property
    def mean_power(self) -> float:
        return float(np.mean(np.abs(self.points) ** 2))

    def label_strings(self) -> list[str]:
        return [format_label(v, self.bits) for v in self.labels]

    def by_label(self) -> np.ndarray:
        """Points reordered so that index == label."""
        out = np.empty_like(self.points)
        out[self.labels] = self.points
        return out

    def scaled(self, factor: float) -> "Constellation":
        return Constellation(self.points * factor, self.labels, False, self.bits_per_dim)


def normalize(c: Constellation) -> Constellation:
    """Rescale to unit mean power using the exact discrete mean."""
    power = c.mean_power
    if power <= 0:
        raise InvalidInputError("cannot normalise a zero-power constellation")
    if c.power_normalized:
        return c
    return Constellation(c.points / np.sqrt(power), c.labels, True, c.bits_per_dim)


def product_constellation(i_levels: PamLevels, q_levels: PamLevels) -> Constellation:
    """Square QAM from two level sets with per-axis Gray labels (I bits high)."""
    if i_levels.bits != q_levels.bits:
        raise InvalidInputError("I and Q level sets must carry the same number of bits")
    m = i_levels.bits
    gray = gray_labeling(m)
    ii, qq = np.meshgrid(np.arange(2**m), np.arange(2**m), indexing="ij")
    ii, qq = ii.ravel(), qq.ravel()
    points = i_levels.levels[ii] + 1j * q_levels.levels[qq]
    labels = (gray[ii] << m) | gray[qq]
    return normalize(Constellation(points, labels, False, m))


def square_qam(levels: PamLevels) -> Constellation:
    return product_constellation(levels, levels)


def levels_from_constellation(c: Constellation) -> PamLevels:
    """Recover the shared PAM level set of a Gray-labelled square constellation.

    Raises InvalidInputError when the constellation is not the product of one
    level set with itself under this package's labelling convention.
    """
    if c.bits % 2:
        raise InvalidInputError("square constellation needs an even number of bits")
    m = c.bits // 2
    n = 2**m
    pts = normalize(c).points
    order = np.lexsort((pts.imag, pts.real))
    grid = pts[order].reshape(n, n)
    i_levels = grid[:, 0].real
    q_levels = grid[0, :].imag
    tol = 1e-9
    if (
        np.max(np.abs(grid.real - i_levels[:, None])) > tol
        or np.max(np.abs(grid.imag - q_levels[None, :])) > tol
        or np.max(np.abs(i_levels - q_levels)) > tol
    ):
        raise InvalidInputError("constellation is not a square product of identical level sets")
    try:
        levels = PamLevels(0.5 * (i_levels - i_levels[::-1]))
    except InvalidInputError as exc:
        raise InvalidInputError(f"recovered levels invalid: {exc}") from None
    rebuilt = square_qam(levels)
    if not np.allclose(rebuilt.by_label(), normalize(c).by_label(), rtol=0, atol=1e-9):
        raise InvalidInputError("labels do not follow the per-axis Gray convention")
    return levels.normalized()


@dataclass(frozen=True)
class MomentSummary:
    m2: float
    m4: float
    excess_kurtosis: float


def moments(c: Constellation) -> MomentSummary:
    """Second and fourth absolute moments over equiprobable points.

    ``excess_kurtosis = m4 / m2**2 - 2``; zero for a circular complex
    Gaussian and -1 for any constant-modulus constellation.
    """
    pts = np.asarray(c.points if isinstance(c, Constellation) else c, dtype=complex).ravel()
    if pts.size < 2:
        raise InvalidInputError("moments need at least two points")
    power = np.abs(pts) ** 2
    m2 = float(np.mean(power))
    if m2 <= 0:
        raise InvalidInputError("moments undefined for a zero-power constellation")
    m4 = float(np.mean(power**2))
    return MomentSummary(m2, m4, m4 / m2**2 - 2.0)


def kurtosis_from_levels(levels: PamLevels) -> float:
    """Excess kurtosis of the square product of ``levels`` with itself.

    With independent I and Q, E|X|^2 = 2*mu2 and E|X|^4 = 2*mu4 + 2*mu2**2.
    """
    if not isinstance(levels, PamLevels):
        levels = PamLevels(levels)
    lv = levels.levels
    mu2 = np.mean(lv**2)
    mu4 = np.mean(lv**4)
    return float((mu4 / mu2**2 + 1.0) / 2.0 - 2.0)
