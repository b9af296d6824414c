"""Finite scalar quantization with a sigmoid-family bounding function.

A latent ``z`` is squashed into ``[-1, 1]`` by ``bound(z) = A * sigmoid(alpha * z) + B``,
scaled onto an integer grid of ``L`` levels per dimension and rounded. The rounded
digits can be mapped back to ``[-1, 1]`` (continuous consumers) or folded into a
single token index with a mixed-radix expansion (discrete consumers).

Rounding rule
-------------
Digits are computed as ``round((L - 1) / 2 * (bound(z) + 1))`` and ties are broken
half-away-from-zero. The argument is never negative, so in practice ties round up.
This rule is part of the token format: changing it changes token identity for inputs
that land exactly on a bin boundary.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import expit

INDEX_DTYPE = np.int64
MAX_CODEBOOK_SIZE = int(np.iinfo(INDEX_DTYPE).max)


@dataclass(frozen=True)
class BoundParams:
    """Parameters of ``A * sigmoid(alpha * z) + B``; output lies in ``(B, A + B)``."""

    amplitude: float = 2.0
    slope: float = 1.6
    offset: float = -1.0

    def __post_init__(self):
        for name in ("amplitude", "slope", "offset"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.amplitude <= 0:
            raise ValueError(f"amplitude must be positive, got {self.amplitude}")
        if self.slope <= 0:
            raise ValueError(f"slope must be positive, got {self.slope}")

    @classmethod
    def with_slope(cls, slope: float) -> "BoundParams":
        return cls(2.0, slope, -1.0)

    @property
    def output_range(self) -> tuple[float, float]:
        return (self.offset, self.amplitude + self.offset)


IFSQ = BoundParams(2.0, 1.6, -1.0)
TANH = BoundParams(2.0, 2.0, -1.0)


@dataclass(frozen=True)
class LevelSpec:
    """Number of quantization levels for each latent dimension.

    The implicit codebook size ``prod(levels)`` must fit in a signed 64-bit
    integer so token indices can be stored as ``int64``.
    """

    levels: tuple[int, ...]

    def __init__(self, levels: Sequence[int]):
        levels = tuple(int(L) for L in levels)
        for L in levels:
            if L < 2:
                raise ValueError(f"every level count must be >= 2, got {L}")
        size = 1
        for L in levels:
            size *= L
        if size > MAX_CODEBOOK_SIZE:
            raise OverflowError(
                f"codebook size {size} does not fit in int64 (max {MAX_CODEBOOK_SIZE})"
            )
        object.__setattr__(self, "levels", levels)

    @classmethod
    def from_bits(cls, bits: int, dim: int) -> "LevelSpec":
        """``dim`` dimensions of ``2**bits + 1`` levels (odd, so zero is a level)."""
        if bits < 1:
            raise ValueError("bits must be >= 1")
        if dim < 0:
            raise ValueError("dim must be >= 0")
        return cls([2**bits + 1] * dim)

    @classmethod
    def uniform(cls, level: int, dim: int) -> "LevelSpec":
        return cls([level] * dim)

    def __len__(self) -> int:
        return len(self.levels)

    @property
    def dim(self) -> int:
        return len(self.levels)

    @property
    def size(self) -> int:
        return codebook_size(self)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.levels, dtype=INDEX_DTYPE)


@dataclass(frozen=True)
class QuantizedLatent:
    digits: np.ndarray
    dequantized: np.ndarray


def _as_finite(z, name: str = "z") -> np.ndarray:
    arr = np.asarray(z, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def _check_dims(arr: np.ndarray, levels: LevelSpec) -> None:
    if arr.ndim == 0 or arr.shape[-1] != levels.dim:
        raise ValueError(
            f"last axis has size {arr.shape[-1] if arr.ndim else 0}, "
            f"expected {levels.dim} to match levels"
        )


def _round_half_away(x: np.ndarray) -> np.ndarray:
    # floor(x + 0.5) misrounds 0.49999999999999994, so compare the fraction instead
    mag = np.abs(x)
    fl = np.floor(mag)
    return np.copysign(fl + (mag - fl >= 0.5), x)


def bound(z, params: BoundParams = IFSQ):
    """``A * sigmoid(alpha * z) + B``, element-wise. Rejects non-finite input."""
    arr = _as_finite(z)
    out = params.amplitude * expit(params.slope * arr) + params.offset
    return float(out) if out.ndim == 0 else out


def bound_derivative(z, params: BoundParams = IFSQ):
    """Analytic derivative ``A * alpha * s * (1 - s)`` with ``s = sigmoid(alpha * z)``."""
    arr = _as_finite(z)
    s = expit(params.slope * arr)
    out = params.amplitude * params.slope * s * (1.0 - s)
    return float(out) if out.ndim == 0 else out


def _check_unit_range(params: BoundParams) -> None:
    lo, hi = params.output_range
    if lo < -1.0 or hi > 1.0:
        raise ValueError(
            f"bound range ({lo}, {hi}) exceeds [-1, 1]; digits would leave the grid"
        )


def round_to_grid(y, levels: LevelSpec) -> np.ndarray:
    """Digits for values already in ``[-1, 1]`` (values outside are clamped)."""
    arr = _as_finite(y, "y")
    _check_dims(arr, levels)
    y = np.clip(arr, -1.0, 1.0)
    half_width = (levels.as_array() - 1) / 2
    digits = _round_half_away(half_width * (y + 1.0))
    return digits.astype(INDEX_DTYPE)


def quantize(z, levels: LevelSpec, params: BoundParams = IFSQ) -> QuantizedLatent:
    """Bound, scale and round ``z`` (last axis = latent dimension)."""
    arr = _as_finite(z)
    _check_dims(arr, levels)
    _check_unit_range(params)
    y = params.amplitude * expit(params.slope * arr) + params.offset
    digits = round_to_grid(y, levels)
    return QuantizedLatent(digits, dequantize(digits, levels))


def dequantize(digits, levels: LevelSpec) -> np.ndarray:
    """Map digits back to ``[-1, 1]``: ``(q - (L-1)/2) * 2/(L-1)``."""
    q = _check_digits(digits, levels)
    L = levels.as_array().astype(np.float64)
    half = (L - 1) / 2
    return (q - half) * (2 / (L - 1))


def quantize_ste(z, levels: LevelSpec, params: BoundParams = IFSQ):
    """Forward value and straight-through derivative of the quantizer.

    The forward value is ``dequantize(quantize(z))``. The rounding step is treated
    as the identity in the backward pass (``z_rounded - stop(z_scaled) + z_scaled``),
    so after dividing by the half width the derivative w.r.t. ``z`` is exactly
    ``bound_derivative(z)``.
    """
    q = quantize(z, levels, params)
    return q.dequantized, np.asarray(bound_derivative(z, params), dtype=np.float64)


def _check_digits(digits, levels: LevelSpec) -> np.ndarray:
    q = np.asarray(digits)
    if q.size and not np.issubdtype(q.dtype, np.integer):
        if not np.all(np.isfinite(q)) or np.any(q != np.round(q)):
            raise ValueError("digits must be integers")
    q = q.astype(INDEX_DTYPE)
    _check_dims(q, levels)
    L = levels.as_array()
    if np.any(q < 0) or np.any(q >= L):
        raise ValueError(f"digit out of range for levels {levels.levels}")
    return q


def codebook_size(levels: LevelSpec) -> int:
    size = 1
    for L in levels.levels:
        size *= L
    return size


def _place_values(levels: LevelSpec) -> np.ndarray:
    # first dimension is the most significant
    places = np.ones(levels.dim, dtype=INDEX_DTYPE)
    for j in range(levels.dim - 2, -1, -1):
        places[j] = places[j + 1] * levels.levels[j + 1]
    return places


def encode_index(digits, levels: LevelSpec):
    """Mixed-radix index ``sum_j q_j * prod_{k>j} L_k``.

    A 1-D digit vector returns a Python ``int``; batched input ``(..., d)``
    returns an ``int64`` array of shape ``(...)``.
    """
    q = _check_digits(digits, levels)
    if levels.dim == 0:
        out = np.zeros(q.shape[:-1], dtype=INDEX_DTYPE)
    else:
        out = (q * _place_values(levels)).sum(axis=-1)
    return int(out) if out.ndim == 0 else out


def decode_index(index, levels: LevelSpec) -> np.ndarray:
    """Inverse of :func:`encode_index`; accepts a scalar or an integer array."""
    idx = np.asarray(index)
    if idx.size and not np.issubdtype(idx.dtype, np.integer):
        raise ValueError("index must be an integer")
    idx = idx.astype(INDEX_DTYPE)
    size = codebook_size(levels)
    if np.any(idx < 0) or np.any(idx >= size):
        raise ValueError(f"index out of range [0, {size - 1}]")
    digits = np.empty(idx.shape + (levels.dim,), dtype=INDEX_DTYPE)
    rest = idx.copy()
    for j in range(levels.dim - 1, -1, -1):
        rest, digits[..., j] = np.divmod(rest, levels.levels[j])
    return digits
