"""Compression ratio of an 8-bit RGB image versus its latent code.

The raw image costs 24 bits per pixel; with spatial downsampling ``f`` one latent
position covers ``f**2`` pixels, so ``CR = 24 f^2 / (bits per latent position)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

VARIANTS = ("continuous", "vq", "ifsq")


@dataclass(frozen=True)
class CompressionSpec:
    """``bits`` is precision bits (continuous), codebook bits (vq) or bits per dim (ifsq)."""

    variant: str
    downsample_factor: int
    latent_dim: int = 1
    bits: int | Fraction = 16

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.downsample_factor < 1:
            raise ValueError("downsample factor must be >= 1")
        if self.latent_dim < 1:
            raise ValueError("latent dim must be >= 1")
        if self.bits < 1:
            raise ValueError("bits must be >= 1")

    @property
    def latent_bits(self) -> Fraction:
        bits = Fraction(self.bits)
        if self.variant == "vq":
            return bits
        return bits * self.latent_dim


def compression_ratio(spec: CompressionSpec) -> tuple[Fraction, int]:
    """Exact ratio and its floor (the printed tables truncate)."""
    exact = Fraction(24 * spec.downsample_factor**2) / spec.latent_bits
    return exact, math.floor(exact)


def bits_per_dim_for_levels(levels: int) -> float:
    """Information content ``log2(L)`` of one dimension."""
    if levels < 2:
        raise ValueError("levels must be >= 2")
    return math.log2(levels)


def table_bits_for_levels(levels: int) -> int:
    """Nominal bit count ``K`` for ``L = 2**K + 1`` levels."""
    if levels < 3:
        raise ValueError("levels must be 2**K + 1 with K >= 1")
    k = (levels - 1).bit_length() - 1
    if 2**k + 1 != levels:
        raise ValueError(f"{levels} is not of the form 2**K + 1")
    return k


def ifsq_ratio_from_levels(f: int, d: int, levels: int, convention: str = "table"):
    """Ratio for ``d`` dims of ``levels`` levels.

    ``convention="table"`` charges ``K`` bits per dim and returns ``(Fraction, int)``;
    ``"entropy"`` charges ``log2(L)`` and returns ``(float, int)``.
    """
    if convention == "table":
        return compression_ratio(CompressionSpec("ifsq", f, d, table_bits_for_levels(levels)))
    if convention == "entropy":
        value = 24 * f * f / (d * bits_per_dim_for_levels(levels))
        return value, math.floor(value)
    raise ValueError(f"unknown convention {convention!r}")
