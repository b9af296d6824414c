"""Sampling, uniformity statistics and the three Figure-1 style quantization schemes.

Random streams
--------------
Samples are drawn in fixed-size chunks of ``CHUNK_SIZE`` values. Chunk ``i`` uses
a PCG64 generator seeded with ``SeedSequence(seed, spawn_key=(i,))`` and numpy's
ziggurat ``standard_normal`` (or ``uniform``). Chunks are concatenated in index order,
so the output is bit-identical for any number of worker threads.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .quantizer import IFSQ, BoundParams, LevelSpec, bound, quantize

CHUNK_SIZE = 1 << 16
MAX_SEED = (1 << 64) - 1


@dataclass(frozen=True)
class Source:
    kind: str = "standard_normal"
    lo: float = -1.0
    hi: float = 1.0

    def __post_init__(self):
        if self.kind not in ("standard_normal", "uniform"):
            raise ValueError(f"unknown source kind {self.kind!r}")
        if self.kind == "uniform" and not self.lo < self.hi:
            raise ValueError("uniform source needs lo < hi")

    @classmethod
    def normal(cls) -> "Source":
        return cls("standard_normal")

    @classmethod
    def uniform(cls, lo: float, hi: float) -> "Source":
        return cls("uniform", float(lo), float(hi))

    def describe(self) -> str:
        if self.kind == "uniform":
            return f"uniform({self.lo:g},{self.hi:g})"
        return "standard_normal"


@dataclass(frozen=True)
class SampleSet:
    values: np.ndarray
    seed: int
    source: Source


def _draw_chunk(source: Source, seed: int, chunk: int, size: int) -> np.ndarray:
    ss = np.random.SeedSequence(seed, spawn_key=(chunk,))
    rng = np.random.Generator(np.random.PCG64(ss))
    if source.kind == "uniform":
        return rng.uniform(source.lo, source.hi, size)
    return rng.standard_normal(size)


def sample(source: Source, n: int, seed: int, workers: int = 1) -> SampleSet:
    """Draw ``n`` values deterministically from ``(source, seed)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0 <= seed <= MAX_SEED:
        raise ValueError("seed must be an unsigned 64-bit integer")
    sizes = [min(CHUNK_SIZE, n - start) for start in range(0, n, CHUNK_SIZE)]
    jobs = [(source, seed, i, size) for i, size in enumerate(sizes)]
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(lambda a: _draw_chunk(*a), jobs))
    else:
        chunks = [_draw_chunk(*a) for a in jobs]
    return SampleSet(np.concatenate(chunks), seed, source)


def _unit_samples(samples) -> np.ndarray:
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size == 0:
        raise ValueError("empty sample")
    if not np.all(np.isfinite(x)):
        raise ValueError("samples contain non-finite values")
    if x.min() < -1.0 or x.max() > 1.0:
        raise ValueError("samples must lie in [-1, 1]")
    return x


def ks_uniform(samples) -> float:
    """Two-sided KS distance between the empirical CDF and Uniform(-1, 1)."""
    x = np.sort(_unit_samples(samples))
    n = x.size
    F = (x + 1.0) / 2.0
    i = np.arange(1, n + 1)
    return float(max(np.abs(i / n - F).max(), np.abs((i - 1) / n - F).max()))


def rmse_uniform(samples) -> float:
    """RMS distance between the order statistics and the mid-quantiles of Uniform(-1, 1)."""
    x = np.sort(_unit_samples(samples))
    n = x.size
    target = -1.0 + 2.0 * (np.arange(1, n + 1) - 0.5) / n
    return float(np.sqrt(np.mean((x - target) ** 2)))


@dataclass(frozen=True)
class Histogram:
    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 1 or counts.size == 0:
            raise ValueError("counts must be a non-empty vector")
        if np.any(counts < 0):
            raise ValueError("counts must be non-negative")
        object.__setattr__(self, "counts", counts)

    @classmethod
    def from_digits(cls, digits, bin_count: int) -> "Histogram":
        return cls(np.bincount(np.asarray(digits).ravel(), minlength=bin_count))

    @property
    def bin_count(self) -> int:
        return int(self.counts.size)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def probabilities(self) -> np.ndarray:
        return self.counts / self.total


def entropy_bits(h: Histogram) -> float:
    if h.total == 0:
        raise ValueError("histogram is empty")
    p = h.counts[h.counts > 0] / h.total
    return float(max(0.0, -(p * np.log2(p)).sum()))


def utilization(h: Histogram) -> tuple[float, float]:
    """``(2**entropy / L, occupied bins / L)``."""
    H = entropy_bits(h)
    L = h.bin_count
    return min(1.0, 2.0**H / L), float(np.count_nonzero(h.counts)) / L


def equal_interval_quantize(samples, levels: int, clip: tuple[float, float] = (-3.0, 3.0)):
    """Clip to ``clip`` and split it into ``levels`` equal-width bins.

    Returns ``(digits, reconstruction)`` with bin centers as reconstruction.
    """
    lo, hi = float(clip[0]), float(clip[1])
    if not lo < hi:
        raise ValueError(f"invalid clip range ({lo}, {hi})")
    if levels < 2:
        raise ValueError("levels must be >= 2")
    x = np.clip(np.asarray(samples, dtype=np.float64), lo, hi)
    width = (hi - lo) / levels
    digits = np.floor((x - lo) / width).astype(np.int64)
    np.clip(digits, 0, levels - 1, out=digits)
    return digits, lo + (digits + 0.5) * width


def equal_probability_quantize(samples, levels: int):
    """Quantile binning: the sample of rank ``r`` goes to bin ``floor(r * L / N)``.

    Bins therefore hold ``N // L`` or ``N // L + 1`` samples each (ties are split
    by a stable sort). Each bin is reconstructed at the mean of its members.
    """
    x = np.asarray(samples, dtype=np.float64).ravel()
    n = x.size
    if levels < 2:
        raise ValueError("levels must be >= 2")
    if n < levels:
        raise ValueError(f"need at least {levels} samples, got {n}")
    order = np.argsort(x, kind="stable")
    digits = np.empty(n, dtype=np.int64)
    digits[order] = (np.arange(n, dtype=np.int64) * levels) // n
    sums = np.bincount(digits, weights=x, minlength=levels)
    counts = np.bincount(digits, minlength=levels)
    means = sums / counts
    return digits, means[digits]


def equal_probability_edges(samples, levels: int) -> np.ndarray:
    """Interior edges: the first sample of each bin after the lowest."""
    x = np.sort(np.asarray(samples, dtype=np.float64).ravel())
    n = x.size
    starts = -(-np.arange(1, levels) * n // levels)  # ceil(k * n / L)
    return x[starts]


@dataclass(frozen=True)
class Scheme:
    """Which quantizer to run.

    ``kind`` is one of ``equal-interval``, ``equal-probability`` or ``ifsq``.
    The first two clip to ``clip`` first; ``ifsq`` bounds with ``params`` and
    rounds onto the ``levels``-point grid in ``[-1, 1]``.
    """

    kind: str
    levels: int = 9
    clip: tuple[float, float] = (-3.0, 3.0)
    params: BoundParams = IFSQ

    KINDS = ("equal-interval", "equal-probability", "ifsq")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown scheme {self.kind!r}; expected one of {self.KINDS}")
        if self.levels < 2:
            raise ValueError("levels must be >= 2")
        if not self.clip[0] < self.clip[1]:
            raise ValueError("invalid clip range")


@dataclass(frozen=True)
class BinRow:
    bin: int
    count: int
    prob: float
    center: float
    mse_contrib: float


@dataclass(frozen=True)
class DistributionReport:
    """Summary of one scheme applied to one sample set.

    ``ks`` and ``rmse_uniform`` measure how uniform the values are in the
    quantizer's own partition coordinate, rescaled to ``[-1, 1]``: the clipped
    value for equal-interval, the bounded value for ifsq, and the mid-rank
    ``2 * (rank + 0.5) / N - 1`` for equal-probability. ``mse`` is measured in the
    domain the scheme reconstructs into (clipped input, or the bounded value for ifsq).
    """

    scheme: str
    source: str
    n: int
    ks: float
    rmse_uniform: float
    entropy_bits: float
    utilization: float
    nonzero_bin_fraction: float
    mse: float
    histogram: Histogram
    bins: list[BinRow] = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "scheme": self.scheme,
            "source": self.source,
            "n": self.n,
            "ks": self.ks,
            "rmse_uniform": self.rmse_uniform,
            "entropy_bits": self.entropy_bits,
            "utilization": self.utilization,
            "nonzero_bin_fraction": self.nonzero_bin_fraction,
            "mse": self.mse,
            "counts": self.histogram.counts.tolist(),
        }


def _apply_scheme(x: np.ndarray, scheme: Scheme):
    """Return (digits, reconstruction, reference, unit) for the scheme."""
    if scheme.kind == "ifsq":
        y = bound(x, scheme.params)
        q = quantize(x[:, None], LevelSpec([scheme.levels]), scheme.params)
        return q.digits[:, 0], q.dequantized[:, 0], y, y
    lo, hi = scheme.clip
    xc = np.clip(x, lo, hi)
    if scheme.kind == "equal-interval":
        digits, recon = equal_interval_quantize(xc, scheme.levels, scheme.clip)
        unit = 2.0 * (xc - lo) / (hi - lo) - 1.0
        return digits, recon, xc, np.clip(unit, -1.0, 1.0)
    digits, recon = equal_probability_quantize(xc, scheme.levels)
    n = xc.size
    ranks = np.empty(n, dtype=np.float64)
    ranks[np.argsort(xc, kind="stable")] = np.arange(n)
    return digits, recon, xc, 2.0 * (ranks + 0.5) / n - 1.0


def scheme_report(samples, scheme: Scheme, source: str = "") -> DistributionReport:
    x = np.asarray(getattr(samples, "values", samples), dtype=np.float64).ravel()
    if not source and hasattr(samples, "source"):
        source = samples.source.describe()
    if x.size == 0:
        raise ValueError("empty sample")
    digits, recon, ref, unit = _apply_scheme(x, scheme)
    hist = Histogram.from_digits(digits, scheme.levels)
    sq = (ref - recon) ** 2
    n = x.size
    contrib = np.bincount(digits, weights=sq, minlength=scheme.levels) / n
    center_sum = np.bincount(digits, weights=recon, minlength=scheme.levels)
    with np.errstate(invalid="ignore", divide="ignore"):
        centers = np.where(hist.counts > 0, center_sum / np.maximum(hist.counts, 1), np.nan)
    if scheme.kind == "equal-interval":
        lo, hi = scheme.clip
        w = (hi - lo) / scheme.levels
        centers = lo + (np.arange(scheme.levels) + 0.5) * w
    elif scheme.kind == "ifsq":
        centers = np.linspace(-1.0, 1.0, scheme.levels)
    probs = hist.probabilities()
    rows = [
        BinRow(k, int(hist.counts[k]), float(probs[k]), float(centers[k]), float(contrib[k]))
        for k in range(scheme.levels)
    ]
    perplexity, occupied = utilization(hist)
    return DistributionReport(
        scheme=scheme.kind,
        source=source,
        n=n,
        ks=ks_uniform(unit),
        rmse_uniform=rmse_uniform(unit),
        entropy_bits=entropy_bits(hist),
        utilization=perplexity,
        nonzero_bin_fraction=occupied,
        mse=float(sq.mean()),
        histogram=hist,
        bins=rows,
    )


def error_profile(samples, scheme: Scheme, groups: int = 10) -> list[dict]:
    """Quantization error grouped by deciles (by default) of the original value."""
    x = np.asarray(getattr(samples, "values", samples), dtype=np.float64).ravel()
    digits, recon, ref, _ = _apply_scheme(x, scheme)
    order = np.argsort(x, kind="stable")
    rows = []
    for g, idx in enumerate(np.array_split(order, groups)):
        if idx.size == 0:
            continue
        err = ref[idx] - recon[idx]
        rows.append(
            {
                "group": g,
                "lo": float(x[idx].min()),
                "hi": float(x[idx].max()),
                "mean_abs_error": float(np.abs(err).mean()),
                "mse": float(np.mean(err**2)),
            }
        )
    return rows


def figure1_reports(levels: int = 9, n: int = 500_000, seed: int = 42, workers: int = 1,
                    clip: tuple[float, float] = (-3.0, 3.0)) -> list[DistributionReport]:
    """Equal-interval and equal-probability on N(0, 1), equal-interval on Uniform(clip)."""
    normal = sample(Source.normal(), n, seed, workers)
    flat = sample(Source.uniform(*clip), n, seed, workers)
    return [
        scheme_report(normal, Scheme("equal-interval", levels, clip)),
        scheme_report(normal, Scheme("equal-probability", levels, clip)),
        scheme_report(flat, Scheme("equal-interval", levels, clip)),
    ]


def ks_normal(samples) -> float:
    """KS distance between the samples and the standard normal CDF."""
    x = np.sort(np.asarray(samples, dtype=np.float64).ravel())
    n = x.size
    F = ndtr(x)
    i = np.arange(1, n + 1)
    return float(max(np.abs(i / n - F).max(), np.abs((i - 1) / n - F).max()))
