"""Layer-wise similarity metrics for autoregressive feature stacks.

STS averages the cosine between a layer's feature and the input embedding at the
same position; NTS pairs position ``i`` of the layer with position ``i + 1`` of
the input embedding. A zero row has no direction: its cosine is taken as 0 and
counted in ``zero_rows``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class FeatureTensor:
    """``N x d`` features; float32 input stays float32, anything else becomes float64."""

    values: np.ndarray
    layer_id: int | None = None

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.dtype != np.float32:
            v = v.astype(np.float64)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise ValueError(f"feature tensor must be N x d with N, d >= 1, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("feature tensor contains non-finite values")
        object.__setattr__(self, "values", v)

    @property
    def tokens(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class LayerMetrics:
    layer: int
    sts: float
    nts: float
    zero_rows: int  # positions where the layer or the input row is all zeros


def _values(t) -> np.ndarray:
    v = t.values if isinstance(t, FeatureTensor) else FeatureTensor(t).values
    return v.astype(np.float64, copy=False)


def row_cosines(a, b) -> tuple[np.ndarray, int]:
    """Per-row cosine of two equally shaped matrices and the number of degenerate rows."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    denom = na * nb
    zero = denom == 0
    dots = np.einsum("ij,ij->i", a, b)
    cos = np.divide(dots, denom, out=np.zeros_like(dots), where=~zero)
    return np.clip(cos, -1.0, 1.0), int(zero.sum())


def _check_pair(h, h0) -> tuple[np.ndarray, np.ndarray]:
    h, h0 = _values(h), _values(h0)
    if h.shape != h0.shape:
        raise ValueError(f"shape mismatch: layer {h.shape} vs input {h0.shape}")
    return h, h0


def sts(layer, input_emb) -> float:
    h, h0 = _check_pair(layer, input_emb)
    cos, _ = row_cosines(h, h0)
    return float(cos.mean())


def nts(layer, input_emb) -> float:
    h, h0 = _check_pair(layer, input_emb)
    if h.shape[0] < 2:
        raise ValueError("NTS needs at least 2 tokens")
    cos, _ = row_cosines(h[:-1], h0[1:])
    return float(cos.mean())


def layer_metrics(layer, input_emb, layer_id: int = 0) -> LayerMetrics:
    h, h0 = _check_pair(layer, input_emb)
    aligned, _ = row_cosines(h, h0)
    nts_value = float(row_cosines(h[:-1], h0[1:])[0].mean()) if h.shape[0] >= 2 else float("nan")
    zero = (np.linalg.norm(h, axis=1) == 0) | (np.linalg.norm(h0, axis=1) == 0)
    return LayerMetrics(layer_id, float(aligned.mean()), nts_value, int(zero.sum()))


def pearson(x, y) -> float:
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.size != y.size:
        raise ValueError(f"length mismatch: {x.size} vs {y.size}")
    if x.size < 2:
        raise ValueError("pearson needs at least 2 points")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0 or syy == 0:
        raise ValueError("pearson is undefined for zero variance")
    r = float(dx @ dy) / np.sqrt(sxx * syy)
    return float(np.clip(r, -1.0, 1.0))
